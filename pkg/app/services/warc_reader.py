"""
Streaming WARC 1.0 reader.

Reads plain `.warc` files and record-level gzip `.warc.gz` files (one gzip
member per record, the Common Crawl layout). Malformed records are skipped
and counted rather than aborting the stream; only a file that does not start
with a WARC/1.0 record is fatal.

Memory stays bounded by the largest single record: plain archives are read
record by record from the file handle, gzip members are inflated one at a
time.
"""
import io
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, Optional, Tuple, Union

from warcio.bufferedreaders import BufferedReader, ChunkedDataException, ChunkedDataReader
from warcio.statusandheaders import StatusAndHeaders, StatusAndHeadersParser, StatusAndHeadersParserException

from app.errors import WarcFormatError

logger = logging.getLogger(__name__)

WARC_MAGIC = b"WARC/1.0\r\n"
GZIP_MAGIC = b"\x1f\x8b"
RECORD_TRAILER = b"\r\n\r\n"

WARC_TYPES = frozenset({
    "warcinfo", "response", "resource", "request",
    "metadata", "revisit", "conversion", "continuation",
})

HTML_CONTENT_TYPES = ("text/html", "application/xhtml+xml")

_CHUNK = 1 << 16


@dataclass
class WarcRecord:
    """One WARC record; `payload` is exactly Content-Length bytes."""
    warc_type: str
    target_uri: Optional[str]
    content_type: str
    payload: bytes
    headers: Dict[str, str] = field(default_factory=dict)


@dataclass
class IngestStats:
    """Counters for the ingest stage."""
    records: int = 0
    skipped: int = 0
    html_responses: int = 0
    non_html: int = 0
    unsupported_encoding: int = 0
    bad_http: int = 0


class _MalformedRecord(Exception):
    """Internal: the record at the current position cannot be read."""


# ═══════════════════════════════════════════════════════════════════════════
# RECORD PARSING
# ═══════════════════════════════════════════════════════════════════════════

def _read_headers(fh: BinaryIO) -> Dict[str, str]:
    headers: Dict[str, str] = {}
    while True:
        line = fh.readline()
        if not line:
            raise _MalformedRecord("header block ends at EOF")
        if line in (b"\r\n", b"\n"):
            return headers
        name, sep, value = line.decode("utf-8", errors="replace").partition(":")
        if not sep:
            raise _MalformedRecord(f"bad header line {line[:60]!r}")
        headers[name.strip().lower()] = value.strip()


def _read_record_at(fh: BinaryIO) -> Tuple[WarcRecord, int]:
    """Parse one record whose version line was already consumed.

    Returns the record and the offset where its payload started.
    """
    headers = _read_headers(fh)
    payload_start = fh.tell()
    try:
        length = int(headers.get("content-length", ""))
    except ValueError:
        raise _MalformedRecord("missing or non-integer Content-Length")
    if length < 0:
        raise _MalformedRecord("negative Content-Length")

    payload = fh.read(length)
    if len(payload) != length:
        raise _MalformedRecord(f"payload truncated ({len(payload)} of {length} bytes)")
    trailer = fh.read(len(RECORD_TRAILER))
    if trailer != RECORD_TRAILER:
        raise _MalformedRecord("record not followed by CRLF CRLF")

    warc_type = headers.get("warc-type", "").lower()
    if warc_type not in WARC_TYPES:
        raise _MalformedRecord(f"unknown WARC-Type {warc_type!r}")
    record = WarcRecord(
        warc_type=warc_type,
        target_uri=headers.get("warc-target-uri"),
        content_type=headers.get("content-type", ""),
        payload=payload,
        headers=headers,
    )
    return record, payload_start


def _seek_next_record(fh: BinaryIO, start: int) -> bool:
    """Position `fh` just after the next line-initial WARC/1.0 at or after `start`."""
    fh.seek(start)
    carry = b""
    base = start
    while True:
        chunk = fh.read(_CHUNK)
        if not chunk:
            return False
        window = carry + chunk
        idx = 0
        while True:
            idx = window.find(WARC_MAGIC, idx)
            if idx < 0:
                break
            line_start = (base - len(carry) + idx) == start or (idx > 0 and window[idx - 1:idx] == b"\n")
            if line_start:
                fh.seek(base - len(carry) + idx + len(WARC_MAGIC))
                return True
            idx += 1
        # Keep one magic length of context so the byte before a match is known.
        carry = window[-len(WARC_MAGIC):]
        base += len(chunk)


def _iter_plain(fh: BinaryIO, stats: IngestStats, source: str) -> Iterator[WarcRecord]:
    """Records of an uncompressed stream; the first line was validated by the caller."""
    while True:
        record_start = fh.tell() - len(WARC_MAGIC)
        try:
            record, _ = _read_record_at(fh)
        except _MalformedRecord as e:
            stats.skipped += 1
            logger.warning(f"{source}: skipping malformed record at byte {record_start}: {e}")
            if not _seek_next_record(fh, record_start + len(WARC_MAGIC)):
                return
            continue
        stats.records += 1
        yield record

        line = fh.readline()
        while line in (b"\r\n", b"\n"):
            line = fh.readline()
        if not line:
            return
        if line != WARC_MAGIC:
            stats.skipped += 1
            logger.warning(f"{source}: expected WARC/1.0 at byte {fh.tell() - len(line)}, resynchronising")
            if not _seek_next_record(fh, fh.tell() - len(line)):
                return


# ═══════════════════════════════════════════════════════════════════════════
# GZIP MEMBERS
# ═══════════════════════════════════════════════════════════════════════════

def _iter_gzip_members(fh: BinaryIO, stats: IngestStats, source: str) -> Iterator[bytes]:
    """Inflate one gzip member at a time."""
    pending = b""
    while True:
        if not pending:
            pending = fh.read(_CHUNK)
            if not pending:
                return
        inflater = zlib.decompressobj(wbits=31)
        parts = []
        fed = bytearray()
        data = pending
        pending = b""
        try:
            while not inflater.eof:
                if not data:
                    data = fh.read(_CHUNK)
                    if not data:
                        raise _MalformedRecord("gzip member truncated")
                fed += data
                parts.append(inflater.decompress(data))
                data = b""
        except (zlib.error, _MalformedRecord) as e:
            stats.skipped += 1
            logger.warning(f"{source}: skipping unreadable gzip member: {e}")
            # Resync on the next gzip header after this member's own magic.
            pending = _seek_gzip_magic(fh, bytes(fed[len(GZIP_MAGIC):]))
            continue
        pending = inflater.unused_data
        yield b"".join(parts)


def _seek_gzip_magic(fh: BinaryIO, buffered: bytes) -> bytes:
    window = buffered
    while True:
        idx = window.find(GZIP_MAGIC + b"\x08")
        if idx >= 0:
            return window[idx:]
        chunk = fh.read(_CHUNK)
        if not chunk:
            return b""
        window = window[-2:] + chunk


def _iter_gzip(fh: BinaryIO, stats: IngestStats, source: str) -> Iterator[WarcRecord]:
    for member_no, member in enumerate(_iter_gzip_members(fh, stats, source)):
        buf = io.BytesIO(member)
        first = buf.readline()
        if first != WARC_MAGIC:
            if member_no == 0:
                raise WarcFormatError(f"{source}: first gzip member is not a WARC/1.0 record")
            stats.skipped += 1
            logger.warning(f"{source}: gzip member {member_no} does not hold a WARC record")
            continue
        try:
            record, _ = _read_record_at(buf)
        except _MalformedRecord as e:
            stats.skipped += 1
            logger.warning(f"{source}: skipping malformed record in gzip member {member_no}: {e}")
            continue
        if buf.read().strip(b"\r\n"):
            if member_no == 0:
                raise WarcFormatError(
                    f"{source}: whole-file gzip is not supported; "
                    f"recompress with one gzip member per record"
                )
            stats.skipped += 1
            logger.warning(f"{source}: gzip member {member_no} holds more than one record")
            continue
        stats.records += 1
        yield record


# ═══════════════════════════════════════════════════════════════════════════
# PUBLIC API
# ═══════════════════════════════════════════════════════════════════════════

class WarcReader:
    """
    Stream records from one archive.

    Counters live on `stats`; `skipped` is the number of physical records
    that could not be read.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.stats = IngestStats()

    @property
    def skipped(self) -> int:
        return self.stats.skipped

    @property
    def yielded(self) -> int:
        return self.stats.records

    @property
    def unsupported_encoding(self) -> int:
        return self.stats.unsupported_encoding

    def __iter__(self) -> Iterator[WarcRecord]:
        if not self.path.exists():
            raise WarcFormatError(f"WARC file not found: {self.path}")
        with open(self.path, "rb") as fh:
            head = fh.read(len(WARC_MAGIC))
            if head.startswith(GZIP_MAGIC):
                fh.seek(0)
                yield from _iter_gzip(fh, self.stats, str(self.path))
            elif head == WARC_MAGIC:
                yield from _iter_plain(fh, self.stats, str(self.path))
            else:
                raise WarcFormatError(f"{self.path}: not a WARC/1.0 archive")
        logger.info(
            f"Read {self.stats.records} records from {self.path} "
            f"({self.stats.skipped} skipped)"
        )


def stream_records(path: Union[str, Path], stats: Optional[IngestStats] = None) -> Iterator[WarcRecord]:
    """Yield records in file order; pass `stats` to collect counters."""
    reader = WarcReader(path)
    if stats is not None:
        reader.stats = stats
    yield from reader


# ═══════════════════════════════════════════════════════════════════════════
# HTTP PAYLOADS
# ═══════════════════════════════════════════════════════════════════════════

_HTTP_PARSER = StatusAndHeadersParser(["HTTP/1.0", "HTTP/1.1", "HTTP/2"])
GZIP_ENCODINGS = ("gzip", "x-gzip")


def _read_all(reader: BufferedReader) -> bytes:
    parts = []
    while True:
        part = reader.read(_CHUNK)
        if not part:
            return b"".join(parts)
        parts.append(part)


def dechunk(body: bytes) -> bytes:
    """Undo HTTP/1.1 chunked transfer encoding."""
    try:
        return _read_all(ChunkedDataReader(io.BytesIO(body), raise_exceptions=True))
    except ChunkedDataException as e:
        raise _MalformedRecord(f"bad chunked body: {e}") from e


def _parse_http(payload: bytes) -> Tuple[StatusAndHeaders, BinaryIO]:
    """Status line and headers; the returned stream is positioned at the body."""
    stream = io.BytesIO(payload)
    try:
        return _HTTP_PARSER.parse(stream), stream
    except (StatusAndHeadersParserException, EOFError) as e:
        raise _MalformedRecord(f"bad HTTP head: {e}") from e


def _decode_body(http: StatusAndHeaders, stream: BinaryIO) -> Optional[bytes]:
    """Apply transfer and content decoding; None for unsupported encodings."""
    encoding = (http.get_header("Content-Encoding") or "identity").strip().lower()
    if encoding not in ("", "identity") + GZIP_ENCODINGS:
        return None
    decomp_type = "gzip" if encoding in GZIP_ENCODINGS else None
    if "chunked" in (http.get_header("Transfer-Encoding") or "").lower():
        reader = ChunkedDataReader(stream, decomp_type=decomp_type, raise_exceptions=True)
    else:
        reader = BufferedReader(stream, decomp_type=decomp_type)
    try:
        return _read_all(reader)
    except ChunkedDataException as e:
        raise _MalformedRecord(f"bad chunked body: {e}") from e


def html_responses(
    records: Iterable[WarcRecord],
    stats: Optional[IngestStats] = None,
) -> Iterator[Tuple[str, str]]:
    """Yield (url, html) for every HTML response; everything else is filtered."""
    stats = stats if stats is not None else IngestStats()
    for record in records:
        if record.warc_type != "response" or not record.target_uri:
            continue
        try:
            http, body = _parse_http(record.payload)
        except _MalformedRecord:
            stats.bad_http += 1
            continue
        content_type = (http.get_header("Content-Type") or "").split(";", 1)[0].strip().lower()
        if content_type not in HTML_CONTENT_TYPES:
            stats.non_html += 1
            continue
        try:
            decoded = _decode_body(http, body)
        except (_MalformedRecord, OSError, zlib.error) as e:
            stats.bad_http += 1
            logger.warning(f"Could not decode body of {record.target_uri}: {e}")
            continue
        if decoded is None:
            stats.unsupported_encoding += 1
            logger.warning(
                f"Skipping {record.target_uri}: unsupported Content-Encoding "
                f"{http.get_header('Content-Encoding')!r}"
            )
            continue
        stats.html_responses += 1
        yield record.target_uri, decoded.decode("utf-8", errors="replace")
