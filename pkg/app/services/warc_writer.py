"""
Small WARC 1.0 writer used to assemble fixture archives byte by byte.

Record ids and dates are derived from a counter so two runs produce
identical bytes.
"""
import gzip
import logging
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union
from urllib.parse import urlsplit

from app.utils.hashing import fnv1a_64_text

logger = logging.getLogger(__name__)

FIXED_DATE = "2021-09-01T00:00:00Z"


def http_response(
    body: bytes,
    content_type: str = "text/html; charset=utf-8",
    extra_headers: Optional[List[Tuple[str, str]]] = None,
    chunk_size: Optional[int] = None,
) -> bytes:
    """HTTP/1.1 response bytes; `chunk_size` switches on chunked transfer encoding."""
    headers = [("Content-Type", content_type)]
    headers.extend(extra_headers or [])
    if chunk_size:
        headers.append(("Transfer-Encoding", "chunked"))
        parts = []
        for i in range(0, len(body), chunk_size):
            piece = body[i:i + chunk_size]
            parts.append(f"{len(piece):x}\r\n".encode("ascii") + piece + b"\r\n")
        parts.append(b"0\r\n\r\n")
        payload = b"".join(parts)
    else:
        headers.append(("Content-Length", str(len(body))))
        payload = body
    head = "HTTP/1.1 200 OK\r\n" + "".join(f"{k}: {v}\r\n" for k, v in headers) + "\r\n"
    return head.encode("iso-8859-1") + payload


class WarcWriter:
    """
    Append records to a plain or record-gzip archive.

    Usage:
        with WarcWriter(path, gzip_records=True) as w:
            w.write_record("response", payload, target_uri=url)
    """

    def __init__(self, path: Union[str, Path], gzip_records: bool = False):
        self.path = Path(path)
        self.gzip_records = gzip_records
        self._count = 0
        self._fh: Optional[BinaryIO] = None

    def __enter__(self) -> "WarcWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "wb")
        return self

    def __exit__(self, *exc) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None
        logger.debug(f"Wrote {self._count} records to {self.path}")

    def _record_id(self) -> str:
        digest = fnv1a_64_text(f"{self.path.name}:{self._count}")
        return f"<urn:uuid:00000000-0000-0000-0000-{digest & 0xFFFFFFFFFFFF:012x}>"

    def record_bytes(
        self,
        warc_type: str,
        payload: bytes,
        target_uri: Optional[str] = None,
        content_type: Optional[str] = None,
        truncate_to: Optional[int] = None,
        extra_headers: Optional[Dict[str, str]] = None,
    ) -> bytes:
        """Serialize one record. `truncate_to` keeps only that many payload
        bytes while still declaring the full Content-Length."""
        if content_type is None:
            content_type = {
                "response": "application/http; msgtype=response",
                "request": "application/http; msgtype=request",
                "warcinfo": "application/warc-fields",
            }.get(warc_type, "application/octet-stream")
        headers = [
            ("WARC-Type", warc_type),
            ("WARC-Record-ID", self._record_id()),
            ("WARC-Date", FIXED_DATE),
        ]
        if target_uri:
            headers.append(("WARC-Target-URI", target_uri))
        headers.append(("Content-Type", content_type))
        headers.extend((extra_headers or {}).items())
        headers.append(("Content-Length", str(len(payload))))

        body = payload if truncate_to is None else payload[:truncate_to]
        head = "WARC/1.0\r\n" + "".join(f"{k}: {v}\r\n" for k, v in headers) + "\r\n"
        return head.encode("utf-8") + body + b"\r\n\r\n"

    def write_record(self, warc_type: str, payload: bytes, **kwargs) -> None:
        if self._fh is None:
            raise RuntimeError("WarcWriter used outside a with block")
        data = self.record_bytes(warc_type, payload, **kwargs)
        if self.gzip_records:
            data = gzip.compress(data, mtime=0)
        self._fh.write(data)
        self._count += 1

    def write_raw(self, data: bytes) -> None:
        """Write bytes as-is (for garbage between records)."""
        if self._fh is None:
            raise RuntimeError("WarcWriter used outside a with block")
        self._fh.write(data)

    def write_response(self, url: str, html: str, **http_kwargs) -> None:
        self.write_record(
            "response",
            http_response(html.encode("utf-8"), **http_kwargs),
            target_uri=url,
        )

    def write_warcinfo(self, fields: Dict[str, str]) -> None:
        payload = "".join(f"{k}: {v}\r\n" for k, v in fields.items()).encode("utf-8")
        self.write_record("warcinfo", payload)

    def write_request(self, url: str) -> None:
        parts = urlsplit(url)
        payload = f"GET {parts.path or '/'} HTTP/1.1\r\nHost: {parts.netloc}\r\n\r\n".encode("utf-8")
        self.write_record("request", payload, target_uri=url)
