"""
faqkit pipeline command line.

    python -m app.scripts.faqkit extract --warc fixtures/warc/faq.warc --out corpus.jsonl
    python -m app.scripts.faqkit dedup --corpus corpus.jsonl --out dedup.jsonl --report dedup.json
    python -m app.scripts.faqkit split --corpus dedup.jsonl --out manifest.json
    python -m app.scripts.faqkit batch --corpus dedup.jsonl --split manifest.json --out batches.jsonl
    python -m app.scripts.faqkit train-toy --batches batches.jsonl --out model.json \\
        --corpus dedup.jsonl --embeddings-out embeddings.jsonl
    python -m app.scripts.faqkit eval --scorer tfidf --split manifest.json --corpus dedup.jsonl
    python -m app.scripts.faqkit rank --corpus dedup.jsonl --page <id> --query "..."
    python -m app.scripts.faqkit stats --corpus dedup.jsonl [--split manifest.json]

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Logs go to stderr; artifacts go to files (reports to stdout when no --out).
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from app.config import Settings, load_settings
from app.errors import ConfigurationError, DataError
from app.schemas.reports import EvalReport, SplitManifest
from app.services.batch_builder import build_batches, read_batches, write_batches
from app.services.corpus import Corpus, corpus_statistics, format_statistics, read_corpus, write_corpus
from app.services.dedup import LshConfig, dedup_corpus
from app.services.embedding_table import read_embedding_table
from app.services.faq_extraction import extract_corpus
from app.services.language_id import load_classifier
from app.services.retrieval import (
    EmbeddingScorer,
    ModelScorer,
    RandomScorer,
    Scorer,
    TfidfScorer,
    compare_reports,
    evaluate,
    load_query_map,
    rank_answers,
    substitute_queries,
)
from app.services.split_builder import SplitConfig, build_split, split_histograms
from app.services.toy_trainer import (
    DEFAULT_NGRAM_SIZES,
    HashedFeaturizer,
    TrainConfig,
    export_embeddings,
    load_model,
    save_model,
    train,
    write_loss_trace,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
SCORERS = ("tfidf", "embedding", "model", "random")
SPLITS = ("validation", "training", "excluded")


class UsageErrorParser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; 2 is reserved for data errors here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ═══════════════════════════════════════════════════════════════════════════
# HELPERS
# ═══════════════════════════════════════════════════════════════════════════

def _required(cfg: Settings, field: str, flag: str) -> str:
    value = getattr(cfg, field)
    if not value:
        raise ConfigurationError(f"{flag} is required (or set FAQKIT_{field.upper()})")
    return value


def _input(cfg: Settings, field: str, flag: str) -> Path:
    path = Path(_required(cfg, field, flag))
    if not path.exists():
        raise ConfigurationError(f"{flag}: input file not found: {path}")
    return path


def _write_json(data: Any, path: Optional[str]) -> None:
    text = json.dumps(data, ensure_ascii=False, indent=2) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text)


def _read_manifest(path: Path) -> SplitManifest:
    try:
        return SplitManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise DataError(f"{path}: malformed split manifest: {e}") from e


def _select(corpus: Corpus, cfg: Settings, which: str) -> Corpus:
    """The `which` side of the manifest when one is configured, else everything."""
    if not cfg.manifest_path:
        return corpus
    manifest = _read_manifest(_input(cfg, "manifest_path", "--split"))
    missing = set(manifest.page_ids(which)) - set(corpus.by_id())
    if missing:
        raise DataError(f"{len(missing)} {which} page ids are not in the corpus, e.g. {sorted(missing)[0]}")
    return corpus.filter(manifest.page_ids(which))


def _scorer(kind: str, cfg: Settings) -> Scorer:
    if kind == "tfidf":
        return TfidfScorer()
    if kind == "random":
        return RandomScorer(cfg.eval_seed)
    if kind == "model":
        return ModelScorer(load_model(_input(cfg, "model_path", "--model")))
    encoder = load_model(cfg.model_path) if cfg.model_path else None
    return EmbeddingScorer(read_embedding_table(_input(cfg, "embeddings_path", "--embeddings")), encoder)


# ═══════════════════════════════════════════════════════════════════════════
# SUBCOMMANDS
# ═══════════════════════════════════════════════════════════════════════════

def cmd_extract(args: argparse.Namespace, cfg: Settings) -> int:
    if not cfg.warc_inputs:
        raise ConfigurationError("--warc is required (or set FAQKIT_WARC_INPUTS_STR)")
    for path in cfg.warc_inputs:
        if not Path(path).exists():
            raise ConfigurationError(f"--warc: input file not found: {path}")
    out = _required(cfg, "corpus_path", "--out")
    classifier = load_classifier(cfg.language_map_path, threshold=cfg.language_threshold)
    corpus, stats = extract_corpus(cfg.warc_inputs, classifier, cfg.language_floor, cfg.threads)
    write_corpus(corpus, out)
    if args.stats_out:
        _write_json(stats.to_dict(), args.stats_out)
    return EXIT_OK


def cmd_dedup(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = read_corpus(_input(cfg, "corpus_path", "--corpus"))
    out = _required(cfg, "dedup_corpus_path", "--out")
    lsh = LshConfig(cfg.bands, cfg.rows, cfg.jaccard_threshold, cfg.signature_length)
    result, report = dedup_corpus(corpus, lsh, cfg.dedup_seed, cfg.threads, edge_dump=args.edges)
    write_corpus(result, out)
    if cfg.dedup_report_path:
        _write_json(report.model_dump(), cfg.dedup_report_path)
    return EXIT_OK


def cmd_split(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = read_corpus(_input(cfg, "corpus_path", "--corpus"))
    out = _required(cfg, "manifest_path", "--out")
    split_cfg = SplitConfig(cfg.validation_fraction, cfg.max_pages_per_domain, cfg.one_page_per_domain_training)
    manifest = build_split(corpus, split_cfg, cfg.split_seed)
    _write_json(manifest.model_dump(), out)
    return EXIT_OK


def cmd_batch(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = _select(read_corpus(_input(cfg, "corpus_path", "--corpus")), cfg, args.which)
    out = _required(cfg, "batches_path", "--out")
    batches = build_batches(corpus.pages, cfg.batch_capacity, cfg.batch_seed)
    write_batches(batches, out, cfg.batch_seed)
    return EXIT_OK


def cmd_train_toy(args: argparse.Namespace, cfg: Settings) -> int:
    batches = read_batches(_input(cfg, "batches_path", "--batches"))
    out = _required(cfg, "model_path", "--out")
    languages = tuple(sorted(x.strip() for x in args.languages.split(",") if x.strip())) if args.languages else None
    try:
        train_cfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.train_seed, cfg.clip_norm, languages)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
    featurizer = HashedFeaturizer(cfg.feature_dim, DEFAULT_NGRAM_SIZES, cfg.max_chars)
    result = train(batches, train_cfg, dim=cfg.embedding_dim, featurizer=featurizer)
    save_model(result.model, out)
    if args.loss_out:
        write_loss_trace(result.loss_trace, args.loss_out)
    if cfg.embeddings_path:
        corpus = read_corpus(_input(cfg, "corpus_path", "--corpus"))
        export_embeddings(result.model, corpus.pages, cfg.embeddings_path)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = _select(read_corpus(_input(cfg, "corpus_path", "--corpus")), cfg, args.which)
    scorer = _scorer(args.scorer, cfg)
    pages = list(corpus.pages)
    if cfg.query_map_path:
        if isinstance(scorer, EmbeddingScorer) and scorer.encoder is None:
            raise ConfigurationError("--queries with --scorer embedding needs --model to encode the substituted questions")
        pages = substitute_queries(pages, load_query_map(_input(cfg, "query_map_path", "--queries")))
    report = evaluate(pages, scorer, cfg.threads, config={
        "split": args.which if cfg.manifest_path else None,
        "substituted_queries": bool(cfg.query_map_path),
    })
    _write_json(report.model_dump(), cfg.report_path)
    if args.compare:
        try:
            base = EvalReport.model_validate_json(Path(args.compare).read_text(encoding="utf-8"))
        except ValueError as e:
            raise DataError(f"{args.compare}: malformed eval report: {e}") from e
        _write_json(compare_reports(base, report), None)
    return EXIT_OK


def cmd_rank(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = read_corpus(_input(cfg, "corpus_path", "--corpus"))
    page = corpus.by_id().get(args.page)
    if page is None:
        raise DataError(f"page {args.page} is not in the corpus")
    ranked = rank_answers(args.query, page, _scorer(args.scorer, cfg))
    for position, item in enumerate(ranked[:args.top], 1):
        print(f"{position:>3}  {item.score:+.4f}  [{item.index}] {item.answer}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, cfg: Settings) -> int:
    corpus = read_corpus(_input(cfg, "corpus_path", "--corpus"))
    stats = corpus_statistics(corpus)
    manifest = _read_manifest(_input(cfg, "manifest_path", "--split")) if cfg.manifest_path else None
    if args.json:
        data: Dict[str, Any] = stats.to_dict()
        if manifest is not None:
            data["histograms"] = split_histograms(corpus, manifest)
            data["domain_share"] = {k: v.model_dump() for k, v in manifest.domain_share.items()}
        _write_json(data, None)
        return EXIT_OK

    print(format_statistics(stats))
    if manifest is not None:
        histograms = split_histograms(corpus, manifest)
        print("\nPairs per page (% of pages)")
        print(f"{'bin':<8}{'training':>10}{'validation':>12}")
        for b in histograms["training"] or histograms["validation"]:
            print(f"{b:<8}{histograms['training'].get(b, 0.0):>10.1f}{histograms['validation'].get(b, 0.0):>12.1f}")
        for which, share in sorted(manifest.domain_share.items()):
            print(f"Largest {which} domain: {share.domain} ({share.share:.1%} of pages)")
    return EXIT_OK


# ═══════════════════════════════════════════════════════════════════════════
# PARSER
# ═══════════════════════════════════════════════════════════════════════════

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotenv-style config file (FAQKIT_ keys).")
    common.add_argument("--threads", type=int, help="Worker threads for parallel stages (default 1).")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Log level on stderr.")

    parser = UsageErrorParser(prog="faqkit", description="FAQ corpus and retrieval toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("extract", cmd_extract, "Extract FAQ pages from WARC archives into a corpus.")
    p.add_argument("--warc", action="append", help="WARC file (plain or record-gzip); repeatable.")
    p.add_argument("--out", dest="corpus_path", help="Corpus JSON Lines to write.")
    p.add_argument("--language-map", dest="language_map_path", help="Pass-through language tags (JSON Lines).")
    p.add_argument("--language-floor", dest="language_floor", type=int, help="Minimum pairs to keep a language.")
    p.add_argument("--language-threshold", dest="language_threshold", type=float,
                   help="Minimum classifier confidence; below it a pair is 'und'.")
    p.add_argument("--stats-out", help="Write extraction counters to this JSON file.")

    p = add("dedup", cmd_dedup, "Remove near-duplicate pages with MinHash LSH.")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--out", dest="dedup_corpus_path", help="Deduplicated corpus to write.")
    p.add_argument("--report", dest="dedup_report_path", help="Dedup report JSON to write.")
    p.add_argument("--edges", help="Dump verified edges as JSON Lines.")
    p.add_argument("--signature-length", dest="signature_length", type=int, help="MinHash permutations m.")
    p.add_argument("--bands", dest="bands", type=int, help="LSH bands b.")
    p.add_argument("--rows", dest="rows", type=int, help="Rows per band r (b * r must equal m).")
    p.add_argument("--threshold", dest="jaccard_threshold", type=float, help="Verified Jaccard threshold.")
    p.add_argument("--seed", dest="dedup_seed", type=int, help="MinHash seed.")

    p = add("split", cmd_split, "Build the domain-disjoint train/validation manifest.")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--out", dest="manifest_path", help="Split manifest JSON to write.")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float,
                   help="Target share of each language's pairs in validation.")
    p.add_argument("--max-pages-per-domain", dest="max_pages_per_domain", type=int,
                   help="Cap on validation pages per root domain.")
    p.add_argument("--all-training-pages", dest="one_page_per_domain_training", action="store_false",
                   default=None, help="Keep every page of a training domain, not just the largest.")
    p.add_argument("--seed", dest="split_seed", type=int, help="Seed echoed into the manifest.")

    p = add("batch", cmd_batch, "Pack pages into monolingual training batches.")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--split", dest="manifest_path", help="Split manifest; batches only its --which side.")
    p.add_argument("--which", choices=SPLITS, default="training", help="Manifest side to batch.")
    p.add_argument("--out", dest="batches_path", help="Batch JSON Lines to write (sidecar <stem>.meta.json).")
    p.add_argument("--capacity", dest="batch_capacity", type=int, help="Entries per batch.")
    p.add_argument("--seed", dest="batch_seed", type=int, help="Page shuffle seed.")

    p = add("train-toy", cmd_train_toy, "Train the hashed-feature linear bi-encoder.")
    p.add_argument("--batches", dest="batches_path", help="Batch file from `batch`.")
    p.add_argument("--out", dest="model_path", help="Model JSON to write.")
    p.add_argument("--corpus", dest="corpus_path", help="Corpus whose pairs are exported with --embeddings-out.")
    p.add_argument("--embeddings-out", dest="embeddings_path", help="Embedding table to write.")
    p.add_argument("--loss-out", help="Per-epoch mean loss CSV.")
    p.add_argument("--dim", dest="embedding_dim", type=int, help="Embedding dimension d.")
    p.add_argument("--features", dest="feature_dim", type=int, help="Hashed feature dimension D (power of two).")
    p.add_argument("--lr", dest="learning_rate", type=float, help="Learning rate.")
    p.add_argument("--epochs", dest="epochs", type=int, help="Passes over the batches.")
    p.add_argument("--clip-norm", dest="clip_norm", type=float, help="Gradient norm clip (0 disables).")
    p.add_argument("--max-chars", dest="max_chars", type=int, help="Characters of text featurized.")
    p.add_argument("--languages", help="Comma-separated languages to train on (default all).")
    p.add_argument("--seed", dest="train_seed", type=int, help="Initialization seed.")

    p = add("eval", cmd_eval, "Evaluate per-page answer ranking (P@1, MRR, R@5).")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--split", dest="manifest_path", help="Split manifest; evaluates its --which side.")
    p.add_argument("--which", choices=SPLITS, default="validation", help="Manifest side to evaluate.")
    p.add_argument("--scorer", choices=SCORERS, default="tfidf", help="Scoring function.")
    p.add_argument("--embeddings", dest="embeddings_path", help="Embedding table for --scorer embedding.")
    p.add_argument("--model", dest="model_path", help="Model file for --scorer model (or query encoding).")
    p.add_argument("--queries", dest="query_map_path", help="Substitute query texts (JSON Lines).")
    p.add_argument("--out", dest="report_path", help="Report JSON to write (default stdout).")
    p.add_argument("--compare", help="Base report; prints MRR deltas against it.")
    p.add_argument("--seed", dest="eval_seed", type=int, help="Seed for --scorer random.")

    p = add("rank", cmd_rank, "Rank one page's answers for a free-text query.")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--page", required=True, help="Page id.")
    p.add_argument("--query", required=True, help="Query text.")
    p.add_argument("--scorer", choices=("tfidf", "model", "random"), default="tfidf", help="Scoring function.")
    p.add_argument("--model", dest="model_path", help="Model file for --scorer model.")
    p.add_argument("--top", type=int, default=5, help="Answers to print.")
    p.add_argument("--seed", dest="eval_seed", type=int, help="Seed for --scorer random.")

    p = add("stats", cmd_stats, "Print per-language corpus statistics.")
    p.add_argument("--corpus", dest="corpus_path", help="Input corpus.")
    p.add_argument("--split", dest="manifest_path", help="Also show training vs validation histograms.")
    p.add_argument("--json", action="store_true", help="Emit JSON instead of a table.")
    return parser


def settings_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags whose dest names a Settings field; unset flags are None and skipped."""
    overrides = {k: v for k, v in vars(args).items() if k in Settings.model_fields and v is not None}
    warc: Optional[List[str]] = getattr(args, "warc", None)
    if warc:
        overrides["warc_inputs_str"] = ",".join(warc)
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr, force=True)

    try:
        cfg = load_settings(args.config, settings_overrides(args))
        return args.handler(args, cfg)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (DataError, OSError) as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
