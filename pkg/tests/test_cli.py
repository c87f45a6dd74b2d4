"""End-to-end tests of the faqkit command line."""
import json

import pytest

from app.scripts.faqkit import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from app.services.corpus import read_corpus
from app.services.fixtures import SEPARABLE_PAGES, SEPARABLE_PAIRS
from app.services.retrieval import expected_random_mrr

ARTIFACTS = [
    "corpus.jsonl", "dedup.jsonl", "dedup.json", "manifest.json", "batches.jsonl",
    "batches.meta.json", "model.json", "embeddings.jsonl", "loss.csv", "tfidf.json", "embedding.json",
]


def run_pipeline(fixture_tree, out, threads):
    """Each stage reads the previous stage's output, starting from the separable archive."""
    def ok(*argv):
        assert main(list(argv) + ["--threads", str(threads)]) == EXIT_OK, argv

    cfg = str(fixture_tree["config"])
    ok("extract", "--config", cfg, "--warc", str(fixture_tree["separable_warc"]), "--out", str(out / "corpus.jsonl"))
    ok("dedup", "--corpus", str(out / "corpus.jsonl"), "--out", str(out / "dedup.jsonl"),
       "--report", str(out / "dedup.json"))
    ok("split", "--corpus", str(out / "dedup.jsonl"), "--out", str(out / "manifest.json"))
    ok("batch", "--corpus", str(out / "dedup.jsonl"), "--split", str(out / "manifest.json"),
       "--capacity", "6", "--out", str(out / "batches.jsonl"))
    ok("train-toy", "--batches", str(out / "batches.jsonl"), "--out", str(out / "model.json"),
       "--corpus", str(out / "dedup.jsonl"), "--embeddings-out", str(out / "embeddings.jsonl"),
       "--loss-out", str(out / "loss.csv"), "--dim", "64", "--features", str(2 ** 15), "--epochs", "50", "--lr", "2.0")
    ok("eval", "--corpus", str(out / "dedup.jsonl"), "--split", str(out / "manifest.json"),
       "--scorer", "tfidf", "--out", str(out / "tfidf.json"))
    ok("eval", "--corpus", str(out / "dedup.jsonl"), "--split", str(out / "manifest.json"),
       "--scorer", "embedding", "--embeddings", str(out / "embeddings.jsonl"), "--out", str(out / "embedding.json"))


def _constant_query_map(pipeline, tmp_path):
    path = tmp_path / "queries.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for page in read_corpus(pipeline / "dedup.jsonl").pages:
            for i in range(page.size):
                f.write(json.dumps({"page": page.page_id, "index": i, "text": "completely unrelated constant query?"}) + "\n")
    return path


@pytest.fixture(scope="module")
def pipeline(fixture_tree, tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    run_pipeline(fixture_tree, out, threads=1)
    return out


class TestUsage:
    """Exit codes: 0 ok, 1 usage or configuration, 2 data."""

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "train-toy" in capsys.readouterr().out

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["dedup", "--no-such-flag"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_required_input(self):
        assert main(["extract", "--out", "corpus.jsonl"]) == EXIT_USAGE

    def test_nonexistent_input(self, tmp_path):
        assert main(["dedup", "--corpus", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_invalid_setting(self, fixture_tree, tmp_path):
        argv = ["dedup", "--corpus", str(fixture_tree["hotels"]), "--out", str(tmp_path / "o"), "--bands", "7"]
        assert main(argv) == EXIT_USAGE

    def test_non_warc_input_is_data_error(self, tmp_path):
        bogus = tmp_path / "bogus.warc"
        bogus.write_text("not an archive\n", encoding="utf-8")
        assert main(["extract", "--warc", str(bogus), "--out", str(tmp_path / "c.jsonl")]) == EXIT_DATA

    def test_malformed_corpus_is_data_error(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("{\"id\": 1}\n", encoding="utf-8")
        assert main(["stats", "--corpus", str(corpus)]) == EXIT_DATA


class TestPipeline:
    """Every stage through the CLI on the fixture tree."""

    def test_artifacts_written(self, pipeline):
        for name in ARTIFACTS:
            assert (pipeline / name).exists(), name

    def test_extract_counts(self, pipeline, fixture_tree):
        lines = (pipeline / "corpus.jsonl").read_text(encoding="utf-8").splitlines()
        assert sum(len(json.loads(line)["pairs"]) for line in lines) == SEPARABLE_PAGES * SEPARABLE_PAIRS
        assert read_corpus(pipeline / "corpus.jsonl").pages == read_corpus(fixture_tree["separable"]).pages

    def test_embedding_beats_chance_on_validation(self, pipeline):
        report = json.loads((pipeline / "embedding.json").read_text(encoding="utf-8"))
        assert report["config"]["split"] == "validation"
        assert report["overall"]["p_at_1"] > 1 / SEPARABLE_PAIRS
        assert report["overall"]["mrr"] > expected_random_mrr(SEPARABLE_PAIRS)

    def test_substituted_queries_need_model(self, pipeline, tmp_path):
        queries = _constant_query_map(pipeline, tmp_path)
        argv = ["eval", "--corpus", str(pipeline / "dedup.jsonl"), "--split", str(pipeline / "manifest.json"),
                "--scorer", "embedding", "--embeddings", str(pipeline / "embeddings.jsonl"),
                "--queries", str(queries), "--out", str(tmp_path / "r.json")]
        assert main(argv) == EXIT_USAGE
        assert main(argv + ["--model", str(pipeline / "model.json")]) == EXIT_OK
        report = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
        base = json.loads((pipeline / "embedding.json").read_text(encoding="utf-8"))
        assert report["config"]["substituted_queries"] is True
        assert report["overall"]["mrr"] == pytest.approx(expected_random_mrr(SEPARABLE_PAIRS))
        assert report["overall"]["mrr"] != base["overall"]["mrr"]

    def test_extract_stats_out(self, fixture_tree, tmp_path):
        argv = ["extract", "--config", str(fixture_tree["config"]), "--warc", str(fixture_tree["faq"]),
                "--out", str(tmp_path / "c.jsonl"), "--stats-out", str(tmp_path / "stats.json")]
        assert main(argv) == EXIT_OK
        stats = json.loads((tmp_path / "stats.json").read_text(encoding="utf-8"))
        assert stats["rejected"] == {"code_like_prefix": 2, "no_question_mark": 1}

    def test_reports_echo_config(self, pipeline):
        report = json.loads((pipeline / "tfidf.json").read_text(encoding="utf-8"))
        assert report["config"] == {"kind": "tfidf", "split": "validation", "substituted_queries": False}
        dedup = json.loads((pipeline / "dedup.json").read_text(encoding="utf-8"))
        assert dedup["config"]["seed"] == 20210901

    def test_same_output_for_any_thread_count(self, fixture_tree, pipeline, tmp_path):
        run_pipeline(fixture_tree, tmp_path, threads=4)
        for name in ARTIFACTS:
            assert (tmp_path / name).read_bytes() == (pipeline / name).read_bytes(), name

    def test_compare(self, pipeline, capsys):
        argv = ["eval", "--corpus", str(pipeline / "dedup.jsonl"), "--split", str(pipeline / "manifest.json"),
                "--scorer", "random", "--out", str(pipeline / "random.json"), "--compare", str(pipeline / "tfidf.json")]
        assert main(argv) == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert "overall" in rows

    def test_compare_malformed(self, pipeline, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}", encoding="utf-8")
        argv = ["eval", "--corpus", str(pipeline / "dedup.jsonl"), "--out", str(tmp_path / "r.json"),
                "--compare", str(bad)]
        assert main(argv) == EXIT_DATA

    def test_rank(self, pipeline, capsys):
        page = json.loads((pipeline / "dedup.jsonl").read_text(encoding="utf-8").splitlines()[0])
        argv = ["rank", "--corpus", str(pipeline / "dedup.jsonl"), "--page", page["id"],
                "--query", page["pairs"][0]["question"], "--top", "2"]
        assert main(argv) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("  1")

    def test_rank_unknown_page(self, pipeline):
        argv = ["rank", "--corpus", str(pipeline / "dedup.jsonl"), "--page", "ffff", "--query", "x"]
        assert main(argv) == EXIT_DATA

    def test_stats_json(self, pipeline, capsys):
        argv = ["stats", "--corpus", str(pipeline / "dedup.jsonl"), "--split", str(pipeline / "manifest.json"), "--json"]
        assert main(argv) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert {row["language"] for row in data["languages"]} == {"en"}
        assert set(data["histograms"]) == {"training", "validation"}

    def test_stats_table(self, pipeline, capsys):
        assert main(["stats", "--corpus", str(pipeline / "dedup.jsonl")]) == EXIT_OK
        assert "Lang." in capsys.readouterr().out
