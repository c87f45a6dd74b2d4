"""Tests for the hashed-feature linear bi-encoder and its training loop."""
import random

import numpy as np
import pytest

import app.services.toy_trainer as toy_trainer
from app.errors import DataError, ScoringError, TrainingDivergedError
from app.services.batch_builder import BatchEntry, TrainingBatch, build_batches
from app.services.corpus import build_page
from app.services.embedding_table import read_embedding_table
from app.services.oracles import max_relative_error, numerical_gradient, softmax_nll
from app.services.retrieval import EmbeddingScorer, ModelScorer, evaluate, expected_random_mrr
from app.services.split_builder import build_split
from app.services.toy_trainer import (
    HashedFeaturizer,
    LinearBiEncoder,
    TrainConfig,
    batch_features,
    export_embeddings,
    inbatch_nll,
    load_model,
    nll_and_gradient,
    save_model,
    train,
    write_loss_trace,
)


def _batch(*pairs, language="en"):
    entries = [BatchEntry("p", i, q, a) for i, (q, a) in enumerate(pairs)]
    return TrainingBatch(language, max(len(entries), 2), entries)


ENTITIES = [
    "Ardenne Lodge", "Bellmont Inn", "Corvina House", "Dunmore Court", "Elvaston Hall",
    "Farrowby Manor", "Glenrock Suites", "Harwick Rooms", "Islington Yard", "Jessop Villa",
    "Kestrel Point", "Larchfield Arms", "Mardale Keep",
]
FACTS = [
    ("Does {e} have a pool?", "The pool at {e} is heated all year."),
    ("Is breakfast served at {e}?", "Breakfast at {e} starts at seven."),
    ("Can I park at {e}?", "Parking at {e} costs twenty euros a night."),
    ("Are pets allowed at {e}?", "Pets stay at {e} for a small fee."),
    ("Is there a gym at {e}?", "The gym at {e} opens at six."),
]
# Every page asks the same questions about one entity: only the fact tells answers apart.
TEMPLATED = [
    build_page(
        f"https://www.{name.split()[0].lower()}.com/faq", "en",
        [(q.format(e=name), a.format(e=name)) for q, a in FACTS],
    )
    for name in ENTITIES
]


class TestFeaturizer:
    def test_rows_unit_norm(self):
        F = HashedFeaturizer(dim=64).transform(["hello world", "bonjour"])
        assert np.allclose(np.sqrt(F.multiply(F).sum(axis=1)).A1, 1.0)

    def test_empty_text_is_zero_row(self):
        assert HashedFeaturizer(dim=64).transform([""]).nnz == 0

    def test_case_insensitive_and_truncated(self):
        f = HashedFeaturizer(dim=256, max_chars=5)
        assert f.counts("HELLO there") == f.counts("hello")

    def test_role_marker_is_one_token(self):
        f = HashedFeaturizer(dim=2 ** 15)
        assert sum(f.counts("<question>").values()) == 1.0

    def test_dimension_power_of_two(self):
        with pytest.raises(ValueError):
            HashedFeaturizer(dim=100)


class TestLoss:
    def test_matches_direct_sum(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=(4, 4))
        assert inbatch_nll(scores) == pytest.approx(softmax_nll(scores.tolist()), rel=1e-12)

    def test_uniform_scores_give_log_n(self):
        assert inbatch_nll(np.zeros((6, 6))) == pytest.approx(np.log(6))

    @pytest.mark.parametrize("shift", [-7.5, 3.0, 100.0])
    def test_shift_invariant(self, shift):
        rng = np.random.default_rng(2)
        scores = rng.normal(size=(6, 6))
        assert abs(inbatch_nll(scores + shift) - inbatch_nll(scores)) <= 1e-12

    def test_stable_for_large_scores(self):
        assert np.isfinite(inbatch_nll(np.array([[1000.0, 0.0], [0.0, 1000.0]])))

    def test_shape_and_finiteness(self):
        with pytest.raises(ValueError):
            inbatch_nll(np.zeros((1, 1)))
        with pytest.raises(ValueError):
            inbatch_nll(np.zeros((2, 3)))
        with pytest.raises(ScoringError):
            inbatch_nll(np.array([[np.nan, 0.0], [0.0, 0.0]]))


class TestGradient:
    """Analytic gradient against central differences."""

    def test_gradient_check(self):
        model = LinearBiEncoder.initialize(dim=4, featurizer=HashedFeaturizer(dim=32), seed=3)
        model.W *= 8.0
        batch = _batch(
            ("Is breakfast included?", "Breakfast is served daily."),
            ("Can I park my car?", "Parking costs ten euros."),
            ("Do you allow pets?", "Dogs are welcome."),
        )
        Fq, Fa = batch_features(model, batch)
        _, analytic = nll_and_gradient(model.W, Fq, Fa)
        numeric = numerical_gradient(lambda W: nll_and_gradient(W, Fq, Fa)[0], model.W)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_error_measure_is_entrywise(self):
        # A small entry off by half must not hide behind a large one.
        assert max_relative_error(np.array([100.0, 1e-3]), np.array([100.0, 2e-3])) == pytest.approx(0.5)
        assert max_relative_error(np.zeros(3), np.zeros(3)) == 0.0
        with pytest.raises(ValueError):
            max_relative_error(np.zeros(2), np.zeros(3))


class TestTraining:
    """Loss decreases on keyword-separable pages and the fit carries to held-out pages."""

    def test_learns_separable_pages(self, separable, tmp_path):
        manifest = build_split(separable)
        training = separable.filter(manifest.page_ids("training"))
        validation = separable.filter(manifest.page_ids("validation"))
        assert len(validation) >= 1
        assert not {p.page_id for p in training} & {p.page_id for p in validation}

        batches = build_batches(training.pages, capacity=6, seed=1)
        featurizer = HashedFeaturizer(dim=2 ** 15)
        result = train(batches, TrainConfig(learning_rate=2.0, epochs=50, seed=1), dim=64, featurizer=featurizer)
        trace = result.loss_trace
        assert len(trace) == 50
        assert trace[0] == pytest.approx(np.log(6), abs=0.05)
        assert trace[-1] < 0.2 * trace[0]

        table = export_embeddings(result.model, validation.pages, tmp_path / "emb.jsonl")
        report = evaluate(validation.pages, EmbeddingScorer(table))
        assert report.overall.p_at_1 >= 0.9
        assert report.overall.mrr > expected_random_mrr(6)

    def test_same_page_negatives_beat_mixed_batches(self):
        training, validation = TEMPLATED[:10], TEMPLATED[10:]
        per_page = build_batches(training, capacity=len(FACTS))
        assert all({e.page_id for e in b.entries} == {b.entries[0].page_id} for b in per_page)

        entries = [e for b in per_page for e in b.entries]
        random.Random(0).shuffle(entries)
        mixed = [
            TrainingBatch("en", len(FACTS), entries[i:i + len(FACTS)])
            for i in range(0, len(entries), len(FACTS))
        ]

        def validation_p_at_1(batches):
            result = train(
                batches,
                TrainConfig(learning_rate=2.0, epochs=40, seed=3),
                dim=32,
                featurizer=HashedFeaturizer(dim=2 ** 12),
            )
            return evaluate(validation, ModelScorer(result.model)).overall.p_at_1

        assert validation_p_at_1(per_page) >= validation_p_at_1(mixed)

    def test_zero_learning_rate_leaves_weights(self, separable):
        batches = build_batches(separable.pages, capacity=6)
        model = LinearBiEncoder.initialize(dim=8, featurizer=HashedFeaturizer(dim=256), seed=5)
        before = model.W.copy()
        result = train(batches, TrainConfig(learning_rate=0.0, epochs=3), model=model)
        assert np.array_equal(result.model.W, before)
        assert result.loss_trace[0] == result.loss_trace[1] == result.loss_trace[2]

    def test_seeded_initialization(self):
        a = LinearBiEncoder.initialize(dim=4, featurizer=HashedFeaturizer(dim=64), seed=9)
        b = LinearBiEncoder.initialize(dim=4, featurizer=HashedFeaturizer(dim=64), seed=9)
        assert np.array_equal(a.W, b.W)

    def test_language_filter(self, expedia):
        batches = build_batches(expedia.pages, capacity=4)
        model = LinearBiEncoder.initialize(dim=8, featurizer=HashedFeaturizer(dim=256), seed=5)
        result = train(batches, TrainConfig(learning_rate=0.0, epochs=1, languages=("fr",)), model=model)
        fr = [b for b in batches if b.language == "fr"]
        expected = np.mean([nll_and_gradient(model.W, *batch_features(model, b))[0] for b in fr])
        assert result.loss_trace[0] == pytest.approx(expected)

    def test_single_entry_batch_rejected(self):
        batch = TrainingBatch("en", 4, [BatchEntry("p", 0, "Why?", "Because.")])
        with pytest.raises(DataError, match="in-batch negatives"):
            train([batch], TrainConfig(epochs=1), dim=4, featurizer=HashedFeaturizer(dim=64))

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)


class TestDivergence:
    def _fake_losses(self, monkeypatch, losses):
        values = iter(losses)
        monkeypatch.setattr(
            toy_trainer, "nll_and_gradient",
            lambda W, Fq, Fa: (next(values), np.zeros_like(W)),
        )

    def test_sustained_growth_stops_training(self, monkeypatch):
        self._fake_losses(monkeypatch, [1.0, 2.0, 11.0, 12.0, 13.0, 1.0])
        batch = _batch(("a?", "b"), ("c?", "d"))
        with pytest.raises(TrainingDivergedError, match="lower the learning rate"):
            train([batch], TrainConfig(epochs=6), dim=4, featurizer=HashedFeaturizer(dim=64))

    def test_short_spike_tolerated(self, monkeypatch):
        self._fake_losses(monkeypatch, [1.0, 11.0, 12.0, 1.0, 11.0, 0.5])
        batch = _batch(("a?", "b"), ("c?", "d"))
        result = train([batch], TrainConfig(epochs=6), dim=4, featurizer=HashedFeaturizer(dim=64))
        assert result.loss_trace == [1.0, 11.0, 12.0, 1.0, 11.0, 0.5]

    def test_non_finite_loss(self, monkeypatch):
        self._fake_losses(monkeypatch, [1.0, float("nan")])
        batch = _batch(("a?", "b"), ("c?", "d"))
        with pytest.raises(TrainingDivergedError):
            train([batch], TrainConfig(epochs=2), dim=4, featurizer=HashedFeaturizer(dim=64))


class TestPersistence:
    def test_model_round_trip(self, tmp_path, small_page):
        model = LinearBiEncoder.initialize(dim=8, featurizer=HashedFeaturizer(dim=256, max_chars=64), seed=2)
        save_model(model, tmp_path / "model.json")
        again = load_model(tmp_path / "model.json")
        assert again.dim == 8
        assert again.featurizer.dim == 256
        assert again.featurizer.max_chars == 64
        assert again.seed == 2
        assert np.allclose(again.encode_answers(small_page.answers), model.encode_answers(small_page.answers), atol=1e-6)

    def test_truncated_weights_rejected(self, tmp_path):
        model = LinearBiEncoder.initialize(dim=2, featurizer=HashedFeaturizer(dim=4), seed=2)
        save_model(model, tmp_path / "model.json")
        text = (tmp_path / "model.json").read_text(encoding="utf-8").replace('"d": 2', '"d": 3')
        (tmp_path / "model.json").write_text(text, encoding="utf-8")
        with pytest.raises(DataError, match="expected 3 x 4"):
            load_model(tmp_path / "model.json")

    def test_malformed_file(self, tmp_path):
        (tmp_path / "model.json").write_text("{}", encoding="utf-8")
        with pytest.raises(DataError):
            load_model(tmp_path / "model.json")

    def test_exported_embeddings_score_like_model(self, tmp_path, expedia):
        model = LinearBiEncoder.initialize(dim=8, featurizer=HashedFeaturizer(dim=512), seed=4)
        export_embeddings(model, expedia.pages, tmp_path / "emb.jsonl")
        table = read_embedding_table(tmp_path / "emb.jsonl")
        assert len(table) == 2 * expedia.total_pairs
        for page in expedia.pages:
            direct = ModelScorer(model).score_page(page)
            stored = EmbeddingScorer(table).score_page(page)
            assert np.allclose(direct, stored, atol=1e-5)

    def test_loss_trace_csv(self, tmp_path):
        write_loss_trace([1.5, 0.25], tmp_path / "loss.csv")
        assert (tmp_path / "loss.csv").read_text(encoding="utf-8") == "epoch,mean_loss\n1,1.5\n2,0.25\n"
