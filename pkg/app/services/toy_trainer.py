"""
Desk-scale linear bi-encoder.

encode(text) = W . phi(text), with phi a hashed character n-gram featurizer
and W (d x D) shared by questions and answers. Trained with full-batch
gradient descent on the in-batch negative log-likelihood, one update per
batch, so the other answers of a page act as hard negatives.

For one batch with feature rows Fq, Fa (n x D):
    Q = Fq W^T, A = Fa W^T, S = Q A^T
    L = -(1/n) sum_i [S_ii - logsumexp_j S_ij]
    G = dL/dS = (softmax(S) - I) / n
    dL/dW = (G A)^T Fq + (G^T Q)^T Fa
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from sklearn.preprocessing import normalize

from app.config import DEFAULT_TRAIN_SEED
from app.errors import DataError, ScoringError, TrainingDivergedError
from app.schemas.corpus import FaqPage
from app.schemas.interchange import ModelFile
from app.services.batch_builder import ANSWER_MARKER, QUESTION_MARKER, TrainingBatch, render_entry
from app.services.embedding_table import ANSWER, QUESTION, EmbeddingTable, write_embedding_table
from app.services.stage_log import StageSummary
from app.utils.hashing import fnv1a_64_text

logger = logging.getLogger(__name__)

DEFAULT_FEATURE_DIM = 2 ** 15
DEFAULT_EMBEDDING_DIM = 64
DEFAULT_NGRAM_SIZES = (2, 3, 4)
DEFAULT_MAX_CHARS = 512
ROLE_MARKERS = frozenset({QUESTION_MARKER, ANSWER_MARKER})

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 3


class HashedFeaturizer:
    """L2-normalized hashed character n-gram counts."""

    def __init__(
        self,
        dim: int = DEFAULT_FEATURE_DIM,
        ngram_sizes: Sequence[int] = DEFAULT_NGRAM_SIZES,
        max_chars: int = DEFAULT_MAX_CHARS,
    ):
        if dim < 1 or dim & (dim - 1):
            raise ValueError("feature dimension must be a power of two")
        self.dim = dim
        self.ngram_sizes = tuple(ngram_sizes)
        self.max_chars = max_chars

    def _index(self, feature: str) -> int:
        return fnv1a_64_text(feature) & (self.dim - 1)

    def counts(self, text: str) -> Dict[int, float]:
        counts: Dict[int, float] = {}
        for token in text[: self.max_chars].lower().split():
            if token in ROLE_MARKERS:
                features = [f"tok:{token}"]
            else:
                padded = f" {token} "
                features = [
                    f"{n}:{padded[i:i + n]}"
                    for n in self.ngram_sizes
                    for i in range(len(padded) - n + 1)
                ]
            for feature in features:
                idx = self._index(feature)
                counts[idx] = counts.get(idx, 0.0) + 1.0
        return counts

    def transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for r, text in enumerate(texts):
            for c, v in sorted(self.counts(text).items()):
                rows.append(r)
                cols.append(c)
                vals.append(v)
        matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(len(texts), self.dim), dtype=np.float64)
        return normalize(matrix, norm="l2", copy=False)


@dataclass
class LinearBiEncoder:
    W: np.ndarray  # d x D
    featurizer: HashedFeaturizer
    seed: int = DEFAULT_TRAIN_SEED

    @classmethod
    def initialize(
        cls,
        dim: int = DEFAULT_EMBEDDING_DIM,
        featurizer: Optional[HashedFeaturizer] = None,
        seed: int = DEFAULT_TRAIN_SEED,
    ) -> "LinearBiEncoder":
        featurizer = featurizer or HashedFeaturizer()
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((dim, featurizer.dim)) / math.sqrt(featurizer.dim)
        return cls(W=W, featurizer=featurizer, seed=seed)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Rows are W . phi(text) for already-rendered texts."""
        return np.asarray(self.featurizer.transform(texts) @ self.W.T)

    def encode_questions(self, questions: Sequence[str]) -> np.ndarray:
        return self.encode([f"{QUESTION_MARKER} {q}" for q in questions])

    def encode_answers(self, answers: Sequence[str]) -> np.ndarray:
        return self.encode([f"{ANSWER_MARKER} {a}" for a in answers])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 50
    seed: int = DEFAULT_TRAIN_SEED
    clip_norm: float = 5.0
    languages: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        # 0 is allowed and leaves W untouched.
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainResult:
    model: LinearBiEncoder
    loss_trace: List[float] = field(default_factory=list)


# ═══════════════════════════════════════════════════════════════════════════
# LOSS AND GRADIENT
# ═══════════════════════════════════════════════════════════════════════════

def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def inbatch_nll(scores: np.ndarray) -> float:
    """Mean over rows of logsumexp_j s_ij - s_ii (gold on the diagonal)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1] or scores.shape[0] < 2:
        raise ValueError(f"in-batch scores must be square with n >= 2, got {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ScoringError("in-batch scores contain NaN or inf")
    row_max = scores.max(axis=1)
    lse = row_max + np.log(np.exp(scores - row_max[:, None]).sum(axis=1))
    return float(np.mean(lse - np.diag(scores)))


def nll_and_gradient(W: np.ndarray, Fq: sparse.csr_matrix, Fa: sparse.csr_matrix) -> Tuple[float, np.ndarray]:
    """Loss and dL/dW for one batch of featurized (rendered) pairs."""
    Q = np.asarray(Fq @ W.T)
    A = np.asarray(Fa @ W.T)
    S = Q @ A.T
    loss = inbatch_nll(S)
    n = S.shape[0]
    G = (_softmax_rows(S) - np.eye(n)) / n
    grad = np.asarray(Fq.T @ (G @ A)).T + np.asarray(Fa.T @ (G.T @ Q)).T
    return loss, grad


def batch_features(model: LinearBiEncoder, batch: TrainingBatch) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    rendered = [render_entry(e.question, e.answer) for e in batch.entries]
    Fq = model.featurizer.transform([q for q, _ in rendered])
    Fa = model.featurizer.transform([a for _, a in rendered])
    return Fq, Fa


# ═══════════════════════════════════════════════════════════════════════════
# TRAINING
# ═══════════════════════════════════════════════════════════════════════════

def train(
    batches: Sequence[TrainingBatch],
    cfg: Optional[TrainConfig] = None,
    model: Optional[LinearBiEncoder] = None,
    dim: int = DEFAULT_EMBEDDING_DIM,
    featurizer: Optional[HashedFeaturizer] = None,
) -> TrainResult:
    """Plain gradient descent, one clipped update per batch per epoch."""
    cfg = cfg or TrainConfig()
    model = model or LinearBiEncoder.initialize(dim, featurizer, cfg.seed)
    if cfg.languages is not None:
        batches = [b for b in batches if b.language in cfg.languages]
    for i, batch in enumerate(batches):
        if len(batch) < 2:
            raise DataError(f"batch {i} ({batch.language}) has {len(batch)} entries; in-batch negatives need >= 2")

    summary = StageSummary("train-toy")
    features = [batch_features(model, b) for b in batches]
    trace: List[float] = []
    streak = 0
    for epoch in range(cfg.epochs):
        losses = []
        for Fq, Fa in features:
            loss, grad = nll_and_gradient(model.W, Fq, Fa)
            norm = float(np.linalg.norm(grad))
            if norm > cfg.clip_norm > 0:
                grad *= cfg.clip_norm / norm
            if cfg.learning_rate:
                model.W -= cfg.learning_rate * grad
            losses.append(loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        trace.append(mean_loss)
        logger.debug(f"epoch {epoch + 1}/{cfg.epochs}: mean loss {mean_loss:.6f}")

        if not math.isfinite(mean_loss):
            raise TrainingDivergedError(f"epoch {epoch + 1}: loss is {mean_loss}")
        streak = streak + 1 if mean_loss > DIVERGENCE_FACTOR * trace[0] else 0
        if streak >= DIVERGENCE_PATIENCE:
            raise TrainingDivergedError(
                f"loss above {DIVERGENCE_FACTOR:g}x the initial {trace[0]:.4f} for "
                f"{DIVERGENCE_PATIENCE} consecutive epochs (epoch {epoch + 1}: {mean_loss:.4f}); "
                f"lower the learning rate"
            )

    summary.update(
        batches=len(batches),
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        initial_loss=round(trace[0], 6) if trace else None,
        final_loss=round(trace[-1], 6) if trace else None,
    )
    summary.log()
    return TrainResult(model=model, loss_trace=trace)


# ═══════════════════════════════════════════════════════════════════════════
# PERSISTENCE
# ═══════════════════════════════════════════════════════════════════════════

def export_embeddings(model: LinearBiEncoder, pages: Iterable[FaqPage], path: Union[str, Path]) -> EmbeddingTable:
    """Encode every question and answer of `pages` into the interchange file."""
    table = EmbeddingTable(model.dim)
    for page in pages:
        for role, vectors in (
            (QUESTION, model.encode_questions(page.questions)),
            (ANSWER, model.encode_answers(page.answers)),
        ):
            for i, vec in enumerate(vectors):
                table.add(page.page_id, role, i, vec)
    write_embedding_table(table, path)
    return table


def save_model(model: LinearBiEncoder, path: Union[str, Path]) -> None:
    record = ModelFile(
        d=model.dim,
        feature_dim=model.featurizer.dim,
        ngram_sizes=model.featurizer.ngram_sizes,
        seed=model.seed,
        max_chars=model.featurizer.max_chars,
        W=[float(x) for x in model.W.astype(np.float32).ravel()],
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(record.model_dump(by_alias=True)), encoding="utf-8")
    logger.info(f"Saved model d={model.dim} D={model.featurizer.dim} to {path}")


def load_model(path: Union[str, Path]) -> LinearBiEncoder:
    try:
        record = ModelFile.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValueError as e:
        raise DataError(f"{path}: malformed model file: {e}") from e
    if len(record.W) != record.d * record.feature_dim:
        raise DataError(f"{path}: W has {len(record.W)} entries, expected {record.d} x {record.feature_dim}")
    featurizer = HashedFeaturizer(record.feature_dim, record.ngram_sizes, record.max_chars)
    W = np.asarray(record.W, dtype=np.float32).astype(np.float64).reshape(record.d, record.feature_dim)
    return LinearBiEncoder(W=W, featurizer=featurizer, seed=record.seed)


def write_loss_trace(trace: Sequence[float], path: Union[str, Path]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(trace, 1):
            writer.writerow([epoch, repr(loss)])
