"""Paragraph vectors, distributed bag-of-words flavour, trained from scratch.

Each paragraph vector is trained to predict the words of its own paragraph
against randomly drawn negative words (logistic loss, SGD, linearly decayed
learning rate). Paragraphs are processed in id order so the result does not
depend on the order they were passed in.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..corpus import Paragraph
from ..errors import TrainingError
from . import _kernels
from .tfidf import analyze

__all__ = ["InferredVector", "PVHyperParams", "ParagraphVectorModel", "cosine", "infer_pv", "train_pv"]


@dataclass(frozen=True)
class PVHyperParams:
    dim: int = 64
    epochs: int = 40
    window: int = 5  # unused by DBOW; kept so a distributed-memory variant shares the config
    negative_samples: int = 5
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    min_count: int = 2
    seed: int = 42
    infer_epochs: int | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.epochs < 1 or self.negative_samples < 1 or self.min_count < 1:
            raise ValueError("epochs, negative_samples and min_count must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ParagraphVectorModel:
    paragraph_ids: tuple[str, ...]
    vocabulary: dict[str, int]
    word_counts: np.ndarray
    doc_vectors: np.ndarray
    word_vectors: np.ndarray
    hyperparams: PVHyperParams
    stopwords: frozenset[str] | None = None

    @property
    def dim(self) -> int:
        return self.doc_vectors.shape[1]

    def vector(self, paragraph_id: str) -> np.ndarray:
        return self.doc_vectors[self.paragraph_ids.index(paragraph_id)]


class InferredVector(NamedTuple):
    vector: np.ndarray
    signal: bool


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _noise_cdf(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def _draw_negatives(rng: np.random.Generator, cdf: np.ndarray, n: int, k: int) -> np.ndarray:
    idx = np.searchsorted(cdf, rng.random((n, k)), side="right")
    return np.minimum(idx, len(cdf) - 1).astype(np.int64)


def _run(doc_vecs, out_vecs, doc_idx, word_idx, cdf, rng, hp: PVHyperParams, epochs: int,
         update_words: bool, backend: str | None):
    n = len(word_idx)
    total = epochs * n
    span = hp.initial_learning_rate - hp.min_learning_rate
    for epoch in range(epochs):
        negatives = _draw_negatives(rng, cdf, n, hp.negative_samples)
        progress = (epoch * n + np.arange(n)) / total
        lrs = hp.initial_learning_rate - span * progress
        _kernels.sgd_epoch(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs,
                           update_words, backend=backend)


def train_pv(
    paragraphs: Sequence[Paragraph],
    hyperparams: PVHyperParams | None = None,
    stopwords=None,
    backend: str | None = None,
) -> ParagraphVectorModel:
    hp = hyperparams or PVHyperParams()
    if len(paragraphs) < 2:
        raise ValueError("paragraph-vector training needs at least 2 paragraphs")
    if len({p.id for p in paragraphs}) != len(paragraphs):
        raise ValueError("paragraph ids must be unique")
    stop = frozenset(stopwords) if stopwords is not None else None

    docs = [analyze(p.text, stop) for p in paragraphs]
    counts: dict[str, int] = {}
    for terms in docs:
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
    vocab_words = sorted(w for w, c in counts.items() if c >= hp.min_count)
    if not vocab_words:
        raise TrainingError(f"vocabulary is empty after min_count={hp.min_count} filtering")
    vocabulary = {w: i for i, w in enumerate(vocab_words)}
    word_counts = np.array([counts[w] for w in vocab_words], dtype=np.int64)

    order = sorted(range(len(paragraphs)), key=lambda i: paragraphs[i].id)
    doc_idx, word_idx = [], []
    for i in order:
        for t in docs[i]:
            w = vocabulary.get(t)
            if w is not None:
                doc_idx.append(i)
                word_idx.append(w)

    rng = np.random.default_rng(hp.seed)
    doc_vecs = np.empty((len(paragraphs), hp.dim))
    for i in order:
        doc_vecs[i] = (rng.random(hp.dim) - 0.5) / hp.dim
    out_vecs = np.zeros((len(vocabulary), hp.dim))

    _run(doc_vecs, out_vecs, np.asarray(doc_idx, dtype=np.int64), np.asarray(word_idx, dtype=np.int64),
         _noise_cdf(word_counts), rng, hp, hp.epochs, True, backend)

    if not (np.isfinite(doc_vecs).all() and np.isfinite(out_vecs).all()):
        raise TrainingError("training diverged (non-finite vectors)")
    return ParagraphVectorModel(
        paragraph_ids=tuple(p.id for p in paragraphs),
        vocabulary=vocabulary,
        word_counts=word_counts,
        doc_vectors=doc_vecs,
        word_vectors=out_vecs,
        hyperparams=hp,
        stopwords=stop,
    )


def infer_pv(model: ParagraphVectorModel, text: str, backend: str | None = None) -> InferredVector:
    """Fit a fresh paragraph vector for ``text`` against the frozen word vectors."""
    hp = model.hyperparams
    word_idx = [model.vocabulary[t] for t in analyze(text, model.stopwords) if t in model.vocabulary]
    if not word_idx:
        return InferredVector(np.zeros(model.dim), False)
    rng = np.random.default_rng(hp.seed)
    vec = ((rng.random(model.dim) - 0.5) / model.dim)[None, :]
    _run(vec, model.word_vectors, np.zeros(len(word_idx), dtype=np.int64), np.asarray(word_idx, dtype=np.int64),
         _noise_cdf(model.word_counts), rng, hp, hp.infer_epochs or hp.epochs, False, backend)
    return InferredVector(vec[0], True)
