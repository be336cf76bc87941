"""Hybrid ranking: a weighted blend of TF-IDF and paragraph-vector similarity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tokenization import TokenRegistry, tokenize_question
from .pv import ParagraphVectorModel, infer_pv
from .tfidf import TfidfIndex

__all__ = ["DEFAULT_TOP_K", "DEFAULT_WEIGHT", "RankedParagraph", "Ranking", "blend", "rank"]

DEFAULT_WEIGHT = 0.5
DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class RankedParagraph:
    paragraph_id: str
    tfidf_sim: float
    pv_sim: float
    score: float
    rank: int

    def to_json(self) -> dict:
        return {
            "paragraph_id": self.paragraph_id,
            "tfidf_sim": self.tfidf_sim,
            "pv_sim": self.pv_sim,
            "score": self.score,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class Ranking:
    results: tuple[RankedParagraph, ...]
    truncated: bool = False
    no_match: bool = False

    @property
    def status(self) -> str:
        if self.no_match:
            return "no_match"
        return "truncated" if self.truncated else "ok"

    def __iter__(self):
        return iter(self.results)

    def __len__(self) -> int:
        return len(self.results)

    def __getitem__(self, i):
        return self.results[i]


def blend(pv_sim, tfidf_sim, weight: float):
    return weight * pv_sim + (1.0 - weight) * tfidf_sim


def rank(
    question: str,
    index: TfidfIndex,
    model: ParagraphVectorModel,
    weight: float = DEFAULT_WEIGHT,
    top_k: int = DEFAULT_TOP_K,
    registry: TokenRegistry | None = None,
) -> Ranking:
    """Top ``top_k`` paragraphs for ``question``, best first; ties go to the smaller paragraph id."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must be in [0, 1], got {weight}")
    if top_k < 1:
        raise ValueError("top_k must be positive")
    if not question.strip():
        raise ValueError("question is empty")
    if tuple(index.paragraph_ids) != tuple(model.paragraph_ids):
        raise ValueError("TF-IDF index and paragraph-vector model cover different paragraphs")

    if registry is not None:
        question = tokenize_question(question, registry)

    tfidf_sims = index.similarities(question)
    inferred = infer_pv(model, question)
    if inferred.signal:
        q = inferred.vector / np.linalg.norm(inferred.vector)
        norms = np.linalg.norm(model.doc_vectors, axis=1)
        cos = (model.doc_vectors @ q) / np.where(norms == 0, 1.0, norms)
        pv_sims = (np.clip(cos, -1.0, 1.0) + 1.0) / 2.0
    else:
        if not tfidf_sims.any():
            return Ranking((), truncated=False, no_match=True)
        pv_sims = np.full(index.n_paragraphs, 0.5)

    scores = blend(pv_sims, tfidf_sims, weight)
    ids = index.paragraph_ids
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    truncated = top_k > len(ids)
    results = tuple(
        RankedParagraph(ids[i], float(tfidf_sims[i]), float(pv_sims[i]), float(scores[i]), r)
        for r, i in enumerate(order[:top_k], start=1)
    )
    return Ranking(results, truncated=truncated)
