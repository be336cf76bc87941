"""TF-IDF paragraph index with optional Soundex-encoded terms.

Weights are raw term count times ``ln((1 + N) / (1 + df)) + 1``, and every
paragraph row is L2-normalised, so a cosine is a plain dot product.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from ..corpus import Paragraph
from ..phonetics import DEFAULT_LENGTH, encode_terms

__all__ = ["TfidfIndex", "analyze", "build_tfidf", "default_stopwords", "load_stopwords"]

_TERM = re.compile(r"[^\W_]+")


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("paraqa.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return _parse_wordlist(text)


def load_stopwords(path: str | Path) -> frozenset[str]:
    return _parse_wordlist(Path(path).read_text(encoding="utf-8"))


def _parse_wordlist(text: str) -> frozenset[str]:
    return frozenset(
        ln.strip().casefold() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")
    )


def analyze(
    text: str,
    stopwords: Iterable[str] | None = None,
    soundex_length: int | None = None,
) -> list[str]:
    """Casefolded word terms minus stopwords, Soundex-encoded when a length is given."""
    stop = default_stopwords() if stopwords is None else stopwords
    terms = [t for t in _TERM.findall(text.casefold()) if t not in stop]
    if soundex_length:
        terms = encode_terms(terms, soundex_length)
    return terms


@dataclass(frozen=True)
class TfidfIndex:
    vocabulary: dict[str, int]
    doc_freq: np.ndarray
    idf: np.ndarray
    matrix: sparse.csr_matrix
    paragraph_ids: tuple[str, ...]
    empty: tuple[bool, ...]
    soundex_enabled: bool = False
    soundex_length: int = DEFAULT_LENGTH
    stopwords: frozenset[str] | None = None

    @property
    def n_paragraphs(self) -> int:
        return len(self.paragraph_ids)

    def terms(self, text: str) -> list[str]:
        return analyze(text, self.stopwords, self.soundex_length if self.soundex_enabled else None)

    def vectorize(self, text: str) -> np.ndarray:
        """Dense L2-normalised query vector; all zeros when no term is in the vocabulary."""
        vec = np.zeros(len(self.vocabulary))
        for term in self.terms(text):
            col = self.vocabulary.get(term)
            if col is not None:
                vec[col] += 1.0
        vec *= self.idf
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def similarities(self, text: str) -> np.ndarray:
        """Cosine of ``text`` against every paragraph, clamped to [0, 1]."""
        sims = self.matrix @ self.vectorize(text)
        return np.clip(np.asarray(sims).ravel(), 0.0, 1.0)

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i].toarray().ravel()


def build_tfidf(
    paragraphs: Sequence[Paragraph],
    soundex: int | None = None,
    stopwords: Iterable[str] | None = None,
) -> TfidfIndex:
    """Index ``paragraphs``; pass a code length as ``soundex`` to index Soundex codes instead of words."""
    if not paragraphs:
        raise ValueError("cannot build a TF-IDF index over an empty corpus")
    if len({p.id for p in paragraphs}) != len(paragraphs):
        raise ValueError("paragraph ids must be unique")
    if soundex is not None and soundex < 4:
        raise ValueError(f"soundex code length must be >= 4, got {soundex}")
    stop = frozenset(stopwords) if stopwords is not None else None
    docs = [analyze(p.text, stop, soundex) for p in paragraphs]

    vocabulary: dict[str, int] = {}
    for terms in docs:
        for t in terms:
            vocabulary.setdefault(t, len(vocabulary))

    rows, cols, vals = [], [], []
    for r, terms in enumerate(docs):
        counts: dict[int, int] = {}
        for t in terms:
            c = vocabulary[t]
            counts[c] = counts.get(c, 0) + 1
        for c, n in counts.items():
            rows.append(r)
            cols.append(c)
            vals.append(float(n))
    n_docs, n_terms = len(docs), len(vocabulary)
    tf = sparse.csr_matrix((vals, (rows, cols)), shape=(n_docs, n_terms), dtype=np.float64)
    doc_freq = np.bincount(tf.indices, minlength=n_terms).astype(np.int64)
    idf = np.log((1.0 + n_docs) / (1.0 + doc_freq)) + 1.0

    weighted = tf.multiply(idf[None, :]).tocsr()
    norms = np.sqrt(np.asarray(weighted.multiply(weighted).sum(axis=1)).ravel())
    empty = norms == 0
    scale = np.where(empty, 0.0, 1.0 / np.where(empty, 1.0, norms))
    matrix = sparse.diags(scale) @ weighted

    return TfidfIndex(
        vocabulary=vocabulary,
        doc_freq=doc_freq,
        idf=idf,
        matrix=sparse.csr_matrix(matrix),
        paragraph_ids=tuple(p.id for p in paragraphs),
        empty=tuple(bool(e) for e in empty),
        soundex_enabled=soundex is not None,
        soundex_length=soundex or DEFAULT_LENGTH,
        stopwords=stop,
    )
