"""Index file: TF-IDF index and paragraph-vector model in one versioned JSON document."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import sparse

from ..errors import InputError, ValidationError
from .pv import ParagraphVectorModel, PVHyperParams
from .tfidf import TfidfIndex

__all__ = ["FORMAT_VERSION", "load_index", "save_index"]

FORMAT_VERSION = 1


def _stop(words):
    return None if words is None else sorted(words)


def save_index(path: str | Path, index: TfidfIndex, model: ParagraphVectorModel) -> None:
    m = index.matrix.tocsr()
    payload = {
        "format_version": FORMAT_VERSION,
        "tfidf": {
            "paragraph_ids": list(index.paragraph_ids),
            "vocabulary": sorted(index.vocabulary, key=index.vocabulary.get),
            "doc_freq": index.doc_freq.tolist(),
            "idf": index.idf.tolist(),
            "indptr": m.indptr.tolist(),
            "indices": m.indices.tolist(),
            "data": m.data.tolist(),
            "empty": list(index.empty),
            "soundex_enabled": index.soundex_enabled,
            "soundex_length": index.soundex_length,
            "stopwords": _stop(index.stopwords),
        },
        "pv": {
            "paragraph_ids": list(model.paragraph_ids),
            "vocabulary": sorted(model.vocabulary, key=model.vocabulary.get),
            "word_counts": model.word_counts.tolist(),
            "doc_vectors": model.doc_vectors.tolist(),
            "word_vectors": model.word_vectors.tolist(),
            "hyperparams": model.hyperparams.to_json(),
            "stopwords": _stop(model.stopwords),
        },
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_index(path: str | Path) -> tuple[TfidfIndex, ParagraphVectorModel]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"index file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: index format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    try:
        t, p = payload["tfidf"], payload["pv"]
        vocab = {w: i for i, w in enumerate(t["vocabulary"])}
        n = len(t["paragraph_ids"])
        matrix = sparse.csr_matrix(
            (np.asarray(t["data"], dtype=np.float64), np.asarray(t["indices"], dtype=np.int32),
             np.asarray(t["indptr"], dtype=np.int32)),
            shape=(n, len(vocab)),
        )
        index = TfidfIndex(
            vocabulary=vocab,
            doc_freq=np.asarray(t["doc_freq"], dtype=np.int64),
            idf=np.asarray(t["idf"], dtype=np.float64),
            matrix=matrix,
            paragraph_ids=tuple(t["paragraph_ids"]),
            empty=tuple(t["empty"]),
            soundex_enabled=bool(t["soundex_enabled"]),
            soundex_length=int(t["soundex_length"]),
            stopwords=None if t["stopwords"] is None else frozenset(t["stopwords"]),
        )
        dim = p["hyperparams"]["dim"]
        model = ParagraphVectorModel(
            paragraph_ids=tuple(p["paragraph_ids"]),
            vocabulary={w: i for i, w in enumerate(p["vocabulary"])},
            word_counts=np.asarray(p["word_counts"], dtype=np.int64),
            doc_vectors=np.asarray(p["doc_vectors"], dtype=np.float64).reshape(-1, dim),
            word_vectors=np.asarray(p["word_vectors"], dtype=np.float64).reshape(-1, dim),
            hyperparams=PVHyperParams(**p["hyperparams"]),
            stopwords=None if p["stopwords"] is None else frozenset(p["stopwords"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed index file: {exc}") from exc
    return index, model
