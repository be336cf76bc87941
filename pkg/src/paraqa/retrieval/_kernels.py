"""Negative-sampling SGD kernels for paragraph-vector (PV-DBOW) training.

Two interchangeable implementations of the same update rule: a numba
``@njit`` loop and a plain numpy loop. Set ``PARAQA_DISABLE_NUMBA=1`` to force
the numpy path (it is also used automatically when numba is not importable).

Per token the positive word and its negative samples are scored against the
paragraph vector using the parameters as they were *before* the token, then
all updates are applied. Both paths therefore agree up to float rounding.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

DISABLE_ENV = "PARAQA_DISABLE_NUMBA"
_MAX_LOGIT = 30.0


def numba_enabled() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip().lower()
    return HAVE_NUMBA and flag not in {"1", "true", "yes", "on"}


def resolve_backend(backend: str | None = None) -> str:
    if backend is None:
        return "numba" if numba_enabled() else "numpy"
    if backend not in {"numba", "numpy"}:
        raise ValueError(f"unknown kernel backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def sgd_epoch_numpy(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs, update_words):
    k = negatives.shape[1]
    labels = np.zeros(k + 1)
    labels[0] = 1.0
    targets = np.empty(k + 1, dtype=np.int64)
    for t in range(doc_idx.shape[0]):
        d = doc_idx[t]
        dv = doc_vecs[d]
        targets[0] = word_idx[t]
        targets[1:] = negatives[t]
        rows = out_vecs[targets]
        logits = np.clip(rows @ dv, -_MAX_LOGIT, _MAX_LOGIT)
        g = (labels - 1.0 / (1.0 + np.exp(-logits))) * lrs[t]
        g[1:][negatives[t] == targets[0]] = 0.0
        neu1e = g @ rows
        if update_words:
            np.add.at(out_vecs, targets, g[:, None] * dv)
        doc_vecs[d] = dv + neu1e


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _sgd_epoch_numba(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs, update_words):
        n = doc_idx.shape[0]
        k = negatives.shape[1]
        dim = doc_vecs.shape[1]
        g = np.empty(k + 1)
        targets = np.empty(k + 1, dtype=np.int64)
        dv = np.empty(dim)
        neu1e = np.empty(dim)
        for t in range(n):
            d = doc_idx[t]
            for j in range(dim):
                dv[j] = doc_vecs[d, j]
            targets[0] = word_idx[t]
            for i in range(k):
                targets[i + 1] = negatives[t, i]
            for i in range(k + 1):
                w = targets[i]
                dot = 0.0
                for j in range(dim):
                    dot += out_vecs[w, j] * dv[j]
                if dot > _MAX_LOGIT:
                    dot = _MAX_LOGIT
                elif dot < -_MAX_LOGIT:
                    dot = -_MAX_LOGIT
                label = 1.0 if i == 0 else 0.0
                g[i] = (label - 1.0 / (1.0 + np.exp(-dot))) * lrs[t]
                if i > 0 and w == targets[0]:
                    g[i] = 0.0
            for j in range(dim):
                acc = 0.0
                for i in range(k + 1):
                    acc += g[i] * out_vecs[targets[i], j]
                neu1e[j] = acc
            if update_words:
                for i in range(k + 1):
                    w = targets[i]
                    for j in range(dim):
                        out_vecs[w, j] += g[i] * dv[j]
            for j in range(dim):
                doc_vecs[d, j] = dv[j] + neu1e[j]

else:  # pragma: no cover
    _sgd_epoch_numba = None


def sgd_epoch(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs, update_words=True, backend=None):
    """Run one pass of updates in place over the flattened (paragraph, word) stream."""
    if resolve_backend(backend) == "numba":
        _sgd_epoch_numba(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs, update_words)
    else:
        sgd_epoch_numpy(doc_vecs, out_vecs, doc_idx, word_idx, negatives, lrs, update_words)
