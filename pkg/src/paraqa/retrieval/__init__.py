"""Paragraph retrieval: TF-IDF, paragraph vectors and the hybrid ranker."""

from .pv import InferredVector, ParagraphVectorModel, PVHyperParams, cosine, infer_pv, train_pv
from .ranking import DEFAULT_TOP_K, DEFAULT_WEIGHT, RankedParagraph, Ranking, rank
from .store import FORMAT_VERSION, load_index, save_index
from .tfidf import TfidfIndex, analyze, build_tfidf, default_stopwords, load_stopwords

__all__ = [
    "DEFAULT_TOP_K",
    "DEFAULT_WEIGHT",
    "FORMAT_VERSION",
    "InferredVector",
    "PVHyperParams",
    "ParagraphVectorModel",
    "RankedParagraph",
    "Ranking",
    "TfidfIndex",
    "analyze",
    "build_tfidf",
    "cosine",
    "default_stopwords",
    "infer_pv",
    "load_index",
    "load_stopwords",
    "rank",
    "save_index",
    "train_pv",
]
