"""Answer scoring: SQuAD-style token F1 plus manually assigned quality (Q) scores."""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InputError, ValidationError

__all__ = [
    "Q_LABELS",
    "EvalRecord",
    "QaExample",
    "RunReport",
    "best_gold_f1",
    "comparison_report",
    "evaluate_run",
    "load_predictions",
    "load_q_scores",
    "load_squad",
    "normalize_answer",
    "normalize_q",
    "render_table",
    "token_f1",
]

Q_LABELS = {1: "unacceptable", 2: "partially answered", 3: "completely answered"}

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = frozenset(string.punctuation)


def normalize_answer(text: str) -> str:
    """Casefold, drop punctuation and articles, collapse whitespace."""
    text = "".join(ch for ch in text.casefold() if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def token_f1(predicted: str, gold: str) -> tuple[float, float, float]:
    """``(precision, recall, f1)`` over the multiset of normalised tokens."""
    pred_tokens = normalize_answer(predicted).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0, 1.0, 1.0
    tp = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if tp == 0:
        return 0.0, 0.0, 0.0
    precision = tp / len(pred_tokens)
    recall = tp / len(gold_tokens)
    return precision, recall, 2 * precision * recall / (precision + recall)


def best_gold_f1(predicted: str, golds: Sequence[str]) -> tuple[float, float, float]:
    if not golds:
        raise ValueError("at least one gold answer is required")
    return max((token_f1(predicted, g) for g in golds), key=lambda t: t[2])


def normalize_q(q: int) -> float:
    """Map a 1-3 quality grade onto [0, 1]."""
    if isinstance(q, bool) or q not in Q_LABELS:
        raise ValueError(f"Q-score must be 1, 2 or 3, got {q!r}")
    return (q - 1) / 2


@dataclass(frozen=True)
class QaExample:
    id: str
    question: str
    context_ref: str
    gold_answers: tuple[str, ...]
    context: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        if not self.gold_answers:
            raise ValidationError(f"example {self.id} has no gold answers")


@dataclass(frozen=True)
class EvalRecord:
    example_id: str
    predicted: str
    precision: float
    recall: float
    f1: float
    q_score: int | None = None
    q_normalized: float | None = None


@dataclass
class RunReport:
    system: str
    document: str
    size_words: int | None
    records: list[EvalRecord] = field(default_factory=list)

    @property
    def question_count(self) -> int:
        return len(self.records)

    @property
    def mean_f1(self) -> float:
        return sum(r.f1 for r in self.records) / len(self.records) if self.records else 0.0

    @property
    def mean_q_normalized(self) -> float | None:
        qs = [r.q_normalized for r in self.records if r.q_normalized is not None]
        return sum(qs) / len(qs) if qs else None

    def row(self) -> dict:
        return {
            "document": self.document,
            "size_words": self.size_words,
            "questions": self.question_count,
            "system": self.system,
            "f1": self.mean_f1,
            "q_normalized_mean": self.mean_q_normalized,
        }


def evaluate_run(
    examples: Sequence[QaExample],
    predictions: Mapping[str, str],
    q_scores: Mapping[str, int] | None = None,
    system: str = "system",
    document: str = "",
    size_words: int | None = None,
) -> RunReport:
    """Score one system's predictions. Missing predictions count as empty answers."""
    known = {ex.id for ex in examples}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise ValidationError(f"predictions for unknown example ids: {', '.join(unknown)}")
    q_scores = q_scores or {}
    unknown_q = sorted(set(q_scores) - known)
    if unknown_q:
        raise ValidationError(f"Q-scores for unknown example ids: {', '.join(unknown_q)}")

    report = RunReport(system=system, document=document, size_words=size_words)
    for ex in examples:
        pred = predictions.get(ex.id, "")
        p, r, f = best_gold_f1(pred, ex.gold_answers)
        q = q_scores.get(ex.id)
        report.records.append(
            EvalRecord(ex.id, pred, p, r, f, q, None if q is None else normalize_q(q))
        )
    return report


def comparison_report(runs: Iterable[RunReport]) -> dict:
    runs = list(runs)
    return {
        "q_aggregate": "mean of normalized Q-scores ((Q - 1) / 2)",
        "rows": [run.row() for run in runs],
        "records": [dict(system=run.system, **asdict(rec)) for run in runs for rec in run.records],
    }


def _pct(value: float | None) -> str:
    return "n/a" if value is None else f"{100 * value:.1f}%"


def render_table(runs: Iterable[RunReport]) -> str:
    """Aligned text table: one row per document, an F1 and a Q column per system."""
    runs = list(runs)
    documents = list(dict.fromkeys(r.document for r in runs))
    systems = list(dict.fromkeys(r.system for r in runs))
    by_key = {(r.document, r.system): r for r in runs}

    header = ["Document", "Size (words)", "Questions"]
    for s in systems:
        header += [f"{s} F1", f"{s} Q"]
    rows = [header]
    for doc in documents:
        first = next(r for r in runs if r.document == doc)
        row = [doc or "-", "-" if first.size_words is None else str(first.size_words),
               str(first.question_count)]
        for s in systems:
            run = by_key.get((doc, s))
            row += ["-", "-"] if run is None else [_pct(run.mean_f1), _pct(run.mean_q_normalized)]
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    lines = [sep]
    for k, row in enumerate(rows):
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if k == 0:
            lines.append(sep)
    lines.append(sep)
    return "\n".join(lines)


def _read_json(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def load_squad(path: str | Path) -> tuple[list[QaExample], int]:
    """Examples from a SQuAD-format file plus the total context size in words."""
    data = _read_json(path)
    examples, size = [], 0
    try:
        for di, article in enumerate(data["data"]):
            title = article.get("title", f"doc{di}")
            for pi, para in enumerate(article["paragraphs"]):
                context = para.get("context", "")
                size += len(context.split())
                for qa in para["qas"]:
                    golds = [a["text"] for a in qa.get("answers", [])]
                    examples.append(
                        QaExample(str(qa["id"]), qa["question"], f"{title}/{pi}", tuple(golds), context)
                    )
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a SQuAD-format dataset ({exc})") from exc
    return examples, size


def load_predictions(path: str | Path) -> dict[str, str]:
    data = _read_json(path)
    if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
        raise InputError(f"{path}: predictions must map example id -> answer string")
    return data


def load_q_scores(path: str | Path) -> dict[str, int]:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: Q-scores must map example id -> 1|2|3")
    for k, v in data.items():
        if isinstance(v, bool) or v not in Q_LABELS:
            raise ValidationError(f"{path}: Q-score for {k!r} must be 1, 2 or 3, got {v!r}")
    return data
