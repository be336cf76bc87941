"""Document ingestion: hierarchy-aware paragraph splitting and sentence segmentation.

A document is cut at section markers (``§ 353.3``, ``(a)``, ``(1)`` by
default), short sections are merged forward, and sections that are too long
are re-cut at sentence boundaries. Everything between paragraph texts
(whitespace, and the markers themselves unless ``keep_headings`` is set) is
kept as a separator so the raw text can always be rebuilt exactly.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, EmptyInputError, InputError

__all__ = [
    "DEFAULT_ABBREVIATIONS",
    "DEFAULT_HIERARCHY_PATTERNS",
    "Document",
    "Paragraph",
    "SplitConfig",
    "count_tokens",
    "ingest",
    "load_input",
    "paragraphs_from_texts",
    "read_store",
    "segment_sentences",
    "sentence_spans",
    "write_store",
]

# Markers only count at a line start or right after clause-final punctuation,
# so inline cross-references ("under paragraph (a) of this section") survive.
_MARKER_ANCHOR = r"(?m)(?:^|(?<=[.;:] ))[ \t]*"

DEFAULT_HIERARCHY_PATTERNS: tuple[str, ...] = (
    _MARKER_ANCHOR + r"(?P<label>§+\s*\d+(?:\.\d+)*[a-z]?)\.?(?=\s|$)",
    _MARKER_ANCHOR + r"(?P<label>\([a-z]\))(?=\s)",
    _MARKER_ANCHOR + r"(?P<label>\(\d{1,3}\))(?=\s)",
)

DEFAULT_ABBREVIATIONS: frozenset[str] = frozenset(
    {
        "u.s.c.", "c.f.r.", "u.s.", "fed.", "reg.", "stat.", "pub.", "l.",
        "no.", "nos.", "sec.", "secs.", "par.", "para.", "art.", "ch.",
        "e.g.", "i.e.", "cf.", "viz.", "vs.", "v.", "et al.", "al.",
        "mr.", "mrs.", "ms.", "dr.", "inc.", "co.", "corp.", "ltd.", "jr.", "sr.",
        "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.",
        "oct.", "nov.", "dec.",
    }
)

_BOUNDARY = re.compile(r"[.!?]+[\"')\]]*(?=\s+(?:[A-Z0-9§]|\([a-z0-9]{1,3}\)\s))")
_ENUMERATOR = re.compile(r"^\(?[A-Za-z0-9]{1,3}\)\.?$")
_SECTION_NUMBER = re.compile(r"^\d+(?:\.\d+)*\.$")


@dataclass(frozen=True)
class SplitConfig:
    hierarchy_patterns: tuple[str, ...] = DEFAULT_HIERARCHY_PATTERNS
    min_tokens: int = 30
    max_tokens: int = 300
    merge_short: bool = True
    keep_headings: bool = False
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS

    def __post_init__(self):
        object.__setattr__(self, "hierarchy_patterns", tuple(self.hierarchy_patterns))
        object.__setattr__(
            self, "abbreviations", frozenset(a.casefold() for a in self.abbreviations)
        )
        if self.min_tokens < 1 or self.max_tokens < 1:
            raise ConfigError("min_tokens and max_tokens must be positive")
        if self.min_tokens >= self.max_tokens:
            raise ConfigError(
                f"min_tokens ({self.min_tokens}) must be < max_tokens ({self.max_tokens})"
            )
        self.compiled()

    def compiled(self) -> list[re.Pattern]:
        out = []
        for pat in self.hierarchy_patterns:
            try:
                out.append(re.compile(pat))
            except re.error as exc:
                raise ConfigError(f"invalid hierarchy pattern {pat!r}: {exc}") from exc
        return out


@dataclass(frozen=True)
class Paragraph:
    id: str
    doc_id: str
    heading_path: tuple[str, ...]
    text: str
    sentences: tuple[str, ...]
    token_count: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "heading_path": list(self.heading_path),
            "text": self.text,
            "sentences": list(self.sentences),
            "token_count": self.token_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Paragraph":
        try:
            return cls(
                id=str(obj["id"]),
                doc_id=str(obj["doc_id"]),
                heading_path=tuple(obj.get("heading_path", ())),
                text=obj["text"],
                sentences=tuple(obj.get("sentences") or segment_sentences(obj["text"])),
                token_count=int(obj.get("token_count", count_tokens(obj["text"]))),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed paragraph record: {exc}") from exc

    def with_text(self, text: str, sentences: Sequence[str] | None = None) -> "Paragraph":
        if sentences is None:
            sentences = segment_sentences(text)
        return replace(
            self, text=text, sentences=tuple(sentences), token_count=count_tokens(text)
        )


@dataclass(frozen=True)
class Document:
    """Immutable split document.

    ``separators`` has one more entry than ``paragraphs``: ``separators[i]``
    precedes paragraph ``i`` and the last entry trails the final paragraph.
    """

    id: str
    title: str
    raw_text: str
    paragraphs: tuple[Paragraph, ...]
    separators: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "paragraphs", tuple(self.paragraphs))
        seps = tuple(self.separators) or ("",) + ("\n\n",) * max(len(self.paragraphs) - 1, 0) + ("",)
        if len(seps) != len(self.paragraphs) + 1:
            raise ValueError("separators must have len(paragraphs) + 1 entries")
        object.__setattr__(self, "separators", seps)

    def render(self) -> str:
        parts = []
        for sep, p in zip(self.separators, self.paragraphs):
            parts.append(sep)
            parts.append(p.text)
        parts.append(self.separators[-1])
        return "".join(parts)

    def with_paragraphs(self, paragraphs: Iterable[Paragraph]) -> "Document":
        paragraphs = tuple(paragraphs)
        doc = replace(self, paragraphs=paragraphs, separators=self.separators)
        return replace(doc, raw_text=doc.render())

    @classmethod
    def from_paragraphs(cls, paragraphs: Sequence[Paragraph], title: str = "") -> "Document":
        """Rebuild a document from a paragraph store (separators become blank lines)."""
        paragraphs = tuple(paragraphs)
        doc_id = paragraphs[0].doc_id if paragraphs else _doc_id(title, "")
        doc = cls(id=doc_id, title=title, raw_text="", paragraphs=paragraphs)
        return replace(doc, raw_text=doc.render())


def count_tokens(text: str) -> int:
    """Number of whitespace-delimited tokens.

    Punctuation that is already detached ("31 , 1985 ,") counts on its own;
    punctuation glued to a word does not.
    """
    return len(text.split())


def sentence_spans(
    text: str, abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS
) -> list[tuple[int, int]]:
    abbrevs = frozenset(a.casefold() for a in abbreviations)
    stripped_start = len(text) - len(text.lstrip())
    stripped_end = len(text.rstrip())
    if stripped_start >= stripped_end:
        return [(0, len(text))]

    spans = []
    start = stripped_start
    for m in _BOUNDARY.finditer(text, stripped_start, stripped_end):
        end = m.end()
        if end <= start:
            continue
        word_start = end
        while word_start > start and not text[word_start - 1].isspace():
            word_start -= 1
        word = text[word_start:end]
        if _suppressed(word, text[start:word_start], abbrevs):
            continue
        spans.append((start, end))
        nxt = end
        while nxt < stripped_end and text[nxt].isspace():
            nxt += 1
        start = nxt
    spans.append((start, stripped_end))
    return spans


def _suppressed(word: str, before: str, abbrevs: frozenset[str]) -> bool:
    if not word.endswith("."):
        return False
    folded = word.casefold().lstrip("(\"'[")
    if folded in abbrevs:
        return True
    # single initials: "J. Smith"
    if len(folded) == 2 and folded[0].isalpha():
        return True
    if _ENUMERATOR.match(word):
        return True
    prev = before.split()
    if _SECTION_NUMBER.match(word) and prev and prev[-1].startswith("§"):
        return True
    return False


def segment_sentences(
    text: str, abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    return [text[s:e] for s, e in sentence_spans(text, abbreviations)]


def _doc_id(title: str, raw: str) -> str:
    digest = hashlib.sha1(f"{title}\x00{raw}".encode("utf-8")).hexdigest()
    return "d" + digest[:12]


@dataclass
class _Unit:
    start: int
    end: int
    path: tuple[str, ...]


def _find_markers(raw: str, patterns: list[re.Pattern]):
    found = []
    for level, pat in enumerate(patterns):
        for m in pat.finditer(raw):
            if m.end() == m.start():
                continue
            label = m.groupdict().get("label") or m.group(0).strip().rstrip(".:;")
            found.append((m.start(), m.end(), level, label.strip()))
    found.sort(key=lambda t: (t[0], t[2]))
    markers, last_end = [], -1
    for mk in found:
        if mk[0] >= last_end:
            markers.append(mk)
            last_end = mk[1]
    return markers


def _trim(raw: str, start: int, end: int) -> tuple[int, int]:
    while start < end and raw[start].isspace():
        start += 1
    while end > start and raw[end - 1].isspace():
        end -= 1
    return start, end


def _sections(raw: str, config: SplitConfig) -> list[_Unit]:
    patterns = config.compiled()
    markers = _find_markers(raw, patterns)
    stack: list[str | None] = [None] * max(len(patterns), 1)
    units = []

    first = markers[0][0] if markers else len(raw)
    s, e = _trim(raw, 0, first)
    if s < e:
        units.append(_Unit(s, e, ()))

    for i, (m_start, m_end, level, label) in enumerate(markers):
        stack[level] = label
        for deeper in range(level + 1, len(stack)):
            stack[deeper] = None
        path = tuple(x for x in stack[: level + 1] if x)
        body_end = markers[i + 1][0] if i + 1 < len(markers) else len(raw)
        body_start = m_start if config.keep_headings else m_end
        s, e = _trim(raw, body_start, body_end)
        if s < e:
            units.append(_Unit(s, e, path))
    return units


def _split_long(raw: str, unit: _Unit, config: SplitConfig) -> list[_Unit]:
    text = raw[unit.start : unit.end]
    if count_tokens(text) <= config.max_tokens:
        return [unit]
    pieces: list[_Unit] = []
    cur_start = cur_end = None
    cur_tokens = 0
    for s, e in sentence_spans(text, config.abbreviations):
        n = count_tokens(text[s:e])
        if cur_start is not None and cur_tokens + n > config.max_tokens:
            pieces.append(_Unit(unit.start + cur_start, unit.start + cur_end, unit.path))
            cur_start, cur_tokens = None, 0
        if cur_start is None:
            cur_start = s
        cur_end = e
        cur_tokens += n
    pieces.append(_Unit(unit.start + cur_start, unit.start + cur_end, unit.path))
    return pieces


def _merge_short(raw: str, units: list[_Unit], config: SplitConfig) -> list[_Unit]:
    def tokens(u: _Unit) -> int:
        return count_tokens(raw[u.start : u.end])

    out: list[_Unit] = []
    for u in units:
        if out and tokens(out[-1]) < config.min_tokens:
            merged = _Unit(out[-1].start, u.end, out[-1].path)
            if tokens(merged) <= config.max_tokens:
                out[-1] = merged
                continue
        out.append(u)
    if len(out) > 1 and tokens(out[-1]) < config.min_tokens:
        merged = _Unit(out[-2].start, out[-1].end, out[-2].path)
        if tokens(merged) <= config.max_tokens:
            out[-2:] = [merged]
    return out


def ingest(raw: str, title: str = "", config: SplitConfig | None = None) -> Document:
    """Split ``raw`` into a :class:`Document` of paragraphs."""
    config = config or SplitConfig()
    if not raw or not raw.strip():
        raise EmptyInputError("document text is empty")

    units: list[_Unit] = []
    for unit in _sections(raw, config):
        units.extend(_split_long(raw, unit, config))
    if config.merge_short:
        units = _merge_short(raw, units, config)

    doc_id = _doc_id(title, raw)
    paragraphs, separators = [], []
    prev_end = 0
    for i, u in enumerate(units):
        text = raw[u.start : u.end]
        separators.append(raw[prev_end : u.start])
        paragraphs.append(
            Paragraph(
                id=f"{doc_id}-p{i:04d}",
                doc_id=doc_id,
                heading_path=u.path,
                text=text,
                sentences=tuple(segment_sentences(text, config.abbreviations)),
                token_count=count_tokens(text),
            )
        )
        prev_end = u.end
    separators.append(raw[prev_end:])
    return Document(
        id=doc_id,
        title=title,
        raw_text=raw,
        paragraphs=tuple(paragraphs),
        separators=tuple(separators),
    )


def paragraphs_from_texts(texts: Iterable[str], doc_id: str = "doc") -> list[Paragraph]:
    """Wrap bare strings as paragraphs with ids ``<doc_id>-p0000`` ... (no splitting)."""
    return [
        Paragraph(
            id=f"{doc_id}-p{i:04d}",
            doc_id=doc_id,
            heading_path=(),
            text=t,
            sentences=tuple(segment_sentences(t)),
            token_count=count_tokens(t),
        )
        for i, t in enumerate(texts)
    ]


def load_input(path: str | Path) -> tuple[str, str]:
    """Return ``(title, text)`` from a plain-text file or a ``{"title", "text"}`` JSON file."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    content = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(content)
            return str(obj.get("title", path.stem)), obj["text"]
        except (json.JSONDecodeError, KeyError, AttributeError) as exc:
            raise InputError(f"{path}: expected {{'title', 'text'}} JSON object") from exc
    return path.stem, content


def write_store(paragraphs: Iterable[Paragraph], path: str | Path) -> None:
    records = [p.to_json() for p in paragraphs]
    Path(path).write_text(json.dumps(records, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_store(path: str | Path) -> list[Paragraph]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"paragraph store not found: {path}")
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise InputError(f"{path}: paragraph store must be a JSON array")
    return [Paragraph.from_json(r) for r in records]
