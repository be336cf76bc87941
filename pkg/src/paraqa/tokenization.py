"""Phrase tokenization: defined terms and dependency groups become short symbols.

Both tokenizers go through a :class:`TokenRegistry`, which hands out one
symbol per canonical phrase (case-folded, whitespace-collapsed) for the whole
document. Definition subjects get ``X1X<n>`` and dependency groups ``Y1Y<n>``.
Discovery (parse + register) always finishes before any text is rewritten,
so a frozen registry can be shared by parallel workers.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Document, Paragraph, sentence_spans
from .dependency import DependencyGraph, DependencyProvider, align_nodes
from .errors import InputError, ParaQAError, TransportError

__all__ = [
    "DEFAULT_DEFINITION_KEYWORDS",
    "DefinitionSentence",
    "TokenClass",
    "TokenEntry",
    "TokenRegistry",
    "TokenWarning",
    "apply_definition_tokenization",
    "apply_dependency_tokenization",
    "canonicalize",
    "detokenize",
    "find_definitions",
    "read_lexicon",
    "register_phrase",
    "tokenize_question",
    "write_warnings",
]

DEFAULT_DEFINITION_KEYWORDS = frozenset({"mean", "means", "defined", "define", "defines"})

_MINTED = re.compile(r"(X1X|Y1Y)(\d+)")
_MINTED_FOLDED = re.compile(r"\b(?:x1x|y1y)\d+\b")
_WORD = re.compile(r"[^\W_]+")
_SUBJECT_RELS = {"nsubj", "csubj"}
_OBJECT_RELS = {"obj", "iobj"}
_CLAUSAL_HEAD_RELS = {"root", "conj"}
_CLAUSE_UPOS = {"VERB", "AUX", "SCONJ"}


class TokenClass(str, enum.Enum):
    DEFINITION = "definition"
    DEPENDENCY = "dependency"

    @property
    def prefix(self) -> str:
        return "X1X" if self is TokenClass.DEFINITION else "Y1Y"


def canonicalize(phrase: str) -> str:
    """Case-folded, whitespace-collapsed form; embedded token symbols keep their case."""
    folded = " ".join(phrase.casefold().split())
    return _MINTED_FOLDED.sub(lambda m: m.group(0).upper(), folded)


@dataclass
class TokenEntry:
    token: str
    phrase: str
    surface_forms: set[str]
    token_class: TokenClass
    source: str

    def to_json(self) -> dict:
        return {
            "token": self.token,
            "phrase": self.phrase,
            "surface_forms": sorted(self.surface_forms),
            "class": self.token_class.value,
            "source": self.source,
        }


def _phrase_pattern(phrases: Iterable[str]) -> re.Pattern | None:
    # longest first so "financial institution letter" beats "financial institution"
    ordered = sorted({canonicalize(p) for p in phrases}, key=lambda p: (-len(p.split()), -len(p), p))
    if not ordered:
        return None
    alts = (r"\s+".join(re.escape(w) for w in p.split()) for p in ordered)
    return re.compile(r"(?<!\w)(?:" + "|".join(alts) + r")(?!\w)", re.IGNORECASE)


class TokenRegistry:
    """Bidirectional canonical-phrase <-> token store."""

    def __init__(self):
        self.entries: dict[str, TokenEntry] = {}
        self.reverse: dict[str, str] = {}
        self.next_id: dict[TokenClass, int] = {c: 1 for c in TokenClass}
        self.frozen = False
        self._pattern_cache: dict[frozenset[str] | None, re.Pattern | None] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, phrase: str) -> bool:
        return canonicalize(phrase) in self.entries

    def token_for(self, phrase: str) -> str | None:
        entry = self.entries.get(canonicalize(phrase))
        return entry.token if entry else None

    def phrase_for(self, token: str) -> str | None:
        return self.reverse.get(token)

    def is_token(self, word: str) -> bool:
        return word in self.reverse or _MINTED.fullmatch(word) is not None

    def freeze(self) -> "TokenRegistry":
        self.frozen = True
        return self

    def _check_writable(self):
        if self.frozen:
            raise RuntimeError("token registry is frozen")

    def _mint(self, token_class: TokenClass) -> str:
        while True:
            n = self.next_id[token_class]
            self.next_id[token_class] = n + 1
            symbol = f"{token_class.prefix}{n}"
            if symbol not in self.reverse:
                return symbol

    def register(
        self,
        phrase: str,
        token_class: TokenClass = TokenClass.DEFINITION,
        source: str | None = None,
    ) -> str:
        canon = canonicalize(phrase)
        if not canon:
            raise ValueError("cannot register an empty phrase")
        entry = self.entries.get(canon)
        if entry is not None:
            surface = " ".join(phrase.split())
            if not self.frozen and surface not in entry.surface_forms:
                entry.surface_forms.add(surface)
            return entry.token
        self._check_writable()
        token_class = TokenClass(token_class)
        if source is None:
            source = "keyword-definition" if token_class is TokenClass.DEFINITION else "dependency-group"
        token = self._mint(token_class)
        self.entries[canon] = TokenEntry(token, canon, {" ".join(phrase.split())}, token_class, source)
        self.reverse[token] = canon
        self._pattern_cache.clear()
        return token

    def seed(
        self,
        token: str,
        phrase: str,
        token_class: TokenClass = TokenClass.DEPENDENCY,
        source: str = "seed",
    ) -> str:
        """Insert a fixed phrase -> token mapping (e.g. replaying a known substitution table)."""
        self._check_writable()
        canon = canonicalize(phrase)
        if not canon or not token or any(ch.isspace() for ch in token):
            raise ValueError(f"bad seed mapping {phrase!r} -> {token!r}")
        if canon in self.entries and self.entries[canon].token != token:
            raise ValueError(f"{phrase!r} already maps to {self.entries[canon].token}")
        if token in self.reverse and self.reverse[token] != canon:
            raise ValueError(f"{token} already maps to {self.reverse[token]!r}")
        self.entries[canon] = TokenEntry(token, canon, {" ".join(phrase.split())}, TokenClass(token_class), source)
        self.reverse[token] = canon
        self._pattern_cache.clear()
        return token

    def _pattern(self, phrases: frozenset[str] | None) -> re.Pattern | None:
        if phrases not in self._pattern_cache:
            pool = self.entries.keys() if phrases is None else [p for p in phrases if p in self.entries]
            self._pattern_cache[phrases] = _phrase_pattern(pool)
        return self._pattern_cache[phrases]

    def replace_phrases(
        self, text: str, phrases: Iterable[str] | None = None
    ) -> tuple[str, list[tuple[str, str]]]:
        """Swap registered phrases in ``text`` for their tokens, longest match first.

        Returns the new text and ``(surface, token)`` pairs in order of occurrence.
        """
        key = None if phrases is None else frozenset(canonicalize(p) for p in phrases)
        pattern = self._pattern(key)
        if pattern is None:
            return text, []
        done: list[tuple[str, str]] = []

        def swap(m: re.Match) -> str:
            token = self.entries[canonicalize(m.group(0))].token
            done.append((m.group(0), token))
            return token

        return pattern.sub(swap, text), done

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.entries.values()]

    @classmethod
    def from_json(cls, records: Iterable[dict]) -> "TokenRegistry":
        reg = cls()
        for rec in records:
            try:
                token, phrase = rec["token"], rec["phrase"]
                token_class = TokenClass(rec["class"])
            except (KeyError, ValueError) as exc:
                raise InputError(f"malformed registry record {rec!r}") from exc
            reg.seed(token, phrase, token_class, rec.get("source", "seed"))
            if rec.get("surface_forms"):
                reg.entries[canonicalize(phrase)].surface_forms = set(rec["surface_forms"])
            m = _MINTED.fullmatch(token)
            if m and m.group(1) == token_class.prefix:
                reg.next_id[token_class] = max(reg.next_id[token_class], int(m.group(2)) + 1)
        return reg

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TokenRegistry":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"registry file not found: {path}")
        try:
            return cls.from_json(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from exc


def register_phrase(registry: TokenRegistry, phrase: str, token_class: TokenClass) -> str:
    return registry.register(phrase, token_class)


@dataclass(frozen=True)
class DefinitionSentence:
    paragraph_id: str
    sentence_index: int
    trigger_keyword: str
    subject_span: tuple[int, int]
    subject_phrase: str


@dataclass(frozen=True)
class TokenWarning:
    paragraph_id: str
    sentence_index: int
    reason: str

    def to_json(self) -> dict:
        return {"paragraph_id": self.paragraph_id, "sentence_index": self.sentence_index, "reason": self.reason}


def write_warnings(warnings: Iterable[TokenWarning], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in warnings:
            fh.write(json.dumps(w.to_json()) + "\n")


def read_lexicon(path: str | Path) -> list[str]:
    """Newline-delimited phrase list; blank lines and ``#`` comments are ignored."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"lexicon file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


def _span_text(graph: DependencyGraph, sentence: str, indices: Sequence[int], spans) -> str:
    lo, hi = min(indices), max(indices)
    if spans is not None:
        return sentence[spans[lo - 1][0] : spans[hi - 1][1]]
    return " ".join(graph.node(i).form for i in range(lo, hi + 1))


def _all_tokens(phrase: str, registry: TokenRegistry) -> bool:
    words = _WORD.findall(phrase)
    return bool(words) and all(registry.is_token(w) for w in words)


def _sentences(paragraph: Paragraph) -> list[tuple[int, int]]:
    """Character spans of the paragraph's stored sentences within its text."""
    spans, pos = [], 0
    for sent in paragraph.sentences:
        at = paragraph.text.find(sent, pos)
        if at < 0:
            return sentence_spans(paragraph.text)
        spans.append((at, at + len(sent)))
        pos = at + len(sent)
    return spans or [(0, len(paragraph.text))]


def _rewrite(paragraph: Paragraph, new_sentences: list[str]) -> Paragraph:
    spans = _sentences(paragraph)
    parts, prev = [], 0
    for (s, e), new in zip(spans, new_sentences):
        parts.append(paragraph.text[prev:s])
        parts.append(new)
        prev = e
    parts.append(paragraph.text[prev:])
    return paragraph.with_text("".join(parts), new_sentences)


def _sentence_texts(paragraph: Paragraph) -> list[str]:
    return [paragraph.text[s:e] for s, e in _sentences(paragraph)]


_LEAD_ENUMERATOR = re.compile(r"^(?:\([A-Za-z0-9]{1,3}\)\s+)+")


def _clause_start(sentence: str) -> int:
    """Offset past leading list enumerators like ``(a)``, which the parser should not see."""
    m = _LEAD_ENUMERATOR.match(sentence)
    return m.end() if m else 0


def find_definitions(
    doc: Document,
    keywords: Iterable[str] = DEFAULT_DEFINITION_KEYWORDS,
    dep: DependencyProvider | None = None,
    warnings: list[TokenWarning] | None = None,
) -> list[DefinitionSentence]:
    """Sentences whose governing verb is a definition keyword, with their subject phrase."""
    from .dependency import HeuristicProvider

    keywords = {k.casefold() for k in keywords}
    if not keywords:
        raise ValueError("definition keyword set is empty")
    dep = dep or HeuristicProvider()
    found: list[DefinitionSentence] = []
    for para in doc.paragraphs:
        for si, sentence in enumerate(_sentence_texts(para)):
            if not any(k in sentence.casefold() for k in keywords):
                continue
            sentence = sentence[_clause_start(sentence):]
            try:
                graph = dep.parse(sentence, f"{para.id}:{si}")
            except TransportError:
                raise
            except ParaQAError as exc:
                if warnings is not None:
                    warnings.append(TokenWarning(para.id, si, f"parse failed: {exc}"))
                continue
            spans = align_nodes(graph, sentence)
            for node in graph.nodes:
                if node.form.casefold() not in keywords and node.lemma not in keywords:
                    continue
                if node.relation not in _CLAUSAL_HEAD_RELS:
                    continue
                if node.relation == "conj" and graph.node(node.head).relation != "root":
                    continue
                subjects = [c for c in graph.children(node.index) if c.relation in _SUBJECT_RELS]
                if not subjects:
                    continue
                indices = graph.subtree(subjects[0].index)
                phrase = _span_text(graph, sentence, indices, spans)
                if _all_tokens(phrase, _NO_REGISTRY):
                    continue
                found.append(
                    DefinitionSentence(
                        paragraph_id=para.id,
                        sentence_index=si,
                        trigger_keyword=node.form,
                        subject_span=(min(indices) - 1, max(indices)),
                        subject_phrase=phrase,
                    )
                )
                break
    return found


_NO_REGISTRY = TokenRegistry()


def apply_definition_tokenization(
    doc: Document,
    registry: TokenRegistry,
    defs: Sequence[DefinitionSentence],
    lexicon: Iterable[str] = (),
) -> Document:
    """Register definition subjects (then lexicon phrases found in ``doc``) and replace them everywhere."""
    phrases: list[str] = []
    for d in defs:
        registry.register(d.subject_phrase, TokenClass.DEFINITION, "keyword-definition")
        phrases.append(d.subject_phrase)

    lex_pattern = _phrase_pattern(p for p in lexicon if canonicalize(p))
    if lex_pattern is not None:
        hits: list[tuple[int, int, str]] = []
        for pi, para in enumerate(doc.paragraphs):
            for m in lex_pattern.finditer(para.text):
                hits.append((pi, m.start(), m.group(0)))
        seen = set()
        for _, _, surface in sorted(hits):
            canon = canonicalize(surface)
            if canon in seen:
                continue
            seen.add(canon)
            registry.register(surface, TokenClass.DEFINITION, "lexicon")
            phrases.append(surface)

    if not phrases:
        return doc
    new_paragraphs = []
    for para in doc.paragraphs:
        original = _sentence_texts(para)
        sentences = [registry.replace_phrases(s, phrases)[0] for s in original]
        new_paragraphs.append(_rewrite(para, sentences) if sentences != original else para)
    return doc.with_paragraphs(new_paragraphs)


def _verb_chain(graph: DependencyGraph) -> list[int]:
    chain, stack = [], [graph.root.index]
    while stack:
        v = stack.pop()
        chain.append(v)
        stack.extend(c.index for c in graph.children(v) if c.relation == "xcomp")
    return chain


def _groups(graph: DependencyGraph) -> list[list[int]]:
    root = graph.root.index
    groups = []
    for v in _verb_chain(graph):
        for child in graph.children(v):
            if (v == root and child.relation in _SUBJECT_RELS) or child.relation in _OBJECT_RELS:
                groups.append(graph.subtree(child.index))
    return groups


def apply_dependency_tokenization(
    doc: Document,
    registry: TokenRegistry,
    dep: DependencyProvider | None = None,
    warnings: list[TokenWarning] | None = None,
) -> Document:
    """Collapse the root verb's subject group and each object group into one token.

    Sentences the provider cannot parse are left as they are and reported in
    ``warnings``.
    """
    from .dependency import HeuristicProvider

    dep = dep or HeuristicProvider()
    plans: list[list[list[tuple[int, int, str]]]] = []
    # phase 1: parse and register
    for para in doc.paragraphs:
        para_plan = []
        for si, sentence in enumerate(_sentence_texts(para)):
            edits: list[tuple[int, int, str]] = []
            lead = _clause_start(sentence)
            clause = sentence[lead:]
            try:
                graph = dep.parse(clause, f"{para.id}:{si}")
            except TransportError:
                raise
            except ParaQAError as exc:
                if warnings is not None:
                    warnings.append(TokenWarning(para.id, si, f"parse failed: {exc}"))
                para_plan.append(edits)
                continue
            spans = align_nodes(graph, clause)
            if spans is None:
                if warnings is not None:
                    warnings.append(TokenWarning(para.id, si, "parse does not align with sentence text"))
                para_plan.append(edits)
                continue
            spans = [(a + lead, b + lead) for a, b in spans]
            verbs = set(_verb_chain(graph))
            for indices in _groups(graph):
                lo, hi = min(indices), max(indices)
                # groups that swallow a clause are too coarse to be useful tokens
                if any(v in range(lo, hi + 1) for v in verbs) or any(
                    graph.node(i).upos in _CLAUSE_UPOS for i in range(lo, hi + 1)
                ):
                    continue
                start, end = spans[lo - 1][0], spans[hi - 1][1]
                surface = sentence[start:end]
                if _all_tokens(surface, registry):
                    continue
                if any(s < end and start < e for s, e, _ in edits):
                    continue
                token = registry.register(surface, TokenClass.DEPENDENCY, "dependency-group")
                edits.append((start, end, token))
            para_plan.append(edits)
        plans.append(para_plan)

    # phase 2: rewrite
    new_paragraphs = []
    for para, para_plan in zip(doc.paragraphs, plans):
        if not any(para_plan):
            new_paragraphs.append(para)
            continue
        sentences = []
        for sentence, edits in zip(_sentence_texts(para), para_plan):
            for start, end, token in sorted(edits, reverse=True):
                sentence = sentence[:start] + token + sentence[end:]
            sentences.append(sentence)
        new_paragraphs.append(_rewrite(para, sentences))
    return doc.with_paragraphs(new_paragraphs)


def tokenize_question(question: str, registry: TokenRegistry) -> str:
    """Apply every registered phrase to a question (no dependency grouping)."""
    return registry.replace_phrases(question)[0]


def detokenize(text: str, registry: TokenRegistry) -> str:
    """Replace standalone token symbols with their canonical phrases; unknown symbols stay."""

    def swap(m: re.Match) -> str:
        return registry.reverse.get(m.group(0), m.group(0))

    for _ in range(len(registry) + 1):
        new = _WORD.sub(swap, text)
        if new == text:
            break
        text = new
    return text
