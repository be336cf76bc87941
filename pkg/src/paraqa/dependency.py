"""Dependency parses behind one interface.

Three providers produce :class:`DependencyGraph` objects that pass the same
validator: a CoNLL-U reader (parses produced offline by any parser), an HTTP
client for a live parser service, and a small rule-based chunker that needs
no model at all.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import requests

from .errors import ParaQAError, ParseError, ProtocolError, TransportError, ValidationError

__all__ = [
    "DEPREL_ALIASES",
    "ConllProvider",
    "DepNode",
    "DependencyGraph",
    "DependencyProvider",
    "HeuristicLexicon",
    "HeuristicProvider",
    "ProviderError",
    "RemoteProvider",
    "align_nodes",
    "graph_from_nodes",
    "heuristic_parse",
    "parse_remote",
    "read_conllu",
    "split_words",
    "write_conllu",
]

DEPREL_ALIASES = {
    "dobj": "obj",
    "nsubjpass": "nsubj:pass",
    "csubjpass": "csubj:pass",
    "auxpass": "aux:pass",
    "nn": "compound",
    "num": "nummod",
    "poss": "nmod:poss",
    "possessive": "case",
    "prep": "case",
    "pobj": "obl",
    "neg": "advmod",
    "partmod": "acl",
    "infmod": "acl",
    "rcmod": "acl:relcl",
}


class ProviderError(ParaQAError):
    """A provider could not produce a parse for one sentence."""


@dataclass(frozen=True)
class DepNode:
    index: int
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str

    @property
    def relation(self) -> str:
        return self.deprel.split(":", 1)[0]


@dataclass(frozen=True)
class DependencyGraph:
    sentence_id: str
    nodes: tuple[DepNode, ...]
    text: str | None = None
    degraded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, index: int) -> DepNode:
        return self.nodes[index - 1]

    @property
    def root(self) -> DepNode:
        return next(n for n in self.nodes if n.head == 0)

    def children(self, index: int) -> list[DepNode]:
        return [n for n in self.nodes if n.head == index]

    def subtree(self, index: int) -> list[int]:
        """Sorted indices of ``index`` and all of its descendants."""
        out, stack = [], [index]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(n.index for n in self.nodes if n.head == i)
        return sorted(out)

    def validate(self) -> "DependencyGraph":
        n = len(self.nodes)
        if n == 0:
            raise ValidationError(f"sentence {self.sentence_id}: no nodes")
        for pos, node in enumerate(self.nodes, start=1):
            if node.index != pos:
                raise ValidationError(
                    f"sentence {self.sentence_id}: node indices must be consecutive from 1 "
                    f"(found {node.index} at position {pos})"
                )
            if not 0 <= node.head <= n:
                raise ValidationError(
                    f"sentence {self.sentence_id}: node {node.index} has head {node.head} out of range"
                )
        roots = [x.index for x in self.nodes if x.head == 0]
        if len(roots) != 1:
            raise ValidationError(
                f"sentence {self.sentence_id}: expected exactly one root, found {len(roots)}"
            )
        for node in self.nodes:
            seen = set()
            cur = node.index
            while cur != 0:
                if cur in seen:
                    raise ValidationError(
                        f"sentence {self.sentence_id}: cyclic head chain through node {cur}"
                    )
                seen.add(cur)
                cur = self.nodes[cur - 1].head
        return self


def _canonical_deprel(label: str) -> str:
    return DEPREL_ALIASES.get(label, label)


def graph_from_nodes(
    records: Iterable[dict], sentence_id: str = "s0", text: str | None = None
) -> DependencyGraph:
    nodes = []
    for rec in records:
        try:
            nodes.append(
                DepNode(
                    index=int(rec["index"]),
                    form=str(rec["form"]),
                    lemma=str(rec.get("lemma") or rec["form"]).casefold(),
                    upos=str(rec.get("upos") or "X"),
                    head=int(rec["head"]),
                    deprel=_canonical_deprel(str(rec["deprel"])),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad node record {rec!r}: {exc}") from exc
    return DependencyGraph(sentence_id, tuple(nodes), text=text).validate()


# ---------------------------------------------------------------------------
# CoNLL-U
# ---------------------------------------------------------------------------

def read_conllu(content: str) -> list[DependencyGraph]:
    """Parse CoNLL-U text. Multiword ranges (``1-2``) and empty nodes (``1.1``) are skipped."""
    graphs: list[DependencyGraph] = []
    nodes: list[DepNode] = []
    meta: dict[str, str] = {}
    block_line = 0

    def flush():
        if not nodes:
            return
        sid = meta.get("sent_id", f"s{len(graphs) + 1}")
        try:
            graphs.append(DependencyGraph(sid, tuple(nodes), text=meta.get("text")).validate())
        except ValidationError as exc:
            raise ValidationError(f"block starting at line {block_line}: {exc}") from exc

    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush()
            nodes, meta = [], {}
            continue
        if line.startswith("#"):
            if not nodes and "=" in line:
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not nodes:
            block_line = lineno
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        ident = cols[0]
        if "-" in ident or "." in ident:
            continue
        try:
            index = int(ident)
            head = int(cols[6])
        except ValueError:
            raise ParseError(f"non-integer ID or HEAD ({ident!r}, {cols[6]!r})", lineno) from None
        nodes.append(
            DepNode(
                index=index,
                form=cols[1],
                lemma=cols[2] if cols[2] != "_" else cols[1].casefold(),
                upos=cols[3],
                head=head,
                deprel=_canonical_deprel(cols[7]),
            )
        )
    flush()
    return graphs


def write_conllu(graphs: Iterable[DependencyGraph]) -> str:
    lines = []
    for g in graphs:
        lines.append(f"# sent_id = {g.sentence_id}")
        if g.text is not None:
            lines.append(f"# text = {g.text}")
        for n in g.nodes:
            lines.append(
                "\t".join(
                    [str(n.index), n.form, n.lemma, n.upos, "_", "_", str(n.head), n.deprel, "_", "_"]
                )
            )
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Remote parser service
# ---------------------------------------------------------------------------

def parse_remote(
    sentence: str,
    endpoint: str,
    *,
    timeout: float = 10.0,
    retries: int = 2,
    backoff: float = 0.25,
    sentence_id: str = "s0",
) -> DependencyGraph:
    """POST ``{"sentence": ...}`` to ``endpoint`` and validate the returned nodes."""
    last_exc: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        try:
            resp = requests.post(endpoint, json={"sentence": sentence}, timeout=timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code >= 500:
            last_exc = TransportError(f"{endpoint} returned HTTP {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"{endpoint} returned HTTP {resp.status_code}")
        if not resp.content.strip():
            raise ProtocolError(f"{endpoint} returned an empty body")
        try:
            payload = resp.json()
            records = payload["nodes"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"{endpoint}: response lacks a 'nodes' array") from exc
        if not isinstance(records, list):
            raise ProtocolError(f"{endpoint}: 'nodes' must be an array")
        return graph_from_nodes(records, sentence_id=sentence_id, text=sentence)
    raise TransportError(f"parser service {endpoint} unreachable: {last_exc}")


# ---------------------------------------------------------------------------
# Heuristic chunker
# ---------------------------------------------------------------------------

_WORD = re.compile(r"\w+(?:[-'.,/]\w+)*|[^\w\s]")
_ADJ_SUFFIXES = ("al", "ous", "ive", "ful", "able", "ible", "ic", "ary", "ing", "less")
_VERB_TRIGGERS = {"PART", "AUX", "CCONJ", "PRON", "PUNCT", "SCONJ"}
_MODALS = frozenset({"shall", "should", "will", "would", "may", "might", "must", "can", "could",
                     "do", "does", "did"})


def split_words(sentence: str) -> list[tuple[str, int, int]]:
    """``(form, start, end)`` for each word or punctuation mark."""
    return [(m.group(0), m.start(), m.end()) for m in _WORD.finditer(sentence)]


def _read_words(name: str) -> frozenset[str]:
    text = resources.files("paraqa.data.lexicon").joinpath(name).read_text(encoding="utf-8")
    return frozenset(
        w.strip().casefold() for w in text.splitlines() if w.strip() and not w.startswith("#")
    )


def _inflect(base: str) -> set[str]:
    forms = {base}
    if base.endswith("e"):
        forms |= {base + "s", base + "d", base[:-1] + "ing"}
    elif base.endswith("y") and len(base) > 2 and base[-2] not in "aeiou":
        forms |= {base[:-1] + "ies", base[:-1] + "ied", base + "ing"}
    elif base.endswith(("s", "sh", "ch", "x", "z")):
        forms |= {base + "es", base + "ed", base + "ing"}
    else:
        forms |= {base + "s", base + "ed", base + "ing"}
    return forms


@dataclass(frozen=True)
class HeuristicLexicon:
    verbs: frozenset[str]
    auxiliaries: frozenset[str]
    determiners: frozenset[str]
    prepositions: frozenset[str]
    conjunctions: frozenset[str]
    pronouns: frozenset[str] = field(default=frozenset())
    adverbs: frozenset[str] = field(default=frozenset())
    subordinators: frozenset[str] = field(default=frozenset())

    @classmethod
    def from_words(cls, verbs: Iterable[str], **kwargs) -> "HeuristicLexicon":
        expanded: set[str] = set()
        for v in verbs:
            expanded |= _inflect(v.casefold())
        return cls(verbs=frozenset(expanded), **{k: frozenset(v) for k, v in kwargs.items()})

    @classmethod
    def from_directory(cls, path: str | Path) -> "HeuristicLexicon":
        """Load the five word lists from ``path`` (same file names as the bundled ones)."""
        path = Path(path)

        def words(name):
            f = path / name
            if not f.is_file():
                return _read_words(name)
            return frozenset(
                w.strip().casefold()
                for w in f.read_text(encoding="utf-8").splitlines()
                if w.strip() and not w.startswith("#")
            )

        return cls.from_words(
            words("verbs.txt"),
            auxiliaries=words("auxiliaries.txt"),
            determiners=words("determiners.txt"),
            prepositions=words("prepositions.txt"),
            conjunctions=words("conjunctions.txt"),
            pronouns=words("pronouns.txt"),
            adverbs=words("adverbs.txt"),
            subordinators=words("subordinators.txt"),
        )


@lru_cache(maxsize=1)
def default_lexicon() -> HeuristicLexicon:
    return HeuristicLexicon.from_words(
        _read_words("verbs.txt"),
        auxiliaries=_read_words("auxiliaries.txt"),
        determiners=_read_words("determiners.txt"),
        prepositions=_read_words("prepositions.txt"),
        conjunctions=_read_words("conjunctions.txt"),
        pronouns=_read_words("pronouns.txt"),
        adverbs=_read_words("adverbs.txt"),
        subordinators=_read_words("subordinators.txt"),
    )


def _tag(tokens: Sequence[str], lex: HeuristicLexicon) -> list[str]:
    tags: list[str] = []
    seen_verb = False
    after_modal = False
    for i, tok in enumerate(tokens):
        low = tok.casefold()
        prev = tags[i - 1] if i else "PUNCT"
        nxt = tokens[i + 1].casefold() if i + 1 < len(tokens) else ""
        if not any(ch.isalnum() for ch in tok):
            tag = "PUNCT"
        elif low == "to" and nxt in lex.verbs:
            tag = "PART"
        elif low in lex.adverbs:
            tags.append("ADV")
            continue
        elif low in lex.subordinators:
            tag = "SCONJ"
        elif after_modal and tok.isalpha() and low not in lex.determiners | lex.pronouns \
                | lex.prepositions | lex.auxiliaries:
            # the word a modal governs is its lexical verb even when the lexicon lacks it
            tag = "VERB"
        elif low in lex.determiners:
            tag = "DET"
        elif low in lex.conjunctions:
            tag = "CCONJ"
        elif low in lex.prepositions:
            tag = "ADP"
        elif low in lex.pronouns:
            tag = "PRON"
        elif low in lex.auxiliaries:
            tag = "AUX"
        elif low in lex.verbs and (
            (not seen_verb and prev != "DET") or (seen_verb and prev in _VERB_TRIGGERS)
        ):
            tag = "VERB"
        elif any(ch.isdigit() for ch in tok) and not any(ch.isalpha() for ch in tok):
            tag = "NUM"
        elif low.endswith(_ADJ_SUFFIXES) and nxt and nxt.isalpha() and nxt not in lex.verbs:
            tag = "ADJ"
        else:
            tag = "NOUN"
        if tag == "VERB":
            seen_verb = True
        after_modal = tag == "AUX" and low in _MODALS
        tags.append(tag)
    # a copula with no lexical verb after it heads the clause
    return tags


_NOMINAL = {"DET", "NOUN", "NUM", "ADJ", "CCONJ"}


def _runs(tags: list[str]) -> list[tuple[int, int]]:
    """Maximal nominal runs as ``[start, end)`` index pairs; no leading/trailing conjunction."""
    runs, i, n = [], 0, len(tags)
    while i < n:
        if tags[i] in _NOMINAL:
            j = i
            while j < n and tags[j] in _NOMINAL:
                j += 1
            s, e = i, j
            while s < e and tags[s] == "CCONJ":
                s += 1
            while e > s and tags[e - 1] == "CCONJ":
                e -= 1
            if s < e:
                runs.append((s, e))
            i = j
        else:
            i += 1
    return runs


def _attach_run(heads, rels, tags, s, e):
    """Wire up a nominal run internally; returns the 0-based head position."""
    conjuncts, cur = [], [s]
    for i in range(s, e):
        if tags[i] == "CCONJ":
            conjuncts.append((cur[0], i))
            cur = [i + 1]
    conjuncts.append((cur[0], e))
    conj_heads = []
    for cs, ce in conjuncts:
        h = ce - 1
        conj_heads.append(h)
        for i in range(cs, ce - 1):
            heads[i] = h
            rels[i] = {"DET": "det", "NUM": "nummod", "ADJ": "amod"}.get(tags[i], "compound")
    run_head = conj_heads[-1]
    for h in conj_heads[:-1]:
        heads[h] = run_head
        rels[h] = "conj"
    for k, (cs, _) in enumerate(conjuncts[1:], start=1):
        heads[cs - 1] = conj_heads[k]
        rels[cs - 1] = "cc"
    return run_head


def heuristic_parse(
    tokens: Sequence[str],
    lexicon: HeuristicLexicon | None = None,
    sentence_id: str = "s0",
    text: str | None = None,
) -> DependencyGraph:
    """Shallow verb-anchored parse over pre-split tokens.

    The first lexicon verb is the root; the nominal run right before it is
    its subject and the first run after each verb is that verb's object.
    """
    if not tokens:
        raise ValueError("heuristic_parse needs at least one token")
    lex = lexicon or default_lexicon()
    n = len(tokens)
    tags = _tag(tokens, lex)

    verbs = [i for i, t in enumerate(tags) if t == "VERB"]
    if not verbs:
        auxes = [i for i, t in enumerate(tags) if t == "AUX"]
        if auxes:
            tags[auxes[0]] = "VERB"
            verbs = [auxes[0]]
    if not verbs:
        nodes = tuple(
            DepNode(i + 1, tok, tok.casefold(), tags[i], 0 if i == n - 1 else n,
                    "root" if i == n - 1 else "compound")
            for i, tok in enumerate(tokens)
        )
        return DependencyGraph(sentence_id, nodes, text=text, degraded=True).validate()

    root = verbs[0]
    heads: list[int | None] = [None] * n
    rels: list[str] = ["dep"] * n
    heads[root], rels[root] = -1, "root"

    for v in verbs[1:]:
        prev_verb = max(u for u in verbs if u < v)
        heads[v] = prev_verb
        rels[v] = "xcomp" if v > 0 and tags[v - 1] == "PART" else "dep"

    def governing_verb(i):
        before = [v for v in verbs if v < i]
        return before[-1] if before else root

    runs = _runs(tags)
    run_of = {}
    pre_root_subject = None
    for s, e in runs:
        h = _attach_run(heads, rels, tags, s, e)
        run_of[s] = (s, e, h)
        if e <= root and not (s > 0 and tags[s - 1] == "ADP"):
            pre_root_subject = (s, e, h)

    prev_run_head = None
    object_taken: set[int] = set()
    for s, e in runs:
        h = run_of[s][2]
        is_pp = s > 0 and tags[s - 1] == "ADP"
        if is_pp:
            heads[s - 1], rels[s - 1] = h, "case"
        if e <= root:
            if pre_root_subject is not None and s == pre_root_subject[0]:
                heads[h], rels[h] = root, "nsubj"
            elif is_pp and prev_run_head is not None and s - 2 >= 0 and heads[s - 2] is not None \
                    and tags[s - 2] in _NOMINAL:
                heads[h], rels[h] = prev_run_head, "nmod"
            else:
                heads[h], rels[h] = root, "obl" if is_pp else "dep"
        else:
            v = governing_verb(s)
            if is_pp:
                heads[h], rels[h] = v, "obl"
            elif v not in object_taken:
                heads[h], rels[h] = v, "obj"
                object_taken.add(v)
            else:
                heads[h], rels[h] = v, "obl"
        prev_run_head = h

    for i in range(n):
        if heads[i] is not None:
            continue
        tag = tags[i]
        if tag == "AUX":
            after = [v for v in verbs if v > i]
            heads[i], rels[i] = (after[0] if after else governing_verb(i)), "aux"
        elif tag == "PART":
            after = [v for v in verbs if v > i]
            heads[i], rels[i] = (after[0] if after else root), "mark"
        elif tag == "PUNCT":
            heads[i], rels[i] = root, "punct"
        elif tag == "ADV":
            after = [v for v in verbs if v > i]
            heads[i], rels[i] = (after[0] if after else governing_verb(i)), "advmod"
        elif tag == "SCONJ":
            after = [v for v in verbs if v > i]
            heads[i], rels[i] = (after[0] if after else root), "mark"
        elif tag == "CCONJ":
            after = [v for v in verbs if v > i]
            heads[i], rels[i] = (after[0] if after else root), "cc"
        else:
            heads[i], rels[i] = root, "dep"

    nodes = tuple(
        DepNode(
            index=i + 1,
            form=tok,
            lemma=tok.casefold(),
            upos=tags[i],
            head=0 if heads[i] == -1 else heads[i] + 1,
            deprel=rels[i],
        )
        for i, tok in enumerate(tokens)
    )
    return DependencyGraph(sentence_id, nodes, text=text).validate()


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

class DependencyProvider(Protocol):
    def parse(self, sentence: str, sentence_id: str = "s0") -> DependencyGraph: ...


class HeuristicProvider:
    def __init__(self, lexicon: HeuristicLexicon | None = None):
        self.lexicon = lexicon or default_lexicon()

    def parse(self, sentence: str, sentence_id: str = "s0") -> DependencyGraph:
        words = [w for w, _, _ in split_words(sentence)]
        if not words:
            raise ProviderError(f"sentence {sentence_id} has no tokens")
        return heuristic_parse(words, self.lexicon, sentence_id=sentence_id, text=sentence)


def _squash(text: str) -> str:
    return "".join(text.split()).casefold()


class ConllProvider:
    """Serves pre-computed parses, matched to sentences by their text."""

    def __init__(self, graphs: Iterable[DependencyGraph]):
        self._by_text: dict[str, DependencyGraph] = {}
        for g in graphs:
            key = _squash(g.text if g.text is not None else "".join(n.form for n in g.nodes))
            self._by_text.setdefault(key, g)

    @classmethod
    def from_file(cls, path: str | Path) -> "ConllProvider":
        return cls(read_conllu(Path(path).read_text(encoding="utf-8")))

    def parse(self, sentence: str, sentence_id: str = "s0") -> DependencyGraph:
        g = self._by_text.get(_squash(sentence))
        if g is None:
            raise ProviderError(f"no CoNLL-U parse for sentence {sentence_id}")
        return g


class RemoteProvider:
    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def parse(self, sentence: str, sentence_id: str = "s0") -> DependencyGraph:
        return parse_remote(
            sentence, self.endpoint, timeout=self.timeout, retries=self.retries,
            sentence_id=sentence_id,
        )


def align_nodes(graph: DependencyGraph, sentence: str) -> list[tuple[int, int]] | None:
    """Character span of every node's form inside ``sentence``, or None if they don't line up."""
    spans, pos = [], 0
    for node in graph.nodes:
        at = sentence.find(node.form, pos)
        if at < 0 or sentence[pos:at].strip():
            return None
        spans.append((at, at + len(node.form)))
        pos = at + len(node.form)
    return spans
