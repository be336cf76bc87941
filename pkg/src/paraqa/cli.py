"""``paraqa`` command line: each pipeline stage as a subcommand sharing one config file.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 transport
error, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import bisect
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .chunking import Chunk, effective_window, sliding_window
from .config import PipelineConfig, load_config
from .corpus import Document, Paragraph, ingest, load_input, read_store, write_store
from .dependency import ConllProvider, HeuristicProvider, RemoteProvider
from .errors import ConfigError, InputError, InvariantViolation, ParaQAError, TransportError
from .evaluation import (
    comparison_report,
    evaluate_run,
    load_predictions,
    load_q_scores,
    load_squad,
    render_table,
)
from .phonetics import soundex
from .qa_client import Answer, answer_question
from .retrieval import build_tfidf, load_index, rank, save_index, train_pv
from .retrieval.tfidf import load_stopwords
from .tokenization import (
    TokenRegistry,
    TokenWarning,
    apply_definition_tokenization,
    apply_dependency_tokenization,
    find_definitions,
    read_lexicon,
    tokenize_question,
    write_warnings,
)

__all__ = ["build_context", "main", "make_provider", "run_ask"]


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


def _warn(stage: str, msg: str) -> None:
    print(f"paraqa {stage}: warning: {msg}", file=sys.stderr)


def _path(arg, cfg: PipelineConfig, key: str) -> Path:
    return Path(arg) if arg is not None else cfg.paths[key]


def make_provider(cfg: PipelineConfig):
    kind, _, target = cfg.dependency_provider.partition(":")
    if kind == "conllu":
        return ConllProvider.from_file(target)
    if kind == "remote":
        return RemoteProvider(target)
    return HeuristicProvider()


def _stopwords(cfg: PipelineConfig):
    return load_stopwords(cfg.stopwords_path) if cfg.stopwords_path else None


# ---------------------------------------------------------------------------
# ingest / tokenize / index / rank
# ---------------------------------------------------------------------------

def cmd_ingest(args, cfg: PipelineConfig) -> int:
    title, text = load_input(args.input)
    doc = ingest(text, title=title, config=cfg.split)
    out = _path(args.out, cfg, "store")
    write_store(doc.paragraphs, out)
    print(f"{len(doc.paragraphs)} paragraphs -> {out}")
    return 0


def cmd_tokenize(args, cfg: PipelineConfig) -> int:
    paragraphs = read_store(_path(args.store, cfg, "store"))
    if not paragraphs:
        raise InputError("paragraph store is empty")
    doc = Document.from_paragraphs(paragraphs)
    registry = TokenRegistry.load(args.registry_in) if args.registry_in else TokenRegistry()
    known = len(registry)
    warnings: list[TokenWarning] = []
    definitions = cfg.definitions_enabled and not args.no_definitions
    dependency = cfg.dependency_enabled and not args.no_dependency
    provider = make_provider(cfg) if (definitions or dependency) else None

    if definitions:
        lexicon_path = args.lexicon or cfg.lexicon_path
        lexicon = read_lexicon(lexicon_path) if lexicon_path else []
        defs = find_definitions(doc, cfg.definition_keywords, provider, warnings)
        doc = apply_definition_tokenization(doc, registry, defs, lexicon)
    if dependency:
        doc = apply_dependency_tokenization(doc, registry, provider, warnings)

    out = _path(args.out, cfg, "tokenized_store")
    write_store(doc.paragraphs, out)
    registry.save(_path(args.registry, cfg, "registry"))
    write_warnings(warnings, _path(args.warnings, cfg, "warnings"))

    before = sum(p.token_count for p in paragraphs)
    after = sum(p.token_count for p in doc.paragraphs)
    changed = sum(a.text != b.text for a, b in zip(paragraphs, doc.paragraphs))
    _emit({
        "paragraphs": len(paragraphs),
        "changed_paragraphs": changed,
        "tokens_before": before,
        "tokens_after": after,
        "reduction": before - after,
        "new_tokens": len(registry) - known,
        "warnings": len(warnings),
    })
    return 0


def cmd_index(args, cfg: PipelineConfig) -> int:
    paragraphs = read_store(_path(args.store, cfg, "tokenized_store"))
    use_soundex = cfg.soundex_enabled if args.soundex is None else args.soundex
    length = args.soundex_length or cfg.soundex_length
    hp = cfg.pv if args.seed is None else replace(cfg.pv, seed=args.seed)
    stop = _stopwords(cfg)
    index = build_tfidf(paragraphs, soundex=length if use_soundex else None, stopwords=stop)
    model = train_pv(paragraphs, hp, stopwords=stop)
    out = _path(args.out, cfg, "index")
    save_index(out, index, model)
    print(f"indexed {index.n_paragraphs} paragraphs ({len(index.vocabulary)} terms, "
          f"pv dim {model.dim}) -> {out}")
    return 0


def _load_registry(path, cfg: PipelineConfig) -> TokenRegistry | None:
    p = _path(path, cfg, "registry")
    return TokenRegistry.load(p) if p.is_file() else None


def cmd_rank(args, cfg: PipelineConfig) -> int:
    index, model = load_index(_path(args.index, cfg, "index"))
    registry = _load_registry(args.registry, cfg)
    top_k = args.top_k or cfg.top_k
    weight = cfg.weight if args.weight is None else args.weight
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"--weight must be in [0, 1], got {weight}")
    ranking = rank(args.question, index, model, weight=weight, top_k=top_k, registry=registry)
    if ranking.truncated:
        _warn("rank", f"top_k={top_k} exceeds corpus size {index.n_paragraphs}; returning all paragraphs")
    if ranking.no_match:
        _warn("rank", "no query term matches the index")
    _emit([r.to_json() for r in ranking])
    return 0


# ---------------------------------------------------------------------------
# ask
# ---------------------------------------------------------------------------

def build_context(paragraphs: Sequence[Paragraph]) -> tuple[str, list[int], list[str]]:
    """Join paragraphs with ``[para:ID]`` markers; also return marker offsets and ids."""
    parts, starts, ids, pos = [], [], [], 0
    for p in paragraphs:
        piece = f"[para:{p.id}] {p.text}"
        starts.append(pos)
        ids.append(p.id)
        parts.append(piece)
        pos += len(piece) + 2
    return "\n\n".join(parts), starts, ids


def _locator(chunk_sources: dict[str, tuple[list[int], list[str]]]):
    def locate(chunk: Chunk, answer: str) -> str | None:
        starts, ids = chunk_sources[chunk.context_id]
        at = chunk.text.find(answer) if answer else -1
        offset = chunk.char_span[0] + max(at, 0)
        # a marker may sit inside the chunk ahead of the answer
        i = bisect.bisect_right(starts, offset) - 1
        return ids[max(i, 0)]

    return locate


def run_ask(
    question: str,
    paragraphs: dict[str, Paragraph],
    index,
    model,
    registry: TokenRegistry | None,
    cfg: PipelineConfig,
    backend,
    per_paragraph: bool = False,
) -> dict:
    """Rank, chunk and query ``backend`` for one question; returns the printed JSON record."""
    q_tok = tokenize_question(question, registry) if registry is not None else question
    ranking = rank(q_tok, index, model, weight=cfg.weight, top_k=cfg.top_k)
    if ranking.no_match:
        return {"question": question, "answer": "", "probability": 0.0, "paragraph_id": None,
                "score": None, "status": "no_match"}
    missing = [r.paragraph_id for r in ranking if r.paragraph_id not in paragraphs]
    if missing:
        raise InvariantViolation(f"index references paragraphs absent from the store: {missing}")

    window = effective_window(cfg.window_size, cfg.margin)
    stride = min(cfg.stride, window)
    top = [paragraphs[r.paragraph_id] for r in ranking]
    groups = [[p] for p in top] if per_paragraph else [top]
    chunks, sources = [], {}
    for g in groups:
        cid = g[0].id if per_paragraph else "top-k"
        context, starts, ids = build_context(g)
        sources[cid] = (starts, ids)
        chunks.extend(sliding_window(context, window, stride, context_id=cid))

    answer: Answer = answer_question(
        q_tok, chunks, backend, max_in_flight=cfg.max_in_flight, timeout=cfg.qa_timeout,
        registry=registry, locate_paragraph=_locator(sources),
    )
    scores = {r.paragraph_id: r.score for r in ranking}
    return {
        "question": question,
        "answer": answer.text,
        "probability": answer.probability,
        "paragraph_id": answer.source_paragraph,
        "score": scores.get(answer.source_paragraph),
        "status": ranking.status,
    }


def cmd_ask(args, cfg: PipelineConfig) -> int:
    if args.top_k:
        cfg.top_k = args.top_k
    if args.weight is not None:
        cfg.weight = args.weight
    cfg.validate()
    endpoint = args.endpoint or cfg.qa_endpoint
    if not endpoint:
        raise ConfigError("no QA endpoint: pass --endpoint or set qa_endpoint in the config")
    index, model = load_index(_path(args.index, cfg, "index"))
    store = {p.id: p for p in read_store(_path(args.store, cfg, "tokenized_store"))}
    registry = _load_registry(args.registry, cfg)

    if args.questions is None:
        if not args.question:
            raise InputError("give a question or --questions DATASET")
        _emit(run_ask(args.question, store, index, model, registry, cfg, endpoint, args.per_paragraph))
        return 0

    examples, _ = load_squad(args.questions)
    predictions = {}
    for ex in examples:
        rec = run_ask(ex.question, store, index, model, registry, cfg, endpoint, args.per_paragraph)
        predictions[ex.id] = rec["answer"]
    out = _path(args.predictions_out, cfg, "predictions")
    out.write_text(json.dumps(predictions, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"{len(predictions)} predictions -> {out}")
    return 0


# ---------------------------------------------------------------------------
# eval / utilities
# ---------------------------------------------------------------------------

def _split_label(item: str) -> tuple[str, str]:
    label, sep, path = item.partition("=")
    return (label, path) if sep else (Path(item).stem, item)


def cmd_eval(args, cfg: PipelineConfig) -> int:
    examples, size = load_squad(args.dataset)
    q_files = dict(_split_label(s) for s in args.q_scores or [])
    document = args.document or Path(args.dataset).stem
    runs = []
    for item in args.predictions:
        label, path = _split_label(item)
        q = load_q_scores(q_files[label]) if label in q_files else None
        runs.append(evaluate_run(examples, load_predictions(path), q, label, document, size))
    unused = set(q_files) - {r.system for r in runs}
    if unused:
        raise ConfigError(f"Q-scores given for unknown systems: {sorted(unused)}")
    out = _path(args.out, cfg, "report")
    out.write_text(json.dumps(comparison_report(runs), indent=2) + "\n", encoding="utf-8")
    print(render_table(runs))
    print(f"report -> {out}")
    return 0


def cmd_encode_soundex(args, cfg: PipelineConfig) -> int:
    try:
        print(soundex(args.word, args.length))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return 0


def cmd_stub_qa(args, cfg: PipelineConfig) -> int:
    from .stub_qa import make_server

    try:
        server = make_server(args.host, args.port)
    except OSError as exc:
        raise TransportError(f"cannot listen on {args.host}:{args.port}: {exc.strerror or exc}") from exc
    print(f"stub QA backend on http://{args.host}:{server.server_address[1]}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paraqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="pipeline config JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split a document into a paragraph store")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tokenize", help="definition and dependency tokenization")
    p.add_argument("--store")
    p.add_argument("--out")
    p.add_argument("--registry", help="registry file to write")
    p.add_argument("--registry-in", help="existing registry to extend")
    p.add_argument("--warnings")
    p.add_argument("--lexicon")
    p.add_argument("--no-definitions", action="store_true")
    p.add_argument("--no-dependency", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("index", help="build the TF-IDF index and train paragraph vectors")
    p.add_argument("--store")
    p.add_argument("--out")
    p.add_argument("--soundex", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--soundex-length", type=int)
    p.add_argument("--seed", type=int, help="paragraph-vector training seed")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("rank", help="rank paragraphs for a question")
    p.add_argument("question")
    p.add_argument("--index")
    p.add_argument("--registry")
    p.add_argument("--top-k", type=int)
    p.add_argument("--weight", type=float)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("ask", help="answer a question (or a SQuAD file of them)")
    p.add_argument("question", nargs="?")
    p.add_argument("--questions", help="SQuAD-format dataset for batch mode")
    p.add_argument("--predictions-out")
    p.add_argument("--index")
    p.add_argument("--store")
    p.add_argument("--registry")
    p.add_argument("--endpoint")
    p.add_argument("--top-k", type=int)
    p.add_argument("--weight", type=float)
    p.add_argument("--per-paragraph", action="store_true",
                   help="chunk each ranked paragraph separately instead of joining them")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="F1 / Q report for one or more prediction files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", action="append", required=True, metavar="[LABEL=]PATH")
    p.add_argument("--q-scores", action="append", metavar="LABEL=PATH")
    p.add_argument("--document")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("encode-soundex", help="print the Soundex code of a word")
    p.add_argument("word")
    p.add_argument("--length", type=int, default=6)
    p.set_defaults(func=cmd_encode_soundex)

    p = sub.add_parser("stub-qa", help="run the deterministic QA stub backend")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_stub_qa)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    stage = args.command
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ParaQAError as exc:
        print(f"paraqa {stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"paraqa {stage}: error: {exc}", file=sys.stderr)
        return InputError.exit_code
    except ValueError as exc:
        print(f"paraqa {stage}: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
