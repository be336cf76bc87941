import json
import shutil
import socket

import pytest

from paraqa.chunking import effective_window, sliding_window
from paraqa.cli import build_context, main
from paraqa.corpus import read_store
from paraqa.qa_client import select_answer, strip_markers
from paraqa.retrieval import load_index, rank
from paraqa.stub_qa import stub_answer
from paraqa.tokenization import TokenRegistry, detokenize, tokenize_question

QUESTION = "How long must an institution retain a copy of a suspicious activity report?"


@pytest.fixture()
def workdir(tmp_path, monkeypatch, fixtures_dir):
    monkeypatch.chdir(tmp_path)
    cfg = json.loads((fixtures_dir / "config.json").read_text())
    cfg["lexicon_path"] = str(fixtures_dir / "lexicon.txt")
    cfg["ranking"]["pv"] = {"dim": 32, "epochs": 20, "seed": 42}
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    return tmp_path


def run(*args, config="config.json"):
    argv = (["--config", config] if config else []) + [str(a) for a in args]
    return main(argv)


@pytest.fixture()
def pipeline(workdir, fixtures_dir, capsys):
    assert run("ingest", fixtures_dir / "regulation.txt") == 0
    assert run("tokenize") == 0
    assert run("index") == 0
    capsys.readouterr()
    return workdir


def test_ingest_is_deterministic(workdir, fixtures_dir, capsys):
    assert run("ingest", fixtures_dir / "regulation.txt") == 0
    first = (workdir / "paragraphs.json").read_bytes()
    assert run("ingest", fixtures_dir / "regulation.txt") == 0
    assert (workdir / "paragraphs.json").read_bytes() == first
    assert len(json.loads(first)) > 1
    assert "paragraphs ->" in capsys.readouterr().out


def test_missing_input(workdir, capsys):
    assert run("ingest", "nope.txt") == 3
    assert "paraqa ingest: error" in capsys.readouterr().err


def test_bad_split_config_fails_before_work(workdir, fixtures_dir):
    cfg = json.loads((workdir / "config.json").read_text())
    cfg["split"] = {"min_tokens": 300, "max_tokens": 300}
    (workdir / "bad.json").write_text(json.dumps(cfg))
    assert run("ingest", fixtures_dir / "regulation.txt", config="bad.json") == 2
    assert not (workdir / "paragraphs.json").exists()


@pytest.mark.parametrize("patch", [
    {"ranking": {"weight": 1.5}},
    {"lexicon_path": "missing-lexicon.txt"},
    {"dependency_provider": "telepathy"},
    {"chunking": {"window_size": 10, "stride": 20}},
])
def test_invalid_configs(workdir, fixtures_dir, patch):
    cfg = json.loads((workdir / "config.json").read_text())
    cfg.update(patch)
    (workdir / "bad.json").write_text(json.dumps(cfg))
    assert run("ingest", fixtures_dir / "regulation.txt", config="bad.json") == 2


def test_missing_config_file(workdir, fixtures_dir):
    assert run("ingest", fixtures_dir / "regulation.txt", config="absent.json") == 2


def test_tokenize_definition_fixture(workdir, fixtures_dir, capsys):
    assert run("ingest", fixtures_dir / "definitions.txt") == 0
    assert run("tokenize", "--no-dependency") == 0
    summary = json.loads(capsys.readouterr().out.split("\n", 1)[1])
    registry = TokenRegistry.load(workdir / "registry.json")
    assert registry.phrase_for("X1X1") == "common ownership"
    assert registry.phrase_for("X1X2") == "financial institution"
    (para,) = read_store(workdir / "paragraphs.tokenized.json")
    assert para.text == ("X1X1 means a relationship between two companies. "
                         "X1X2 needs to submit a suspicious activity report.")
    assert summary["reduction"] == 2


def test_both_stages_disabled_is_identity(workdir, fixtures_dir):
    run("ingest", fixtures_dir / "regulation.txt")
    assert run("tokenize", "--no-definitions", "--no-dependency") == 0
    assert read_store(workdir / "paragraphs.tokenized.json") == read_store(workdir / "paragraphs.json")


def test_tokenize_reaches_fixed_point(workdir, fixtures_dir, capsys):
    run("ingest", fixtures_dir / "regulation.txt")
    capsys.readouterr()
    assert run("tokenize") == 0
    first = json.loads(capsys.readouterr().out)
    assert first["reduction"] > 0 and first["new_tokens"] > 0
    assert run("tokenize", "--store", "paragraphs.tokenized.json", "--out", "again.json",
               "--registry-in", "registry.json", "--registry", "registry2.json") == 0
    second = json.loads(capsys.readouterr().out)
    assert second["changed_paragraphs"] == 0 and second["new_tokens"] == 0
    assert read_store(workdir / "again.json") == read_store(workdir / "paragraphs.tokenized.json")


def test_tokenize_with_unreachable_parser(workdir, fixtures_dir):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    cfg = json.loads((workdir / "config.json").read_text())
    cfg["dependency_provider"] = f"remote:http://127.0.0.1:{port}/"
    (workdir / "remote.json").write_text(json.dumps(cfg))
    run("ingest", fixtures_dir / "regulation.txt")
    assert run("tokenize", config="remote.json") == 4


def test_tokenize_with_conllu_provider(workdir, fixtures_dir, capsys):
    (workdir / "doc.txt").write_text("Banks file reports.")
    (workdir / "parses.conllu").write_text(
        "# text = Banks file reports.\n"
        "1\tBanks\tbank\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
        "2\tfile\tfile\tVERB\t_\t_\t0\troot\t_\t_\n"
        "3\treports\treport\tNOUN\t_\t_\t2\tobj\t_\t_\n"
        "4\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n\n"
    )
    cfg = json.loads((workdir / "config.json").read_text())
    cfg["dependency_provider"] = "conllu:parses.conllu"
    (workdir / "conll.json").write_text(json.dumps(cfg))
    assert run("ingest", "doc.txt", config="conll.json") == 0
    assert run("tokenize", config="conll.json") == 0
    (para,) = read_store(workdir / "paragraphs.tokenized.json")
    assert para.text == "Y1Y1 file Y1Y2."


def test_rank_with_large_top_k(pipeline, capsys):
    assert run("rank", "suspicious activity report", "--top-k", "100") == 0
    out = capsys.readouterr()
    ranked = json.loads(out.out)
    n = len(read_store(pipeline / "paragraphs.tokenized.json"))
    assert len(ranked) == n
    assert "exceeds corpus size" in out.err
    assert [r["rank"] for r in ranked] == list(range(1, n + 1))


def test_rank_bad_weight(pipeline):
    assert run("rank", "bank", "--weight", "2") == 2


def expected_stub_answer(workdir, question, cfg):
    """Independent trace of the ask flow using the stub scorer in-process."""
    index, model = load_index(workdir / "index.json")
    registry = TokenRegistry.load(workdir / "registry.json")
    store = {p.id: p for p in read_store(workdir / "paragraphs.tokenized.json")}
    q = tokenize_question(question, registry)
    ranking = rank(q, index, model, weight=cfg["ranking"]["weight"], top_k=cfg["ranking"]["top_k"])
    context, _, _ = build_context([store[r.paragraph_id] for r in ranking])
    window = effective_window(cfg["chunking"]["window_size"], cfg["chunking"]["margin"])
    chunks = sliding_window(context, window, min(cfg["chunking"]["stride"], window), "top-k")
    responses = [(c, *stub_answer(q, c.text)) for c in chunks]
    _, text, prob = responses[select_answer(responses)]
    return detokenize(strip_markers(text), registry), prob


def test_ask_end_to_end(pipeline, stub_endpoint, capsys):
    assert run("ask", QUESTION, "--endpoint", stub_endpoint) == 0
    out = json.loads(capsys.readouterr().out)
    cfg = json.loads((pipeline / "config.json").read_text())
    text, prob = expected_stub_answer(pipeline, QUESTION, cfg)
    assert out["answer"] == text
    assert out["probability"] == prob
    assert "five years" in out["answer"]
    assert "Y1Y" not in out["answer"] and "X1X" not in out["answer"]
    assert out["paragraph_id"] in {p.id for p in read_store(pipeline / "paragraphs.tokenized.json")}
    assert out["score"] is not None and out["status"] == "ok"


def test_ask_per_paragraph(pipeline, stub_endpoint, capsys):
    assert run("ask", QUESTION, "--endpoint", stub_endpoint, "--per-paragraph") == 0
    out = json.loads(capsys.readouterr().out)
    assert "five years" in out["answer"]


def test_ask_no_match(pipeline, stub_endpoint, capsys):
    assert run("ask", "zzzz qqqq", "--endpoint", stub_endpoint) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "no_match"


def test_ask_unreachable_backend(pipeline):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    assert run("ask", QUESTION, "--endpoint", f"http://127.0.0.1:{port}/") == 4


def test_ask_batch_then_eval(pipeline, fixtures_dir, stub_endpoint, capsys):
    dataset = fixtures_dir / "questions.json"
    assert run("ask", "--questions", dataset, "--endpoint", stub_endpoint) == 0
    preds = json.loads((pipeline / "predictions.json").read_text())
    assert set(preds) == {f"q{i}" for i in range(1, 7)}
    shutil.copy(pipeline / "predictions.json", pipeline / "other.json")
    (pipeline / "q.json").write_text(json.dumps({"q1": 3, "q2": 2}))
    assert run("eval", "--dataset", dataset, "--predictions", "hybrid=predictions.json",
               "--predictions", "other.json", "--q-scores", "hybrid=q.json") == 0
    out = capsys.readouterr().out
    assert "hybrid F1" in out and "other F1" in out
    report = json.loads((pipeline / "report.json").read_text())
    assert len(report["rows"]) == 2
    per_question = [r for r in report["records"] if r["system"] == "hybrid"]
    assert len(per_question) == 6 and all(0 <= r["f1"] <= 1 for r in per_question)
    assert report["rows"][0]["q_normalized_mean"] == pytest.approx(0.75)


def test_seed_threads_into_training(pipeline):
    assert run("index", "--seed", "1", "--out", "a.json") == 0
    assert run("index", "--seed", "1", "--out", "b.json") == 0
    assert run("index", "--seed", "2", "--out", "c.json") == 0
    a, b, c = ((pipeline / n).read_bytes() for n in ("a.json", "b.json", "c.json"))
    assert a == b and a != c


def test_index_with_soundex(pipeline, capsys):
    assert run("index", "--soundex", "--out", "sx.json") == 0
    index, _ = load_index(pipeline / "sx.json")
    assert index.soundex_enabled


def test_encode_soundex(capsys):
    assert main(["encode-soundex", "Hello", "--length", "4"]) == 0
    assert capsys.readouterr().out.strip() == "H400"
    assert main(["encode-soundex", "Hello", "--length", "3"]) == 3


def test_stub_qa_port_in_use(capsys):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen()
        port = s.getsockname()[1]
        assert main(["stub-qa", "--port", str(port)]) == 4
    assert "cannot listen" in capsys.readouterr().err
