import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from paraqa.dependency import (
    ConllProvider,
    DepNode,
    DependencyGraph,
    HeuristicLexicon,
    HeuristicProvider,
    RemoteProvider,
    align_nodes,
    heuristic_parse,
    parse_remote,
    read_conllu,
    split_words,
    write_conllu,
)
from paraqa.errors import ParseError, ProtocolError, TransportError, ValidationError

BLOCK = (
    "# sent_id = s1\n"
    "# text = Banks file reports\n"
    "1\tBanks\tbank\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tfile\tfile\tVERB\t_\t_\t0\troot\t_\t_\n"
    "3\treports\treport\tNOUN\t_\t_\t2\tobj\t_\t_\n"
    "\n"
)


def rels(graph):
    return {n.form: (n.deprel, graph.node(n.head).form if n.head else None) for n in graph.nodes}


def test_empty_input():
    assert read_conllu("") == []


def test_three_token_block():
    (g,) = read_conllu(BLOCK)
    assert g.root.index == 2
    assert g.sentence_id == "s1"
    assert g.text == "Banks file reports"
    assert [n.deprel for n in g.nodes] == ["nsubj", "root", "obj"]


def test_self_head_is_invalid():
    bad = BLOCK.replace("3\treports\treport\tNOUN\t_\t_\t2", "3\treports\treport\tNOUN\t_\t_\t3")
    with pytest.raises(ValidationError):
        read_conllu(bad)


def test_two_roots_and_cycles_invalid():
    nodes = (DepNode(1, "a", "a", "X", 2, "dep"), DepNode(2, "b", "b", "X", 1, "dep"),
             DepNode(3, "c", "c", "X", 0, "root"))
    with pytest.raises(ValidationError):
        DependencyGraph("s", nodes).validate()
    nodes = (DepNode(1, "a", "a", "X", 0, "root"), DepNode(2, "b", "b", "X", 0, "root"))
    with pytest.raises(ValidationError):
        DependencyGraph("s", nodes).validate()


def test_malformed_line_reports_line_number():
    bad = BLOCK.replace("3\treports\treport\tNOUN\t_\t_\t2\tobj\t_\t_", "3 reports report")
    with pytest.raises(ParseError) as info:
        read_conllu(bad)
    assert info.value.line == 5


def test_multiword_and_empty_nodes_skipped():
    text = BLOCK.replace("1\tBanks", "1-2\tBanksfile\t_\t_\t_\t_\t_\t_\t_\t_\n1\tBanks")
    text = text.replace("3\treports", "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n3\treports")
    (g,) = read_conllu(text)
    assert [n.form for n in g.nodes] == ["Banks", "file", "reports"]


def test_deprel_aliases():
    (g,) = read_conllu(BLOCK.replace("\tobj\t", "\tdobj\t"))
    assert g.node(3).deprel == "obj"


def test_write_read_round_trip():
    graphs = read_conllu(BLOCK + BLOCK.replace("s1", "s2"))
    assert read_conllu(write_conllu(graphs)) == graphs


# -- remote service -------------------------------------------------------

class _ParserStub(BaseHTTPRequestHandler):
    mode = "ok"

    def do_POST(self):  # noqa: N802
        self.rfile.read(int(self.headers.get("Content-Length") or 0))
        if self.server.mode == "empty":
            self.send_response(200)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if self.server.mode == "error":
            self.send_response(503)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        (g,) = read_conllu(BLOCK)
        body = json.dumps({"nodes": [
            {"index": n.index, "form": n.form, "lemma": n.lemma, "upos": n.upos,
             "head": n.head, "deprel": n.deprel} for n in g.nodes
        ]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def parser_stub():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ParserStub)
    server.mode = "ok"
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}/"
    server.shutdown()
    server.server_close()


def _closed_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_remote_matches_file_reader(parser_stub):
    _, url = parser_stub
    g = parse_remote("Banks file reports", url, sentence_id="s1")
    (expected,) = read_conllu(BLOCK)
    assert g.nodes == expected.nodes
    assert RemoteProvider(url).parse("Banks file reports", "s1").nodes == expected.nodes


def test_remote_empty_body(parser_stub):
    server, url = parser_stub
    server.mode = "empty"
    with pytest.raises(ProtocolError):
        parse_remote("Banks file reports", url)


def test_remote_server_errors_exhaust_retries(parser_stub):
    server, url = parser_stub
    server.mode = "error"
    with pytest.raises(TransportError):
        parse_remote("x", url, retries=1, backoff=0.01)


def test_remote_unreachable():
    with pytest.raises(TransportError):
        parse_remote("x", f"http://127.0.0.1:{_closed_port()}/", retries=0, timeout=1)


# -- heuristic parser -----------------------------------------------------

def test_heuristic_subject_verb_object():
    g = heuristic_parse(["Banks", "file", "reports"])
    assert g.root.form == "file"
    assert rels(g)["Banks"] == ("nsubj", "file")
    assert rels(g)["reports"] == ("obj", "file")


def test_heuristic_definition_sentence():
    g = heuristic_parse(["Common", "ownership", "means", "a", "relationship"])
    r = rels(g)
    assert g.root.form == "means"
    assert r["ownership"] == ("nsubj", "means")
    assert r["Common"] == ("compound", "ownership")
    assert r["relationship"] == ("obj", "means")
    assert r["a"] == ("det", "relationship")


def test_heuristic_coordination_and_xcomp():
    words = [w for w, _, _ in split_words(
        "Bank and insurance company need to submit a suspicious activity report.")]
    g = heuristic_parse(words)
    r = rels(g)
    assert g.root.form == "need"
    assert r["company"] == ("nsubj", "need")
    assert r["Bank"] == ("conj", "company")
    assert r["and"] == ("cc", "company")
    assert r["submit"] == ("xcomp", "need")
    assert r["report"] == ("obj", "submit")


def test_heuristic_modal_takes_unknown_verb():
    words = [w for w, _, _ in split_words("The Board may waive the charge.")]
    g = heuristic_parse(words)
    assert g.root.form == "waive"
    assert rels(g)["may"] == ("aux", "waive")
    assert rels(g)["charge"] == ("obj", "waive")


def test_heuristic_degraded():
    g = heuristic_parse(["report"])
    assert g.degraded and g.root.form == "report"


def test_custom_lexicon():
    lex = HeuristicLexicon.from_words(["audit"], determiners={"the"}, auxiliaries=set(),
                                      prepositions=set(), conjunctions=set())
    g = heuristic_parse(["Examiners", "audit", "the", "bank"], lex)
    assert g.root.form == "audit"
    assert rels(g)["bank"] == ("obj", "audit")


def test_conll_provider_matches_by_text():
    provider = ConllProvider(read_conllu(BLOCK))
    assert provider.parse("  banks   FILE reports ").root.form == "file"
    with pytest.raises(Exception):
        provider.parse("unknown sentence")


def test_align_nodes():
    g = HeuristicProvider().parse("Banks file, reports.")
    spans = align_nodes(g, "Banks file, reports.")
    assert [("Banks file, reports."[s:e]) for s, e in spans] == [n.form for n in g.nodes]
    assert align_nodes(g, "Other words entirely") is None
