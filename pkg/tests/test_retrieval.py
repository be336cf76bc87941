import json
import math
import os
import random

import numpy as np
import pytest
from sklearn.feature_extraction.text import TfidfVectorizer

from paraqa.corpus import Paragraph, paragraphs_from_texts
from paraqa.errors import TrainingError, ValidationError
from paraqa.phonetics import soundex
from paraqa.retrieval import (
    PVHyperParams,
    analyze,
    build_tfidf,
    cosine,
    infer_pv,
    load_index,
    rank,
    save_index,
    train_pv,
)
from paraqa.retrieval import _kernels
from paraqa.tokenization import TokenClass, TokenRegistry

TEXTS = [
    "The member bank shall maintain reserves against transaction accounts.",
    "Examiners review loan files and collateral valuations during the examination.",
    "A suspicious activity report must be filed within thirty days of detection.",
    "Deposit records identify each depositor by name and taxpayer number.",
    "The board may assess a civil money penalty for each day of violation.",
    "Reserve balances are reported to the regional office every quarter.",
]

FAST = PVHyperParams(dim=16, epochs=10, min_count=1)


@pytest.fixture(scope="module")
def paragraphs():
    return paragraphs_from_texts(TEXTS, doc_id="r")


# -- TF-IDF -----------------------------------------------------------------

def test_hand_computed_single_paragraph():
    idx = build_tfidf(paragraphs_from_texts(["a a b"]), stopwords=())
    assert set(idx.vocabulary) == {"a", "b"}
    assert np.allclose(idx.idf, [1.0, 1.0])
    row = idx.row(0)
    assert np.allclose([row[idx.vocabulary["a"]], row[idx.vocabulary["b"]]],
                       np.array([2, 1]) / math.sqrt(5))


def test_disjoint_paragraphs_orthogonal():
    idx = build_tfidf(paragraphs_from_texts(["x", "y"]), stopwords=())
    assert float(idx.row(0) @ idx.row(1)) == 0.0


def test_matches_sklearn_oracle(paragraphs):
    stop = frozenset({"the", "and", "of", "a", "by", "for", "be", "to", "may", "must", "are"})
    idx = build_tfidf(paragraphs, stopwords=stop)
    oracle = TfidfVectorizer(analyzer=lambda t: analyze(t, stop), smooth_idf=True, norm="l2")
    expected = oracle.fit_transform(TEXTS).toarray()
    cols = [idx.vocabulary[t] for t in oracle.get_feature_names_out()]
    assert np.allclose(idx.matrix.toarray()[:, cols], expected, atol=1e-12)

    query = "reserve balances for the member bank"
    q_oracle = oracle.transform([query]).toarray()[0]
    assert np.allclose(idx.vectorize(query)[cols], q_oracle, atol=1e-12)


def test_soundex_vocabulary_is_codes(paragraphs):
    idx = build_tfidf(paragraphs, soundex=6)
    assert idx.soundex_enabled
    codes = [t for t in idx.vocabulary if not t.isdigit()]
    assert codes and all(len(t) == 6 and t[0].isupper() and t[1:].isdigit() for t in codes)
    assert soundex("reserves") in idx.vocabulary


def test_empty_corpus_and_bad_length():
    with pytest.raises(ValueError):
        build_tfidf([])
    with pytest.raises(ValueError):
        build_tfidf(paragraphs_from_texts(["a"]), soundex=3)


def test_stopword_only_paragraph_is_empty_row():
    idx = build_tfidf(paragraphs_from_texts(["the and of", "bank reserves"]))
    assert idx.empty == (True, False)
    assert not idx.row(0).any()


# -- kernels & paragraph vectors -------------------------------------------

def _random_problem(seed):
    rng = np.random.default_rng(seed)
    docs, vocab, dim, n, k = 4, 12, 8, 60, 3
    return (
        (rng.random((docs, dim)) - 0.5) / dim,
        rng.normal(0, 0.1, (vocab, dim)),
        rng.integers(0, docs, n),
        rng.integers(0, vocab, n),
        rng.integers(0, vocab, (n, k)),
        np.linspace(0.025, 0.001, n),
    )


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("update_words", [True, False])
def test_numba_matches_numpy(update_words):
    for seed in range(5):
        d1, o1, di, wi, neg, lrs = _random_problem(seed)
        d2, o2 = d1.copy(), o1.copy()
        _kernels.sgd_epoch(d1, o1, di, wi, neg, lrs, update_words, backend="numpy")
        _kernels.sgd_epoch(d2, o2, di, wi, neg, lrs, update_words, backend="numba")
        assert np.allclose(d1, d2, atol=1e-12) and np.allclose(o1, o2, atol=1e-12)


def test_backend_selection(monkeypatch):
    monkeypatch.setenv(_kernels.DISABLE_ENV, "1")
    assert _kernels.resolve_backend() == "numpy"
    monkeypatch.delenv(_kernels.DISABLE_ENV)
    assert _kernels.resolve_backend() == ("numba" if _kernels.HAVE_NUMBA else "numpy")
    with pytest.raises(ValueError):
        _kernels.resolve_backend("cuda")


def test_training_is_deterministic(paragraphs):
    a = train_pv(paragraphs, FAST)
    b = train_pv(paragraphs, FAST)
    assert np.max(np.abs(a.doc_vectors - b.doc_vectors)) == 0.0
    c = train_pv(paragraphs, PVHyperParams(dim=16, epochs=10, min_count=1, seed=7))
    assert not np.array_equal(a.doc_vectors, c.doc_vectors)


def test_training_is_order_invariant(paragraphs):
    a = train_pv(paragraphs, FAST)
    shuffled = list(paragraphs)
    random.Random(3).shuffle(shuffled)
    b = train_pv(shuffled, FAST)
    for pid in a.paragraph_ids:
        assert np.array_equal(a.vector(pid), b.vector(pid))


def test_backends_train_the_same_model(paragraphs):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    a = train_pv(paragraphs, FAST, backend="numpy")
    b = train_pv(paragraphs, FAST, backend="numba")
    assert np.allclose(a.doc_vectors, b.doc_vectors, atol=1e-9)


def test_cosine_identity(paragraphs):
    m = train_pv(paragraphs, FAST)
    for v in m.doc_vectors:
        assert cosine(v, v) == pytest.approx(1.0)
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_infer(paragraphs):
    m = train_pv(paragraphs, FAST)
    out = infer_pv(m, "zzz qqq")
    assert not out.signal and not out.vector.any()
    a, b = infer_pv(m, TEXTS[0]), infer_pv(m, TEXTS[0])
    assert a.signal and np.array_equal(a.vector, b.vector)


def test_infer_self_retrieval():
    texts = [f"{w} " * 3 + TEXTS[i % len(TEXTS)] for i, w in enumerate(
        ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"])]
    paras = paragraphs_from_texts(texts, doc_id="s")
    wins = 0
    for seed in range(10):
        m = train_pv(paras, PVHyperParams(dim=32, epochs=40, min_count=1, seed=seed))
        v = infer_pv(m, texts[2]).vector
        sims = [cosine(v, d) for d in m.doc_vectors]
        wins += sims[2] > np.median(sims)
    assert wins >= 9


def test_training_errors():
    with pytest.raises(ValueError):
        train_pv(paragraphs_from_texts(["only one"]))
    with pytest.raises(TrainingError):
        train_pv(paragraphs_from_texts(["alpha", "beta"]), PVHyperParams(min_count=2))
    dup = [Paragraph("x", "d", (), "a b", ("a b",), 2)] * 2
    with pytest.raises(ValueError):
        train_pv(dup)
    with pytest.raises(ValueError):
        PVHyperParams(dim=1)


# -- ranking -----------------------------------------------------------------

@pytest.fixture(scope="module")
def built(paragraphs):
    return build_tfidf(paragraphs), train_pv(paragraphs, FAST)


def test_verbatim_question_ranks_its_paragraph(built):
    idx, model = built
    for i, text in enumerate(TEXTS):
        top = rank(text, idx, model, weight=0.0, top_k=1)[0]
        assert top.paragraph_id == idx.paragraph_ids[i]
        assert top.tfidf_sim == pytest.approx(1.0, abs=1e-9)


def test_channels_match_argsort(built):
    idx, model = built
    q = "reserve balances reported by the member bank"
    n = idx.n_paragraphs
    pure_tfidf = rank(q, idx, model, weight=0.0, top_k=n)
    pure_pv = rank(q, idx, model, weight=1.0, top_k=n)
    tf = {r.paragraph_id: r.tfidf_sim for r in pure_tfidf}
    pv = {r.paragraph_id: r.pv_sim for r in pure_pv}
    assert [r.paragraph_id for r in pure_tfidf] == sorted(tf, key=lambda p: (-tf[p], p))
    assert [r.paragraph_id for r in pure_pv] == sorted(pv, key=lambda p: (-pv[p], p))
    for r in rank(q, idx, model, weight=0.3, top_k=n):
        assert r.score == pytest.approx(0.3 * r.pv_sim + 0.7 * r.tfidf_sim)
        assert 0.0 <= r.tfidf_sim <= 1.0 and 0.0 <= r.pv_sim <= 1.0


def test_ties_break_by_id():
    paras = [Paragraph(pid, "d", (), "same words here", ("same words here",), 3) for pid in "cab"]
    idx = build_tfidf(paras)
    model = train_pv(paras, FAST)
    model.doc_vectors[:] = 1.0
    ranking = rank("same words", idx, model, weight=0.5, top_k=3)
    assert [r.paragraph_id for r in ranking] == ["a", "b", "c"]


def test_soundex_recovers_misspelling():
    texts = ["Banks must file a suspicious activity report promptly.",
             "Reserves are held at the regional office.",
             "Examiners review collateral every year."]
    paras = paragraphs_from_texts(texts, doc_id="m")
    idx = build_tfidf(paras, soundex=6)
    model = train_pv(paras, FAST)
    assert rank("suspicous activty", idx, model, weight=0.0, top_k=1)[0].paragraph_id == "m-p0000"
    plain = build_tfidf(paras)
    assert rank("suspicous activty", plain, model, weight=0.0, top_k=1).no_match


def test_truncated_and_no_match(built):
    idx, model = built
    r = rank("bank reserves", idx, model, top_k=50)
    assert r.truncated and len(r) == idx.n_paragraphs and r.status == "truncated"
    assert rank("zzzz qqqq", idx, model).status == "no_match"
    with pytest.raises(ValueError):
        rank("bank", idx, model, weight=1.5)
    with pytest.raises(ValueError):
        rank("  ", idx, model)


def test_question_tokenized_with_registry():
    texts = ["X1X1 must file reports.", "Other text about reserves."]
    paras = paragraphs_from_texts(texts, doc_id="k")
    reg = TokenRegistry()
    reg.register("Financial Institution", TokenClass.DEFINITION)
    idx, model = build_tfidf(paras), train_pv(paras, FAST)
    top = rank("What must a financial institution do?", idx, model, weight=0.0, registry=reg)[0]
    assert top.paragraph_id == "k-p0000"


# -- persistence -------------------------------------------------------------

def test_index_round_trip(tmp_path, built, paragraphs):
    idx, model = built
    path = tmp_path / "index.json"
    save_index(path, idx, model)
    idx2, model2 = load_index(path)
    assert idx2.vocabulary == idx.vocabulary
    assert np.array_equal(idx2.matrix.toarray(), idx.matrix.toarray())
    assert np.array_equal(model2.doc_vectors, model.doc_vectors)
    q = "civil money penalty"
    assert [r.to_json() for r in rank(q, idx2, model2)] == [r.to_json() for r in rank(q, idx, model)]

    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(ValidationError):
        load_index(path)
