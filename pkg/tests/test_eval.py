import itertools

import numpy as np
import pytest

from helpers import random_sequences
from wane.corpus import TextSequence, Vocabulary
from wane.errors import ConfigError, DataError
from wane.evaluation import (EvalReport, all_global_embeddings,
                             auc_from_scores, classify, export_embeddings,
                             global_embedding, inspect_alignment,
                             link_prediction_auc, pair_score)
from wane.graph import Graph
from wane.model import ModelParams, text_embed_avg, text_embed_ww


def brute_force_auc(pos, neg):
    hits = 0.0
    for p, q in itertools.product(pos, neg):
        if p > q:
            hits += 1.0
        elif p == q:
            hits += 0.5
    return hits / (len(pos) * len(neg))


def make_setup(n=6, vocab=12, d_s=6, mode="wane-ww", align="submult",
               agg="max", seed=0, max_m=5):
    rng = np.random.default_rng(seed)
    params = ModelParams.initialize(n, vocab, mode, align_fn=align,
                                    agg_fn=agg, d_s=d_s, rng=rng)
    seqs = random_sequences(rng, n, vocab, max_m)
    return params, seqs


# ---------------------------------------------------------------------------
# AUC

def test_auc_hand_example():
    assert auc_from_scores([0.9, 0.8], [0.1, 0.85]) == 0.75


def test_auc_extremes_and_ties():
    assert auc_from_scores([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert auc_from_scores([0.0, 1.0], [2.0, 3.0]) == 0.0
    assert auc_from_scores([1.0, 1.0, 1.0], [1.0, 1.0]) == 0.5


def test_auc_matches_brute_force_counting():
    rng = np.random.default_rng(7)
    for _ in range(100):
        npos = int(rng.integers(1, 30))
        nneg = int(rng.integers(1, 30))
        # coarse grid forces plenty of ties
        pos = rng.integers(0, 6, size=npos).astype(float)
        neg = rng.integers(0, 6, size=nneg).astype(float)
        assert auc_from_scores(pos, neg) == brute_force_auc(pos, neg)


def test_auc_invariant_under_monotone_transforms():
    rng = np.random.default_rng(11)
    pos = rng.integers(0, 8, size=25).astype(float)
    neg = rng.integers(0, 8, size=40).astype(float)
    base = auc_from_scores(pos, neg)
    assert auc_from_scores(3.0 * pos + 1.0, 3.0 * neg + 1.0) == base
    assert auc_from_scores(np.exp(pos / 8.0), np.exp(neg / 8.0)) == base


def test_auc_empty_rejected():
    with pytest.raises(DataError):
        auc_from_scores([], [1.0])
    with pytest.raises(DataError):
        auc_from_scores([1.0], [])


# ---------------------------------------------------------------------------
# pair scores and link AUC

@pytest.mark.parametrize("mode", ["wane", "wane-wc", "wane-ww"])
def test_pair_score_symmetric(mode):
    params, seqs = make_setup(mode=mode, seed=3)
    for i, j in [(0, 1), (2, 5), (4, 3)]:
        assert pair_score(i, j, params, seqs, mode) == \
               pair_score(j, i, params, seqs, mode)


def test_pair_score_zero_params_is_zero():
    params, seqs = make_setup(mode="wane")
    params.S[:] = 0.0
    params.Ew[:] = 0.0
    assert pair_score(0, 1, params, seqs, "wane") == 0.0


def test_pair_score_structure_only_inner_product():
    # with word embeddings zeroed the textual halves vanish in wane mode
    params, seqs = make_setup(mode="wane", d_s=4)
    params.Ew[:] = 0.0
    params.S[0] = [1.0, 2.0, 0.0, -1.0]
    params.S[1] = [0.5, -1.0, 3.0, 2.0]
    assert pair_score(0, 1, params, seqs, "wane") == pytest.approx(
        1.0 * 0.5 - 2.0 - 2.0, abs=1e-15)


def test_link_prediction_auc_on_planted_scores():
    params, seqs = make_setup(mode="wane", d_s=4)
    params.Ew[:] = 0.0
    params.S[:] = 0.0
    # plant structure so that true pairs align and fake pairs anti-align
    params.S[0] = [1, 0, 0, 0]
    params.S[1] = [1, 0, 0, 0]
    params.S[2] = [0, 1, 0, 0]
    params.S[3] = [0, 1, 0, 0]
    params.S[4] = [-1, 0, 0, 0]
    params.S[5] = [0, -1, 0, 0]
    auc = link_prediction_auc([(0, 1), (2, 3)], [(0, 4), (2, 5)],
                              params, seqs, "wane")
    assert auc == 1.0
    with pytest.raises(DataError):
        link_prediction_auc([], [(0, 4)], params, seqs, "wane")


# ---------------------------------------------------------------------------
# global embeddings

def test_global_embedding_wane_ignores_graph():
    params, seqs = make_setup(mode="wane")
    g_ring = Graph(6, [(i, (i + 1) % 6, 1.0) for i in range(6)])
    g_empty = Graph(6, [(0, 1, 1.0)])
    e1 = global_embedding(2, params, g_ring, seqs, "wane")
    e2 = global_embedding(2, params, g_empty, seqs, "wane")
    assert np.array_equal(e1, e2)
    expected = np.concatenate([params.S[2], text_embed_avg(seqs[2], params)])
    assert np.array_equal(e1, expected)


def test_global_embedding_single_neighbor():
    params, seqs = make_setup()
    g = Graph(6, [(0, 1, 1.0)])
    emb = global_embedding(0, params, g, seqs, "wane-ww")
    h, _ = text_embed_ww(seqs[0], seqs[1], params)
    assert np.array_equal(emb[:params.d_s], params.S[0])
    assert np.array_equal(emb[params.d_s:], h)


def test_global_embedding_isolated_vertex_aligns_with_itself():
    params, seqs = make_setup()
    g = Graph(6, [(0, 1, 1.0)])  # vertex 5 has no edges
    emb = global_embedding(5, params, g, seqs, "wane-ww")
    h, _ = text_embed_ww(seqs[5], seqs[5], params)
    assert np.array_equal(emb[params.d_s:], h)


def test_global_embedding_identical_neighbors_average_to_one():
    params, seqs = make_setup()
    seqs[2] = TextSequence(2, seqs[1].token_ids.copy())
    g = Graph(6, [(0, 1, 1.0), (0, 2, 1.0)])
    emb = global_embedding(0, params, g, seqs, "wane-ww")
    h, _ = text_embed_ww(seqs[0], seqs[1], params)
    assert np.allclose(emb[params.d_s:], h, rtol=0, atol=1e-15)


def test_global_embedding_bad_vertex():
    params, seqs = make_setup()
    g = Graph(6, [(0, 1, 1.0)])
    with pytest.raises(ConfigError):
        global_embedding(6, params, g, seqs, "wane-ww")
    with pytest.raises(ConfigError):
        global_embedding(-1, params, g, seqs, "wane-ww")


def test_all_global_embeddings_shape():
    params, seqs = make_setup(d_s=6)
    g = Graph(6, [(i, (i + 1) % 6, 1.0) for i in range(6)])
    emb = all_global_embeddings(params, g, seqs, "wane-ww")
    assert emb.shape == (6, 6 + params.text_dim("wane-ww"))
    assert np.all(np.isfinite(emb))


# ---------------------------------------------------------------------------
# classification

def separable_blobs(n_per=30, n_classes=3, dim=5, seed=0, spread=0.05):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c in range(n_classes):
        center = np.zeros(dim)
        center[c] = 4.0
        X.append(center + spread * rng.normal(size=(n_per, dim)))
        y.extend([c] * n_per)
    return np.vstack(X), np.array(y)


def test_classify_perfect_on_separable_blobs():
    X, y = separable_blobs()
    mean_acc, accs = classify(X, y, train_ratio=0.5, repeats=5, seed=1)
    assert mean_acc == 1.0
    assert all(a == 1.0 for a in accs)


def test_classify_deterministic():
    X, y = separable_blobs(spread=1.5)
    r1 = classify(X, y, train_ratio=0.3, repeats=4, seed=9)
    r2 = classify(X, y, train_ratio=0.3, repeats=4, seed=9)
    assert r1 == r2


def test_classify_shuffled_labels_near_chance():
    X, y = separable_blobs(n_per=60, n_classes=4)
    rng = np.random.default_rng(4)
    mean_acc, _ = classify(X, rng.permutation(y), train_ratio=0.5,
                           repeats=10, seed=2)
    assert abs(mean_acc - 0.25) < 0.08


def test_classify_validation():
    X, y = separable_blobs()
    with pytest.raises(ConfigError):
        classify(X, y[:-1], train_ratio=0.5)
    with pytest.raises(ConfigError):
        classify(X, y, train_ratio=0.0)
    with pytest.raises(ConfigError):
        classify(X, y, train_ratio=1.0)
    with pytest.raises(ConfigError):
        classify(X, y, train_ratio=0.5, repeats=0)
    with pytest.raises(DataError):
        classify(X[:10], np.arange(10) % 7, train_ratio=0.2)


# ---------------------------------------------------------------------------
# exports

def test_export_embeddings_round_trip(tmp_path):
    params, seqs = make_setup()
    g = Graph(6, [(i, (i + 1) % 6, 1.0) for i in range(6)])
    path = str(tmp_path / "emb.tsv")
    shape = export_embeddings(params, g, seqs, "wane-ww", path)
    emb = all_global_embeddings(params, g, seqs, "wane-ww")
    assert shape == emb.shape
    lines = open(path).read().splitlines()
    header = lines[0].split("\t")
    assert header[0] == "vertex_id"
    assert header[1:] == ["v%d" % (k + 1) for k in range(emb.shape[1])]
    assert len(lines) == 1 + emb.shape[0]
    back = np.loadtxt(path, skiprows=1)
    assert np.array_equal(back[:, 0], np.arange(6.0))
    # %.17g prints doubles exactly, so the parse is an identity
    assert np.array_equal(back[:, 1:], emb)


def test_inspect_alignment_file_contract(tmp_path):
    params, seqs = make_setup(seed=5)
    vocab = Vocabulary()
    for k in range(12):
        vocab.add("tok%d" % k)
    path = str(tmp_path / "align.tsv")
    inspect_alignment(1, 4, params, vocab, seqs, "wane-ww", path)
    lines = open(path).read().splitlines()
    assert lines[0] == "direction\tposition\ttoken\tmatching_norm"
    assert len(lines) == 1 + seqs[1].token_ids.size + seqs[4].token_ids.size
    fwd = [ln for ln in lines[1:] if ln.startswith("1|4\t")]
    bwd = [ln for ln in lines[1:] if ln.startswith("4|1\t")]
    assert len(fwd) == seqs[1].token_ids.size and len(bwd) == seqs[4].token_ids.size
    for ln in lines[1:]:
        parts = ln.split("\t")
        # id 0 resolves to the reserved sentinel, everything else to tokN
        assert parts[2].startswith("tok") or parts[2] == "<empty>"
        assert float(parts[3]) >= 0.0


def test_inspect_alignment_identical_one_word_sub_is_zero(tmp_path):
    # a word aligned against an identical single-word text cancels under sub
    params, _ = make_setup(align="sub")
    seqs = [TextSequence(v, np.array([3], dtype=np.int64)) for v in range(6)]
    vocab = Vocabulary()
    for k in range(12):
        vocab.add("tok%d" % k)
    path = str(tmp_path / "self.tsv")
    inspect_alignment(0, 1, params, vocab, seqs, "wane-ww", path)
    for ln in open(path).read().splitlines()[1:]:
        assert float(ln.split("\t")[3]) == 0.0


def test_inspect_alignment_rejects_wrong_mode_and_ids(tmp_path):
    params, seqs = make_setup(mode="wane")
    vocab = Vocabulary()
    for k in range(12):
        vocab.add("tok%d" % k)
    with pytest.raises(ConfigError):
        inspect_alignment(0, 1, params, vocab, seqs, "wane",
                          str(tmp_path / "x.tsv"))
    params_ww, seqs_ww = make_setup()
    with pytest.raises(ConfigError):
        inspect_alignment(0, 6, params_ww, vocab, seqs_ww, "wane-ww",
                          str(tmp_path / "y.tsv"))


# ---------------------------------------------------------------------------
# report container

def test_eval_report_range_checked():
    with pytest.raises(ConfigError):
        EvalReport(task="link", metric="auc", value=1.5)
    with pytest.raises(ConfigError):
        EvalReport(task="link", metric="auc", value=-0.1)


def test_eval_report_tsv(tmp_path):
    rep = EvalReport(task="link", metric="auc", value=0.9371, seed=3,
                     config={"mode": "wane-ww", "ratio": 0.55},
                     repeats=[0.93, 0.94])
    path = tmp_path / "rep.tsv"
    rep.write(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "task\tlink"
    assert lines[2] == "value\t0.937100"
    assert "repeat_0\t0.930000" in lines
    assert "config.mode\twane-ww" in lines
    assert str(rep) == "\n".join(lines)
