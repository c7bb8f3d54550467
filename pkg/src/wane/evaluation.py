"""Link-prediction AUC, vertex classification, and inspection exports.

Link prediction scores a pair by the inner product of the two context-aware
embeddings h = [h_s; h_t].  Classification runs an in-repo one-vs-rest
hinge-loss linear classifier (gradient descent, L2 penalty) on global
embeddings: the structural vector concatenated with the mean of the vertex's
context-aware textual embeddings over its train-graph neighbors.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model as _model
from .errors import ConfigError, DataError


def pair_score(i, j, params, sequences, mode):
    """Inner product of the pair's context-aware embeddings; symmetric in (i, j)."""
    pe = _model.pair_embeddings(i, j, params, sequences, mode)
    return float(pe.h_i @ pe.h_j)


def _average_ranks(x):
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    n = x.size
    ranks = np.empty(n, dtype=np.float64)
    bounds = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    bounds = np.append(bounds, n)
    for k in range(bounds.size - 1):
        lo, hi = bounds[k], bounds[k + 1]
        ranks[order[lo:hi]] = 0.5 * ((lo + 1) + hi)  # mean of ranks lo+1..hi
    return ranks


def auc_from_scores(pos_scores, neg_scores):
    """Mann-Whitney AUC via sorted average ranks; ties count one half.

    Equals brute-force pair counting exactly: the rank sum is a sum of
    half-integers, so no rounding is involved before the final division.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs non-empty positive and negative score sets")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    rank_sum = float(ranks[:pos.size].sum())
    u = rank_sum - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def link_prediction_auc(test_pos, test_neg, params, sequences, mode):
    """AUC of true held-out edges against sampled non-edges."""
    if not test_pos or not test_neg:
        raise DataError("empty test set; the split has no held-out edges")
    pos = np.array([pair_score(u, v, params, sequences, mode) for (u, v) in test_pos])
    neg = np.array([pair_score(u, v, params, sequences, mode) for (u, v) in test_neg])
    return auc_from_scores(pos, neg)


def global_embedding(v, params, g, sequences, mode):
    """[h_s; mean over train-graph neighbors u of h_t^(v|u)].

    An isolated vertex falls back to aligning its text with itself.
    """
    _model.check_mode_dims(params, mode)
    if not 0 <= v < params.num_vertices:
        raise ConfigError("vertex id %r out of range [0, %d)" % (v, params.num_vertices))
    if mode == "wane":
        # partner-independent: the mean over neighbors equals the plain average
        ht = _model.text_embed_avg(sequences[v], params)
        return np.concatenate([params.S[v], ht])
    neighbors = g.neighbors(v)
    if not neighbors:
        ht = _context_embed(v, v, params, sequences, mode)
    else:
        acc = None
        for u in neighbors:
            h = _context_embed(v, u, params, sequences, mode)
            acc = h.copy() if acc is None else acc + h
        ht = acc / len(neighbors)
    return np.concatenate([params.S[v], ht])


def _context_embed(a, b, params, sequences, mode):
    if mode == "wane-wc":
        return _model.text_embed_wc(sequences[a], sequences[b], params)
    h, _ = _model.text_embed_ww(sequences[a], sequences[b], params)
    return h


def all_global_embeddings(params, g, sequences, mode):
    """N x (d_s + d_t) matrix of global embeddings."""
    rows = [global_embedding(v, params, g, sequences, mode)
            for v in range(params.num_vertices)]
    return np.stack(rows)


def classify(embeddings, labels, train_ratio, repeats=10, seed=0,
             iters=300, lr=0.5, l2=1e-4):
    """One-vs-rest hinge-loss linear classifier accuracy over random splits.

    Features are standardized on each train split; gradient descent minimizes
    mean hinge loss plus an L2 penalty.  A split missing some class in its
    train part is redrawn.  Returns (mean accuracy, per-repeat accuracies).
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ConfigError("embeddings and labels disagree: %d vs %d rows"
                          % (X.shape[0], y.shape[0]))
    if not 0.0 < train_ratio < 1.0:
        raise ConfigError("train_ratio must be in (0, 1), got %r" % (train_ratio,))
    if repeats < 1:
        raise ConfigError("repeats must be >= 1, got %r" % (repeats,))
    classes = np.unique(y)
    n_classes = classes.size
    y_idx = np.searchsorted(classes, y)
    n = X.shape[0]
    n_train = int(round(train_ratio * n))
    if n_train < n_classes or n_train >= n:
        raise DataError("split of %d rows at ratio %g cannot hold every class"
                        % (n, train_ratio))
    rng = np.random.default_rng(seed)
    accs = []
    for _rep in range(repeats):
        for _attempt in range(100):
            perm = rng.permutation(n)
            tr, te = perm[:n_train], perm[n_train:]
            if np.unique(y_idx[tr]).size == n_classes:
                break
        else:
            raise DataError("could not draw a train split containing every class")
        mu = X[tr].mean(axis=0)
        sd = X[tr].std(axis=0)
        sd[sd < 1e-8] = 1.0
        Xtr = np.hstack([(X[tr] - mu) / sd, np.ones((tr.size, 1))])
        Xte = np.hstack([(X[te] - mu) / sd, np.ones((te.size, 1))])
        Y = -np.ones((tr.size, n_classes))
        Y[np.arange(tr.size), y_idx[tr]] = 1.0
        W = np.zeros((n_classes, Xtr.shape[1]))
        for _t in range(iters):
            scores = Xtr @ W.T
            viol = (Y * scores) < 1.0
            grad = -(viol * Y).T @ Xtr / tr.size + l2 * W
            W -= lr * grad
        pred = np.argmax(Xte @ W.T, axis=1)
        accs.append(float(np.mean(pred == y_idx[te])))
    return float(np.mean(accs)), accs


def export_embeddings(params, g, sequences, mode, path):
    """Write global embeddings as TSV with a header; full float precision."""
    emb = all_global_embeddings(params, g, sequences, mode)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex_id\t" + "\t".join("v%d" % (k + 1) for k in range(emb.shape[1])) + "\n")
        for v in range(emb.shape[0]):
            fh.write("%d\t%s\n" % (v, "\t".join("%.17g" % x for x in emb[v])))
    return emb.shape


def inspect_alignment(i, j, params, vocab, sequences, mode, path):
    """Write per-word matching-vector norms of both directions as TSV (wane-ww)."""
    if mode != "wane-ww":
        raise ConfigError("alignment inspection requires mode wane-ww, got %r" % (mode,))
    _model.check_mode_dims(params, mode)
    n = params.num_vertices
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigError("vertex ids (%r, %r) out of range [0, %d)" % (i, j, n))
    _, feats_ij = _model.text_embed_ww(sequences[i], sequences[j], params)
    _, feats_ji = _model.text_embed_ww(sequences[j], sequences[i], params)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("direction\tposition\ttoken\tmatching_norm\n")
        for tag, seq, feats in (("%d|%d" % (i, j), sequences[i], feats_ij),
                                ("%d|%d" % (j, i), sequences[j], feats_ji)):
            for pos, tid in enumerate(seq.token_ids):
                fh.write("%s\t%d\t%s\t%.17g\n"
                         % (tag, pos, vocab.token_of(int(tid)), feats.norms[pos]))


@dataclass
class EvalReport:
    """One evaluation outcome plus enough context to reproduce it."""

    task: str
    metric: str
    value: float
    seed: int = 0
    config: dict = field(default_factory=dict)
    repeats: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ConfigError("metric value %r outside [0, 1]" % (self.value,))

    def tsv_lines(self):
        lines = ["task\t%s" % self.task,
                 "metric\t%s" % self.metric,
                 "value\t%.6f" % self.value,
                 "seed\t%d" % self.seed]
        for k, val in enumerate(self.repeats):
            lines.append("repeat_%d\t%.6f" % (k, val))
        for key in sorted(self.config):
            lines.append("config.%s\t%s" % (key, self.config[key]))
        return lines

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.tsv_lines()) + "\n")

    def __str__(self):
        return "\n".join(self.tsv_lines())
