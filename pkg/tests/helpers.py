"""Shared test utilities: finite-difference gradient checking.

Central differences with eps = 1e-5; a gradient entry passes if it matches
to 1e-7 absolutely or 1e-4 relatively.  Max-pooled instances whose pooling
margin is tiny are redrawn, since a kink crossed by the probe step makes the
numeric derivative meaningless there.
"""

import numpy as np

from wane import model as wm
from wane.corpus import TextSequence
from wane.model import ModelParams, make_dropout_mask, pair_loss

EPS = 1e-5
ABS_TOL = 1e-7
REL_TOL = 1e-4
POOL_GAP_MIN = 1e-3


def rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def grad_ok(a: float, n: float) -> bool:
    return abs(a - n) < ABS_TOL or rel_err(a, n) < REL_TOL


def central_diff(f, table, idx, eps=EPS):
    orig = table[idx]
    table[idx] = orig + eps
    hi = f()
    table[idx] = orig - eps
    lo = f()
    table[idx] = orig
    return (hi - lo) / (2.0 * eps)


def random_sequences(rng, n, vocab, max_m):
    seqs = []
    for v in range(n):
        m = int(rng.integers(1, max_m + 1))
        seqs.append(TextSequence(v, rng.integers(0, vocab, size=m).astype(np.int64)))
    return seqs


def _min_pool_gap(i, j, negatives, params, seqs, masks):
    # smallest top-2 column margin across every max-pooled encode the loss
    # will perform; np.inf when a row has a single candidate column
    store = wm._EncodeStore(params, seqs, "wane-ww", masks)
    gap = np.inf
    for a, b in dict.fromkeys([(i, j), (j, i)] + [(n, j) for n in negatives]):
        Mv = store.entry(a, b)[1][4]
        if Mv.shape[1] < 2:
            continue
        top2 = np.sort(Mv, axis=1)[:, -2:]
        gap = min(gap, float(np.min(top2[:, 1] - top2[:, 0])))
    return gap


def draw_instance(rng, mode, align_fn, agg_fn, n=6, vocab=20, max_m=5,
                  d_s=8, k=2, keep_prob=None, scale=1.0):
    """One random pair_loss problem; redraws while a pooling margin is tiny."""
    while True:
        params = ModelParams.initialize(n, vocab, mode, align_fn=align_fn,
                                        agg_fn=agg_fn, d_s=d_s, rng=rng)
        if scale != 1.0:
            params.S *= scale
            params.Ew *= scale
            params.W1 *= scale
            params.W2 *= scale
        seqs = random_sequences(rng, n, vocab, max_m)
        i, j, *negs = rng.permutation(n)[:2 + k].tolist()
        masks = None
        if keep_prob is not None:
            masks = {v: make_dropout_mask(rng, (params.d_w, seqs[v].length), keep_prob)
                     for v in dict.fromkeys((i, j, *negs))}
        if mode == "wane-ww" and agg_fn == "max":
            if _min_pool_gap(i, j, negs, params, seqs, masks) < POOL_GAP_MIN:
                continue
        return params, seqs, i, j, negs, masks


def check_pair_loss_grads(params, seqs, i, j, negs, masks, mode):
    """Sweeps every parameter entry; returns the worst failing relative error
    (0.0 when all entries pass)."""
    _, grads = pair_loss(i, j, negs, params, seqs, mode, dropout_masks=masks)

    def loss():
        val, _ = pair_loss(i, j, negs, params, seqs, mode, dropout_masks=masks)
        return val

    worst = 0.0
    zs = np.zeros(params.d_s)
    zw = np.zeros(params.d_w)
    for r, c in np.ndindex(params.S.shape):
        num = central_diff(loss, params.S, (r, c))
        ana = grads.s.get(r, zs)[c]
        if not grad_ok(ana, num):
            worst = max(worst, rel_err(ana, num))
    for r, c in np.ndindex(params.Ew.shape):
        num = central_diff(loss, params.Ew, (r, c))
        ana = grads.ew.get(r, zw)[c]
        if not grad_ok(ana, num):
            worst = max(worst, rel_err(ana, num))
    if mode == "wane-wc":
        for name, table in (("w1", params.W1), ("w2", params.W2)):
            g = getattr(grads, name)
            for idx in np.ndindex(table.shape):
                num = central_diff(loss, table, idx)
                ana = 0.0 if g is None else g[idx]
                if not grad_ok(ana, num):
                    worst = max(worst, rel_err(ana, num))
    return worst


def run_grad_suite(mode, align_fn, agg_fn, instances, seed, d_s_choices=(8, 12)):
    """FD-checks `instances` random problems; returns (checked, worst_err)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(instances):
        d_s = d_s_choices[t % len(d_s_choices)]
        keep = 0.7 if t % 2 else None
        k = 1 + (t % 2)
        params, seqs, i, j, negs, masks = draw_instance(
            rng, mode, align_fn, agg_fn, d_s=d_s, k=k, keep_prob=keep, scale=3.0)
        worst = max(worst, check_pair_loss_grads(params, seqs, i, j, negs, masks, mode))
    return instances, worst
