"""Parameter tables, the three text encoders, and the pairwise objective.

Modes:
  wane      plain average of word embeddings (text of the partner is ignored)
  wane-wc   word-by-context attention: words of one sequence are scored
            against the summed context vector of the partner sequence
  wane-ww   word-by-word alignment: a column-softmaxed affinity matrix pairs
            each word with an attention-weighted counterpart, and an
            elementwise comparison (sub / mult / submult) is pooled (max/mean)

Each directed pair (i | j) contributes a negative-sampled loss

    -w_ij * [ l(hs_i|hs_j) + a1*l(ht_i|ht_j) + a2*l(ht_i|hs_j) + a3*l(hs_i|ht_j) ]

with l(a|b) = log sigma(b.a) + sum_k log sigma(-b.n_k), where the K noise
vertices n_k contribute an embedding of the same kind as `a`, and noise
textual embeddings are encoded context-aware against the conditioning text
t_j.  All gradients are hand-derived and finite-difference checked.
"""

from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .errors import ConfigError

MODES = ("wane", "wane-wc", "wane-ww")
ALIGN_FNS = ("sub", "mult", "submult")
AGG_FNS = ("max", "mean")


class ModelParams:
    """Trainable state: structural table S, word table Ew, attention W1/W2."""

    def __init__(self, S, Ew, W1, W2, alpha=(1.0, 1.0, 1.0),
                 align_fn="submult", agg_fn="max"):
        if align_fn not in ALIGN_FNS:
            raise ConfigError("align_fn must be one of %r, got %r" % (ALIGN_FNS, align_fn))
        if agg_fn not in AGG_FNS:
            raise ConfigError("agg_fn must be one of %r, got %r" % (AGG_FNS, agg_fn))
        self.S = np.ascontiguousarray(S, dtype=np.float64)
        self.Ew = np.ascontiguousarray(Ew, dtype=np.float64)
        self.W1 = np.ascontiguousarray(W1, dtype=np.float64)
        self.W2 = np.ascontiguousarray(W2, dtype=np.float64)
        if len(alpha) != 3:
            raise ConfigError("alpha must have three entries")
        self.alpha = tuple(float(a) for a in alpha)
        self.align_fn = align_fn
        self.agg_fn = agg_fn

    @property
    def num_vertices(self):
        return self.S.shape[0]

    @property
    def d_s(self):
        return self.S.shape[1]

    @property
    def vocab_size(self):
        return self.Ew.shape[0]

    @property
    def d_w(self):
        return self.Ew.shape[1]

    def text_dim(self, mode):
        """Dimension of the textual embedding under the given mode."""
        if mode == "wane-ww" and self.align_fn == "submult":
            return 2 * self.d_w
        return self.d_w

    @classmethod
    def initialize(cls, num_vertices, vocab_size, mode, align_fn="submult",
                   agg_fn="max", d_s=100, alpha=(1.0, 1.0, 1.0), rng=None, seed=0):
        """Uniform init in [-0.5/sqrt(dim), +0.5/sqrt(dim)] per table.

        The word dimension is d_s/2 under wane-ww with submult alignment
        (concatenated sub and mult halves must match the structural dimension)
        and d_s otherwise.
        """
        if mode not in MODES:
            raise ConfigError("mode must be one of %r, got %r" % (MODES, mode))
        if num_vertices < 1 or vocab_size < 1:
            raise ConfigError("need at least one vertex and one vocabulary entry")
        if rng is None:
            rng = np.random.default_rng(seed)
        if mode == "wane-ww" and align_fn == "submult":
            if d_s % 2:
                raise ConfigError("d_s must be even for submult alignment, got %d" % d_s)
            d_w = d_s // 2
        else:
            d_w = d_s

        def uniform(shape, dim):
            b = 0.5 / np.sqrt(dim)
            return rng.uniform(-b, b, size=shape)

        S = uniform((num_vertices, d_s), d_s)
        Ew = uniform((vocab_size, d_w), d_w)
        W1 = uniform((d_w, d_w), d_w)
        W2 = uniform((d_w, d_w), d_w)
        return cls(S, Ew, W1, W2, alpha=alpha, align_fn=align_fn, agg_fn=agg_fn)

    def copy(self):
        return ModelParams(self.S.copy(), self.Ew.copy(), self.W1.copy(), self.W2.copy(),
                           alpha=self.alpha, align_fn=self.align_fn, agg_fn=self.agg_fn)


def check_mode_dims(params, mode):
    """The joint loss pairs textual against structural vectors, so the text
    dimension must equal d_s under every mode."""
    if mode not in MODES:
        raise ConfigError("mode must be one of %r, got %r" % (MODES, mode))
    dt = params.text_dim(mode)
    if dt != params.d_s:
        raise ConfigError(
            "text dim %d != structural dim %d under mode %s / align %s"
            % (dt, params.d_s, mode, params.align_fn))


@dataclass
class MatchingFeatures:
    """Per-word alignment features of a directed text pair (wane-ww).

    matching: d_t x M_a matrix, one column per word of the embedded sequence.
    norms: euclidean norm of each matching vector.
    attention: the column-softmaxed affinity matrix (M_b x M_a).
    """

    matching: np.ndarray
    norms: np.ndarray
    attention: np.ndarray


@dataclass
class PairEmbedding:
    """Context-aware embeddings of both endpoints of one pair."""

    h_s_i: np.ndarray
    h_s_j: np.ndarray
    h_t_i: np.ndarray
    h_t_j: np.ndarray
    h_i: np.ndarray
    h_j: np.ndarray


@dataclass
class PairGradients:
    """Gradients of pair_loss for every touched parameter row."""

    s: dict
    ew: dict
    w1: np.ndarray = None
    w2: np.ndarray = None


# ---------------------------------------------------------------------------
# encoder forwards/backwards on embedded matrices (d_w x M, one column a word)

def _avg_forward(Xa):
    m = Xa.shape[1]
    w = np.full(m, 1.0 / m)
    # matmul keeps this reduction identical to the zero-attention wc case
    return Xa @ w, m


def _avg_backward(gh, m):
    return np.outer(gh, np.full(m, 1.0 / m))


def _wc_forward(Xa, Xb, W1, W2):
    cb = Xb.sum(axis=1)
    u = W1 @ cb
    t = nk.tanh(u[:, None] + W2 @ Xa)
    logits = t.sum(axis=0)  # scalar attention score per word of seq_a
    z = logits - logits.max()
    e = np.exp(z)
    att = e / e.sum()
    h = Xa @ att
    return h, (Xa, Xb.shape[1], cb, t, att, W1, W2)


def _wc_backward(gh, cache):
    Xa, mb, cb, t, att, W1, W2 = cache
    ga = Xa.T @ gh
    gXa = np.outer(gh, att)
    gl = att * (ga - ga @ att)
    gpre = nk.tanh_backward(gl[None, :], t)
    gW2 = gpre @ Xa.T
    gXa += W2.T @ gpre
    gu = gpre.sum(axis=1)
    gW1 = np.outer(gu, cb)
    gcb = W1.T @ gu
    gXb = np.repeat(gcb[:, None], mb, axis=1)
    return gXa, gXb, gW1, gW2


def _ww_forward(Xa, Xb, align_fn, agg_fn, A=None):
    if A is None:
        A = Xb.T @ Xa  # affinity: one row per partner word
    S = nk.col_softmax(A)
    Xt = Xb @ S  # attention-weighted counterpart for each word of seq_a
    if align_fn == "sub":
        Mv = Xa - Xt
    elif align_fn == "mult":
        Mv = Xa * Xt
    else:
        Mv = np.concatenate([Xa - Xt, Xa * Xt], axis=0)
    if agg_fn == "max":
        h, idx = nk.maxpool_cols(Mv)
    else:
        h = nk.meanpool_cols(Mv)
        idx = None
    return h, (Xa, Xb, S, Xt, Mv, idx, align_fn, agg_fn)


def _ww_backward(gh, cache):
    Xa, Xb, S, Xt, Mv, idx, align_fn, agg_fn = cache
    d, ma = Xa.shape
    if agg_fn == "max":
        gM = nk.maxpool_cols_backward(gh, idx, Mv.shape)
    else:
        gM = nk.meanpool_cols_backward(gh, ma)
    if align_fn == "sub":
        gXa = gM.copy()
        gXt = -gM
    elif align_fn == "mult":
        gXa = gM * Xt
        gXt = gM * Xa
    else:
        gs = gM[:d]
        gm = gM[d:]
        gXa = gs + gm * Xt
        gXt = -gs + gm * Xa
    gXb = gXt @ S.T
    gS = Xb.T @ gXt
    gA = nk.col_softmax_backward(gS, S)
    gXa += Xb @ gA
    gXb += Xa @ gA.T
    return gXa, gXb


# ---------------------------------------------------------------------------
# public encoder ops on token sequences (no dropout; used by eval and tests)

def _seq_matrix(seq, params, mask=None):
    if seq.length < 1:
        raise ConfigError("empty sequence for vertex %d" % seq.vertex_id)
    X = params.Ew[seq.token_ids].T
    if mask is not None:
        X = X * mask
    return X


def text_embed_avg(seq, params):
    """Plain average of the sequence's word embeddings."""
    h, _ = _avg_forward(_seq_matrix(seq, params))
    return h


def text_embed_wc(seq_a, seq_b, params):
    """Word-by-context attention-weighted average of seq_a against seq_b.

    With W1 = W2 = 0 the attention is uniform and the result equals
    text_embed_avg exactly.
    """
    h, _ = _wc_forward(_seq_matrix(seq_a, params), _seq_matrix(seq_b, params),
                       params.W1, params.W2)
    return h


def _canonical_cols(seq):
    # matching is order-free; running it in a canonical column order makes
    # h bit-reproducible under any reordering of the input words
    return np.argsort(seq.token_ids, kind="stable")


def _unsort_cols(gs, order):
    g = np.empty_like(gs)
    g[:, order] = gs
    return g


def text_embed_ww(seq_a, seq_b, params):
    """Word-by-word alignment embedding of seq_a against seq_b.

    Returns (h_a, MatchingFeatures); the matching features carry the per-word
    alignment vectors, their norms, and the attention matrix for inspection,
    all indexed by the original word positions.
    """
    oa = _canonical_cols(seq_a)
    ob = _canonical_cols(seq_b)
    h, cache = _ww_forward(_seq_matrix(seq_a, params)[:, oa],
                           _seq_matrix(seq_b, params)[:, ob],
                           params.align_fn, params.agg_fn)
    Mv_s, S_s = cache[4], cache[2]
    norms_s = np.linalg.norm(Mv_s, axis=0)
    norms = np.empty_like(norms_s)
    norms[oa] = norms_s
    attention = np.empty_like(S_s)
    attention[np.ix_(ob, oa)] = S_s
    feats = MatchingFeatures(matching=_unsort_cols(Mv_s, oa), norms=norms,
                             attention=attention)
    return h, feats


def pair_embeddings(i, j, params, sequences, mode):
    """Context-aware embeddings h = [h_s; h_t] for both endpoints of (i, j).

    Computed in canonical endpoint order with a single affinity matrix under
    wane-ww, so the construction is symmetric: swapping i and j returns the
    same vectors.
    """
    check_mode_dims(params, mode)
    n = params.num_vertices
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigError("vertex ids (%r, %r) out of range [0, %d)" % (i, j, n))
    a, b = (i, j) if i <= j else (j, i)
    if mode == "wane":
        ht_a = text_embed_avg(sequences[a], params)
        ht_b = ht_a if a == b else text_embed_avg(sequences[b], params)
    elif mode == "wane-wc":
        ht_a = text_embed_wc(sequences[a], sequences[b], params)
        ht_b = text_embed_wc(sequences[b], sequences[a], params)
    else:
        Xa = _seq_matrix(sequences[a], params)[:, _canonical_cols(sequences[a])]
        Xb = _seq_matrix(sequences[b], params)[:, _canonical_cols(sequences[b])]
        A = Xb.T @ Xa
        ht_a, _ = _ww_forward(Xa, Xb, params.align_fn, params.agg_fn, A=A)
        ht_b, _ = _ww_forward(Xb, Xa, params.align_fn, params.agg_fn, A=A.T)
    ht_i, ht_j = (ht_a, ht_b) if a == i else (ht_b, ht_a)
    h_i = np.concatenate([params.S[i], ht_i])
    h_j = np.concatenate([params.S[j], ht_j])
    return PairEmbedding(h_s_i=params.S[i], h_s_j=params.S[j],
                         h_t_i=ht_i, h_t_j=ht_j, h_i=h_i, h_j=h_j)


def softmax_conditional(i, j, table):
    """Exact conditional probability of row i given row j over the full table.

    Test oracle only; the training loss replaces this softmax with negative
    sampling.
    """
    t = np.asarray(table, dtype=np.float64)
    logits = t @ t[j]
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    return float(p[i])


def make_dropout_mask(rng, shape, keep_prob):
    """Inverted-dropout multiplier matrix with entries 0 or 1/keep_prob."""
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError("keep_prob must be in (0, 1], got %r" % (keep_prob,))
    return (rng.random(shape) < keep_prob).astype(np.float64) / keep_prob


# ---------------------------------------------------------------------------
# the negative-sampled pairwise objective

class _DictSink:
    """Accumulates gradients into per-row dictionaries (PairGradients form)."""

    def __init__(self):
        self.s = {}
        self.ew = {}
        self.w1 = None
        self.w2 = None

    def add_s(self, vid, g):
        prev = self.s.get(vid)
        self.s[vid] = g.copy() if prev is None else prev + g

    def add_ew(self, ids, rows):
        for tid, row in zip(ids, rows):
            tid = int(tid)
            prev = self.ew.get(tid)
            self.ew[tid] = row.copy() if prev is None else prev + row

    def add_w1(self, g):
        self.w1 = g.copy() if self.w1 is None else self.w1 + g

    def add_w2(self, g):
        self.w2 = g.copy() if self.w2 is None else self.w2 + g


class _EncodeStore:
    """Caches textual encodes within one edge evaluation.

    Each distinct (target, context) pair is encoded forward once; upstream
    gradients from every loss term that consumed it accumulate on the entry
    and the backward pass runs once per entry.
    """

    def __init__(self, params, sequences, mode, masks=None):
        self.params = params
        self.sequences = sequences
        self.mode = mode
        self.masks = masks or {}
        self._X = {}
        self._ord = {}
        self._enc = {}

    def seq_matrix(self, vid):
        X = self._X.get(vid)
        if X is None:
            X = _seq_matrix(self.sequences[vid], self.params, self.masks.get(vid))
            self._X[vid] = X
        return X

    def order(self, vid):
        o = self._ord.get(vid)
        if o is None:
            o = _canonical_cols(self.sequences[vid])
            self._ord[vid] = o
        return o

    def entry(self, a, b):
        """Returns [h, cache, gh_accum, a, b] for the encode of a against b."""
        key = (a, -1) if self.mode == "wane" else (a, b)
        ent = self._enc.get(key)
        if ent is None:
            Xa = self.seq_matrix(a)
            if self.mode == "wane":
                h, cache = _avg_forward(Xa)
            elif self.mode == "wane-wc":
                h, cache = _wc_forward(Xa, self.seq_matrix(b), self.params.W1, self.params.W2)
            else:
                h, cache = _ww_forward(Xa[:, self.order(a)],
                                       self.seq_matrix(b)[:, self.order(b)],
                                       self.params.align_fn, self.params.agg_fn)
            ent = [h, cache, np.zeros_like(h), a, b]
            self._enc[key] = ent
        return ent

    def backprop(self, factor, sink):
        """Scale accumulated encode gradients by factor, run backwards, and
        scatter word-embedding (and W1/W2) gradients into the sink."""
        gX_by_vid = {}

        def acc(vid, gX):
            prev = gX_by_vid.get(vid)
            if prev is None:
                gX_by_vid[vid] = gX
            else:
                prev += gX

        gw1 = None
        gw2 = None
        for h, cache, gh, a, b in self._enc.values():
            if not gh.any():
                continue
            g = gh * factor
            if self.mode == "wane":
                acc(a, _avg_backward(g, cache))
            elif self.mode == "wane-wc":
                gXa, gXb, gW1, gW2 = _wc_backward(g, cache)
                acc(a, gXa)
                acc(b, gXb)
                gw1 = gW1 if gw1 is None else gw1 + gW1
                gw2 = gW2 if gw2 is None else gw2 + gW2
            else:
                gXa, gXb = _ww_backward(g, cache)
                acc(a, _unsort_cols(gXa, self.order(a)))
                acc(b, _unsort_cols(gXb, self.order(b)))
        for vid, gX in gX_by_vid.items():
            mask = self.masks.get(vid)
            if mask is not None:
                gX = gX * mask
            sink.add_ew(self.sequences[vid].token_ids, gX.T)
        if gw1 is not None:
            sink.add_w1(gw1)
            sink.add_w2(gw2)


def _nsll(a_vec, b_vec, neg_vecs, f):
    """f * [log sigma(b.a) + sum_k log sigma(-b.n_k)] and its gradients.

    Returns (value, grad_a, grad_b, [grad_n_k]) for the +log-likelihood; the
    caller applies the overall -w_ij factor.
    """
    x = float(b_vec @ a_vec)
    ll = nk.log_sigmoid(x)
    s = nk.sigmoid(-x)
    ga = (f * s) * b_vec
    gb = (f * s) * a_vec
    gns = []
    for n_vec in neg_vecs:
        xn = float(b_vec @ n_vec)
        ll += nk.log_sigmoid(-xn)
        sn = nk.sigmoid(xn)
        gns.append((-f * sn) * b_vec)
        gb -= (f * sn) * n_vec
    return f * ll, ga, gb, gns


def _directed_ll(i, j, negatives, params, store, s_grads):
    """Raw alpha-weighted log-likelihood of direction (i | j).

    Structural gradients accumulate into s_grads; textual gradients accumulate
    on the store's encode entries.  Everything is later scaled by -w_ij.
    """
    a1, a2, a3 = params.alpha
    S = params.S

    def add_s(vid, g):
        prev = s_grads.get(vid)
        if prev is None:
            s_grads[vid] = g
        else:
            prev += g

    # structure | structure, weight 1
    ll_total, ga, gb, gns = _nsll(S[i], S[j], [S[n] for n in negatives], 1.0)
    add_s(i, ga)
    add_s(j, gb)
    for n, gn in zip(negatives, gns):
        add_s(n, gn)

    ent_ij = store.entry(i, j) if (a1 or a2) else None
    ent_ji = store.entry(j, i) if (a1 or a3) else None
    neg_ents = [store.entry(n, j) for n in negatives] if (a1 or a2) else None

    if a1:
        ll, ga, gb, gns = _nsll(ent_ij[0], ent_ji[0], [e[0] for e in neg_ents], a1)
        ll_total += ll
        ent_ij[2] += ga
        ent_ji[2] += gb
        for e, gn in zip(neg_ents, gns):
            e[2] += gn
    if a2:
        ll, ga, gb, gns = _nsll(ent_ij[0], S[j], [e[0] for e in neg_ents], a2)
        ll_total += ll
        ent_ij[2] += ga
        add_s(j, gb)
        for e, gn in zip(neg_ents, gns):
            e[2] += gn
    if a3:
        ll, ga, gb, gns = _nsll(S[i], ent_ji[0], [S[n] for n in negatives], a3)
        ll_total += ll
        add_s(i, ga)
        ent_ji[2] += gb
        for n, gn in zip(negatives, gns):
            add_s(n, gn)
    return ll_total


def _finalize(store, s_grads, factor, sink):
    for vid, g in s_grads.items():
        sink.add_s(int(vid), g * factor)
    store.backprop(factor, sink)


def _check_pair_args(i, j, negatives, params, mode):
    check_mode_dims(params, mode)
    n = params.num_vertices
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigError("vertex ids (%r, %r) out of range [0, %d)" % (i, j, n))
    if i == j:
        raise ConfigError("pair_loss needs two distinct vertices, got %d twice" % i)
    if len(negatives) < 1:
        raise ConfigError("at least one negative sample is required (K >= 1)")
    for nv in negatives:
        if nv == i or nv == j:
            raise ConfigError(
                "negative %d collides with the positive pair (%d, %d); resample upstream"
                % (nv, i, j))
        if not 0 <= nv < n:
            raise ConfigError("negative id %r out of range [0, %d)" % (nv, n))


def pair_loss(i, j, negatives, params, sequences, mode,
              dropout_masks=None, weight=1.0):
    """Negative-sampled joint loss of the directed pair (i | j) plus gradients.

    With all parameters zero, K = 1, unit alpha and weight, each of the four
    terms contributes 2*log(2), so the loss is 8*log(2).

    dropout_masks, when given, maps vertex id to an inverted-dropout
    multiplier matrix matching that vertex's embedded sequence; one mask per
    sequence per loss evaluation keeps the evaluation deterministic given the
    masks.
    """
    i = int(i)
    j = int(j)
    negatives = [int(n) for n in negatives]
    _check_pair_args(i, j, negatives, params, mode)
    store = _EncodeStore(params, sequences, mode, dropout_masks)
    s_grads = {}
    ll = _directed_ll(i, j, negatives, params, store, s_grads)
    sink = _DictSink()
    _finalize(store, s_grads, -float(weight), sink)
    loss = -float(weight) * ll
    return loss, PairGradients(s=sink.s, ew=sink.ew, w1=sink.w1, w2=sink.w2)


def edge_loss(u, v, w, negs_uv, negs_vu, params, sequences, mode, masks, sink):
    """Both directed losses of one undirected edge, sharing textual encodes.

    Gradients are scaled by -w and scattered into the sink.  Returns the edge
    loss value (sum of the two directed terms).
    """
    u = int(u)
    v = int(v)
    _check_pair_args(u, v, negs_uv, params, mode)
    _check_pair_args(v, u, negs_vu, params, mode)
    store = _EncodeStore(params, sequences, mode, masks)
    s_grads = {}
    ll = _directed_ll(u, v, negs_uv, params, store, s_grads)
    ll += _directed_ll(v, u, negs_vu, params, store, s_grads)
    _finalize(store, s_grads, -float(w), sink)
    return -float(w) * ll
