"""Stochastic training loop: edge batches, negative draws, dropout, Adam.

Gradients are summed over the batch (both directed orientations of each
sampled edge) and then scaled by 1/batch_size before a single Adam step with
lazy, touched-rows-only moment updates on the embedding tables.  With
threads=1 (the default) training is fully deterministic for a fixed seed.
"""

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict

import numpy as np

from . import model as _model
from .errors import CheckpointError, ConfigError, DataError, NumericError
from .graph import build_negative_sampler, sample_edge_batch

_ALLOWED_K = (1, 3, 5)


@dataclass
class TrainConfig:
    mode: str = "wane-ww"
    align_fn: str = "submult"
    agg_fn: str = "max"
    learning_rate: float = 1e-3
    batch_size: int = 128
    K: int = 1
    keep_prob: float = 0.5  # dropout keep probability on word embeddings
    epochs: int = 200
    plateau_window: int = 10
    plateau_rel_tol: float = 1e-4
    seed: int = 0
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    max_len: int = 300
    d_s: int = 100
    allow_any_k: bool = False
    shared_negatives: bool = True  # one negative set per (edge, step), both directions
    threads: int = 1
    deterministic: bool = True
    max_steps: int = 0  # 0 means no hard cap

    def validate(self):
        if self.mode not in _model.MODES:
            raise ConfigError("mode must be one of %r, got %r" % (_model.MODES, self.mode))
        if self.align_fn not in _model.ALIGN_FNS:
            raise ConfigError("align_fn must be one of %r, got %r"
                              % (_model.ALIGN_FNS, self.align_fn))
        if self.agg_fn not in _model.AGG_FNS:
            raise ConfigError("agg_fn must be one of %r, got %r" % (_model.AGG_FNS, self.agg_fn))
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive, got %r" % (self.learning_rate,))
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1, got %r" % (self.batch_size,))
        if self.K < 1:
            raise ConfigError("K must be >= 1, got %r" % (self.K,))
        if self.K not in _ALLOWED_K and not self.allow_any_k:
            raise ConfigError("K must be one of %r (pass allow_any_k to override), got %r"
                              % (_ALLOWED_K, self.K))
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError("keep_prob must be in (0, 1], got %r" % (self.keep_prob,))
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1, got %r" % (self.epochs,))
        if self.plateau_window < 1:
            raise ConfigError("plateau_window must be >= 1")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1, got %r" % (self.max_len,))
        if self.d_s < 1:
            raise ConfigError("d_s must be >= 1, got %r" % (self.d_s,))
        if self.mode == "wane-ww" and self.align_fn == "submult" and self.d_s % 2:
            raise ConfigError("d_s must be even for submult alignment, got %d" % self.d_s)
        if self.threads < 1:
            raise ConfigError("threads must be >= 1, got %r" % (self.threads,))
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0, got %r" % (self.max_steps,))
        for a in (self.alpha1, self.alpha2, self.alpha3):
            if a < 0:
                raise ConfigError("loss weights alpha must be non-negative, got %r" % (a,))

    def as_dict(self):
        return asdict(self)


@dataclass
class TrainLog:
    """Per-step mean batch loss; serialized as TSV `step<TAB>mean_loss`."""

    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    def add(self, step, loss):
        self.steps.append(int(step))
        self.losses.append(float(loss))

    def write_tsv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step\tmean_loss\n")
            for s, l in zip(self.steps, self.losses):
                fh.write("%d\t%.10g\n" % (s, l))

    def __len__(self):
        return len(self.steps)


class AdamState:
    """Adam moments for one table, with lazy row-wise updates.

    The step counter is per table and advances once per optimizer step; only
    rows touched by the step get moment updates, so untouched rows keep both
    their values and their moments.
    """

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, shape):
        self.m = np.zeros(shape, dtype=np.float64)
        self.v = np.zeros(shape, dtype=np.float64)
        self.t = 0

    def update_rows(self, table, rows, grad, lr):
        """Apply one Adam step to table[rows] with the given gradient rows."""
        self.t += 1
        b1c = 1.0 - self.BETA1 ** self.t
        b2c = 1.0 - self.BETA2 ** self.t
        m = self.m[rows]
        v = self.v[rows]
        m *= self.BETA1
        m += (1.0 - self.BETA1) * grad
        v *= self.BETA2
        v += (1.0 - self.BETA2) * (grad * grad)
        self.m[rows] = m
        self.v[rows] = v
        table[rows] -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.EPS)

    def update_dense(self, table, grad, lr):
        """Apply one Adam step to the whole table (dense gradient)."""
        self.t += 1
        b1c = 1.0 - self.BETA1 ** self.t
        b2c = 1.0 - self.BETA2 ** self.t
        self.m *= self.BETA1
        self.m += (1.0 - self.BETA1) * grad
        self.v *= self.BETA2
        self.v += (1.0 - self.BETA2) * (grad * grad)
        table -= lr * (self.m / b1c) / (np.sqrt(self.v / b2c) + self.EPS)


class _DenseSink:
    """Batch gradient accumulator: collects scattered rows, reduces once."""

    def __init__(self):
        self.s_ids = []
        self.s_rows = []
        self.ew_ids = []
        self.ew_rows = []
        self.gw1 = None
        self.gw2 = None

    def add_s(self, vid, g):
        self.s_ids.append(vid)
        self.s_rows.append(g)

    def add_ew(self, ids, rows):
        self.ew_ids.append(ids)
        self.ew_rows.append(rows)

    def add_w1(self, g):
        self.gw1 = g.copy() if self.gw1 is None else self.gw1 + g

    def add_w2(self, g):
        self.gw2 = g.copy() if self.gw2 is None else self.gw2 + g

    def merge_dict(self, other):
        """Fold a _DictSink (one edge's gradients) into this batch sink."""
        for vid, g in other.s.items():
            self.add_s(vid, g)
        for tid, g in other.ew.items():
            self.ew_ids.append(np.array([tid], dtype=np.int64))
            self.ew_rows.append(g[None, :])
        if other.w1 is not None:
            self.add_w1(other.w1)
            self.add_w2(other.w2)

    def apply(self, params, adam_s, adam_ew, adam_w1, adam_w2, lr, scale):
        if self.s_ids:
            ids = np.asarray(self.s_ids, dtype=np.int64)
            rows = np.stack(self.s_rows)
            uniq, inv = np.unique(ids, return_inverse=True)
            acc = np.zeros((uniq.size, rows.shape[1]))
            np.add.at(acc, inv, rows)
            acc *= scale
            adam_s.update_rows(params.S, uniq, acc, lr)
        if self.ew_ids:
            ids = np.concatenate(self.ew_ids)
            rows = np.concatenate(self.ew_rows, axis=0)
            uniq, inv = np.unique(ids, return_inverse=True)
            acc = np.zeros((uniq.size, rows.shape[1]))
            np.add.at(acc, inv, rows)
            acc *= scale
            adam_ew.update_rows(params.Ew, uniq, acc, lr)
        if self.gw1 is not None:
            adam_w1.update_dense(params.W1, self.gw1 * scale, lr)
            adam_w2.update_dense(params.W2, self.gw2 * scale, lr)


def _draw_negatives(sampler, rng, k, u, v):
    """K noise vertices, redrawing any that collide with the positive pair."""
    out = []
    draws = sampler.sample(rng, size=k)
    for n in draws:
        n = int(n)
        while n == u or n == v:
            n = int(sampler.sample(rng))
        out.append(n)
    return out


def train(config, graph, corpus):
    """Train a model on the given (train) graph and its corpus.

    corpus is the (vocabulary, sequences) pair from build_corpus; the
    sequences must cover exactly the graph's vertex set.  Returns
    (ModelParams, TrainLog).
    """
    config.validate()
    vocab, sequences = corpus
    if len(sequences) != graph.num_vertices:
        raise ConfigError("graph has %d vertices but corpus has %d sequences"
                          % (graph.num_vertices, len(sequences)))
    for v, seq in enumerate(sequences):
        if seq.vertex_id != v:
            raise ConfigError("corpus sequences must be ordered by vertex id")
    if not graph.edges:
        raise DataError("cannot train on a graph with no edges")

    ss = np.random.SeedSequence(config.seed)
    init_rng, edge_rng, neg_rng, drop_rng = (np.random.default_rng(s) for s in ss.spawn(4))

    alpha = (config.alpha1, config.alpha2, config.alpha3)
    params = _model.ModelParams.initialize(
        graph.num_vertices, len(vocab), config.mode, align_fn=config.align_fn,
        agg_fn=config.agg_fn, d_s=config.d_s, alpha=alpha, rng=init_rng)
    sampler = build_negative_sampler(graph)

    adam_s = AdamState(params.S.shape)
    adam_ew = AdamState(params.Ew.shape)
    adam_w1 = AdamState(params.W1.shape)
    adam_w2 = AdamState(params.W2.shape)

    use_text = any(a != 0.0 for a in alpha)
    use_dropout = use_text and config.keep_prob < 1.0
    steps_per_epoch = max(1, math.ceil(len(graph.edges) / config.batch_size))
    scale = 1.0 / config.batch_size

    log = TrainLog()
    epoch_means = []
    step = 0
    capped = False
    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for _epoch in range(config.epochs):
            epoch_losses = []
            for _ in range(steps_per_epoch):
                batch = sample_edge_batch(graph, config.batch_size, edge_rng)
                jobs = []
                for (u, v, w) in batch:
                    negs = _draw_negatives(sampler, neg_rng, config.K, u, v)
                    negs2 = negs if config.shared_negatives else \
                        _draw_negatives(sampler, neg_rng, config.K, u, v)
                    masks = None
                    if use_dropout:
                        masks = {}
                        for vid in dict.fromkeys((u, v, *negs, *negs2)):
                            masks[vid] = _model.make_dropout_mask(
                                drop_rng, (params.d_w, sequences[vid].length),
                                config.keep_prob)
                    jobs.append((u, v, w, negs, negs2, masks))

                sink = _DenseSink()
                total = 0.0
                if executor is None:
                    for (u, v, w, negs, negs2, masks) in jobs:
                        total += _model.edge_loss(u, v, w, negs, negs2, params,
                                                  sequences, config.mode, masks, sink)
                else:
                    def run_edge(job):
                        u, v, w, negs, negs2, masks = job
                        edge_sink = _model._DictSink()
                        loss = _model.edge_loss(u, v, w, negs, negs2, params,
                                                sequences, config.mode, masks, edge_sink)
                        return loss, edge_sink
                    if config.deterministic:
                        results = list(executor.map(run_edge, jobs))
                    else:
                        futures = [executor.submit(run_edge, job) for job in jobs]
                        results = [f.result() for f in as_completed(futures)]
                    for loss, edge_sink in results:
                        total += loss
                        sink.merge_dict(edge_sink)

                if not np.isfinite(total):
                    raise NumericError(
                        "non-finite batch loss %r at step %d (lr=%g, mode=%s)"
                        % (total, step, config.learning_rate, config.mode))
                mean_loss = total * scale
                sink.apply(params, adam_s, adam_ew, adam_w1, adam_w2,
                           config.learning_rate, scale)
                log.add(step, mean_loss)
                epoch_losses.append(mean_loss)
                step += 1
                if config.max_steps and step >= config.max_steps:
                    capped = True
                    break
            epoch_means.append(float(np.mean(epoch_losses)))
            if capped:
                break
            # plateau: window-averaged means, compared one window apart
            w = config.plateau_window
            if len(epoch_means) >= 2 * w:
                old = float(np.mean(epoch_means[-2 * w:-w]))
                new = float(np.mean(epoch_means[-w:]))
                if old - new <= config.plateau_rel_tol * abs(old):
                    break
    finally:
        if executor is not None:
            executor.shutdown()
    return params, log


# ---------------------------------------------------------------------------
# checkpoint format: magic, version, JSON header, little-endian f8 tables,
# trailing sha256 over everything before it

_MAGIC = b"WANECKPT"
_VERSION = 1
_TABLE_ORDER = ("S", "Ew", "W1", "W2")


def save_checkpoint(params, path, config_echo=None):
    """Write a bit-exact snapshot of the parameter tables plus a config echo."""
    header = {
        "align_fn": params.align_fn,
        "agg_fn": params.agg_fn,
        "alpha": list(params.alpha),
        "shapes": {name: list(getattr(params, name).shape) for name in _TABLE_ORDER},
        "config": dict(config_echo or {}),
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", _VERSION)
    blob += struct.pack("<I", len(hbytes))
    blob += hbytes
    for name in _TABLE_ORDER:
        blob += np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path):
    """Read a checkpoint; returns (ModelParams, config echo dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(_MAGIC) + 8 + 32:
        raise CheckpointError("%s: truncated checkpoint" % path)
    if data[:8] != _MAGIC:
        raise CheckpointError("%s: bad magic bytes; not a checkpoint file" % path)
    version = struct.unpack("<I", data[8:12])[0]
    if version != _VERSION:
        raise CheckpointError("%s: unsupported checkpoint version %d (expected %d)"
                              % (path, version, _VERSION))
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise CheckpointError("%s: checksum mismatch (corrupt or truncated file)" % path)
    hlen = struct.unpack("<I", data[12:16])[0]
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError("%s: unreadable header (%s)" % (path, exc)) from None
    offset = 16 + hlen
    tables = {}
    for name in _TABLE_ORDER:
        shape = header["shapes"][name]
        nbytes = int(shape[0]) * int(shape[1]) * 8
        raw = data[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise CheckpointError("%s: table %s truncated" % (path, name))
        tables[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(data) - 32:
        raise CheckpointError("%s: trailing bytes do not match the declared shapes" % path)
    params = _model.ModelParams(tables["S"], tables["Ew"], tables["W1"], tables["W2"],
                                alpha=tuple(header["alpha"]),
                                align_fn=header["align_fn"], agg_fn=header["agg_fn"])
    return params, header.get("config", {})
