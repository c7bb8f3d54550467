"""Undirected weighted graph: loading, validation, edge splits, samplers.

Edge-list files are UTF-8, one edge per line, `src<TAB>dst[<TAB>weight]`;
lines starting with `#` are comments.  Graphs are immutable after
construction and safe for concurrent reads; samplers take an explicit
generator so callers owning distinct generators can sample in parallel.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, GraphFormatError

# ids outside this range are treated as corrupt input, not a big graph
_MAX_VERTEX_ID = 2**31 - 1


class Graph:
    """Undirected weighted graph over vertex ids 0..num_vertices-1.

    Edges are stored canonically as (u, v, w) with u < v.  `degrees[v]` is the
    sum of weights incident to v, so sum(degrees) == 2 * total edge weight.
    """

    def __init__(self, num_vertices, edges):
        n = int(num_vertices)
        if n < 0:
            raise GraphFormatError("negative vertex count")
        canon = []
        seen = set()
        for (u, v, w) in edges:
            u = int(u)
            v = int(v)
            w = float(w)
            if u < 0 or v < 0 or u >= n or v >= n:
                raise GraphFormatError("edge (%d, %d) outside vertex range [0, %d)" % (u, v, n))
            if u == v:
                raise GraphFormatError("self-loop at vertex %d" % u)
            if not np.isfinite(w) or w <= 0.0:
                raise GraphFormatError("edge (%d, %d) has non-positive weight %r" % (u, v, w))
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise GraphFormatError("duplicate undirected edge (%d, %d)" % key)
            seen.add(key)
            canon.append((key[0], key[1], w))
        self.num_vertices = n
        self.edges = canon
        self.edge_set = seen
        self.adjacency = [[] for _ in range(n)]
        self.degrees = np.zeros(n, dtype=np.float64)
        self._weights = {}
        for (u, v, w) in canon:
            self.adjacency[u].append(v)
            self.adjacency[v].append(u)
            self.degrees[u] += w
            self.degrees[v] += w
            self._weights[(u, v)] = w
        self._edge_alias = None

    def has_edge(self, u, v):
        key = (u, v) if u < v else (v, u)
        return key in self.edge_set

    def weight(self, u, v):
        key = (u, v) if u < v else (v, u)
        return self._weights[key]

    def neighbors(self, v):
        return self.adjacency[v]

    def __repr__(self):
        return "Graph(num_vertices=%d, num_edges=%d)" % (self.num_vertices, len(self.edges))


@dataclass
class EdgeSplit:
    """A train/test partition of a graph's edges.

    The train graph keeps all vertices even if the split isolates some of
    them.  test_neg pairs are absent from the FULL edge set.
    """

    train: Graph
    test_pos: list
    test_neg: list
    ratio: float
    seed: int


def load_graph(path):
    """Parse an edge-list file into a validated Graph.

    Vertex count is max id + 1; a missing weight field defaults to 1.0.
    Raises GraphFormatError with the offending line number on bad input.
    """
    edges = []
    seen = set()
    max_id = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    "%s:%d: expected 'src<TAB>dst[<TAB>weight]', got %r" % (path, lineno, line))
            try:
                u = int(parts[0])
                v = int(parts[1])
            except ValueError:
                raise GraphFormatError(
                    "%s:%d: vertex ids must be integers, got %r" % (path, lineno, line)) from None
            if u < 0 or v < 0:
                raise GraphFormatError("%s:%d: negative vertex id" % (path, lineno))
            if u > _MAX_VERTEX_ID or v > _MAX_VERTEX_ID:
                raise GraphFormatError("%s:%d: vertex id overflow" % (path, lineno))
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(
                        "%s:%d: weight must be a number, got %r" % (path, lineno, parts[2])) from None
            if not np.isfinite(w) or w <= 0.0:
                raise GraphFormatError(
                    "%s:%d: weight must be positive and finite, got %r" % (path, lineno, w))
            if u == v:
                raise GraphFormatError("%s:%d: self-loop at vertex %d" % (path, lineno, u))
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise GraphFormatError(
                    "%s:%d: duplicate undirected edge (%d, %d)" % (path, lineno, key[0], key[1]))
            seen.add(key)
            edges.append((key[0], key[1], w))
            if u > max_id:
                max_id = u
            if v > max_id:
                max_id = v
    return Graph(max_id + 1, edges)


def split_edges(g, ratio, seed):
    """Deterministically split edges into train / test_pos and sample test_neg.

    round(ratio * |E|) edges go to the train graph (which keeps all vertices);
    the rest become test_pos.  test_neg has the same size as test_pos and is
    sampled uniformly over non-edges of the FULL graph by rejection.
    """
    if not 0.0 < float(ratio) <= 1.0:
        raise ConfigError("split ratio must be in (0, 1], got %r" % (ratio,))
    rng = np.random.default_rng(seed)
    n_edges = len(g.edges)
    n_train = int(round(float(ratio) * n_edges))
    order = rng.permutation(n_edges)
    train_edges = [g.edges[k] for k in order[:n_train]]
    test_pos = [(g.edges[k][0], g.edges[k][1]) for k in order[n_train:]]
    n_neg = len(test_pos)

    n = g.num_vertices
    total_pairs = n * (n - 1) // 2
    if n_neg > total_pairs - n_edges:
        raise DataError(
            "not enough non-edges to sample %d negative test pairs" % n_neg)

    neg = []
    chosen = set()
    attempts = 0
    attempt_cap = 200 * max(n_neg, 1) + 1000
    while len(neg) < n_neg and attempts < attempt_cap:
        attempts += 1
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        if key in g.edge_set or key in chosen:
            continue
        chosen.add(key)
        neg.append(key)
    if len(neg) < n_neg:
        # dense corner case: fall back to explicit enumeration, still seeded
        pool = [(u, v) for u in range(n) for v in range(u + 1, n)
                if (u, v) not in g.edge_set and (u, v) not in chosen]
        pick = rng.choice(len(pool), size=n_neg - len(neg), replace=False)
        neg.extend(pool[int(i)] for i in pick)

    train = Graph(g.num_vertices, train_edges)
    return EdgeSplit(train=train, test_pos=test_pos, test_neg=neg,
                     ratio=float(ratio), seed=int(seed))


def write_split(split, path):
    """Serialize an EdgeSplit to a TSV file; returns the file's sha256 hex."""
    lines = ["# edge split v1"]
    lines.append("#meta\tratio\t%r" % split.ratio)
    lines.append("#meta\tseed\t%d" % split.seed)
    lines.append("#meta\tnum_vertices\t%d" % split.train.num_vertices)
    for (u, v, w) in split.train.edges:
        lines.append("train\t%d\t%d\t%r" % (u, v, w))
    for (u, v) in split.test_pos:
        lines.append("test_pos\t%d\t%d" % (u, v))
    for (u, v) in split.test_neg:
        lines.append("test_neg\t%d\t%d" % (u, v))
    blob = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(blob)
    return hashlib.sha256(blob).hexdigest()


def read_split(path):
    """Parse a split file written by write_split."""
    meta = {}
    train_edges = []
    test_pos = []
    test_neg = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#meta\t"):
                _, key, val = line.split("\t", 2)
                meta[key] = val
                continue
            if line.startswith("#"):
                continue
            parts = line.split("\t")
            tag = parts[0]
            if tag == "train" and len(parts) == 4:
                train_edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif tag == "test_pos" and len(parts) == 3:
                test_pos.append((int(parts[1]), int(parts[2])))
            elif tag == "test_neg" and len(parts) == 3:
                test_neg.append((int(parts[1]), int(parts[2])))
            else:
                raise GraphFormatError("%s:%d: unrecognized split row %r" % (path, lineno, line))
    for key in ("ratio", "seed", "num_vertices"):
        if key not in meta:
            raise GraphFormatError("%s: missing split metadata %r" % (path, key))
    train = Graph(int(meta["num_vertices"]), train_edges)
    return EdgeSplit(train=train, test_pos=test_pos, test_neg=test_neg,
                     ratio=float(meta["ratio"]), seed=int(meta["seed"]))


def file_digest(path):
    """sha256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class AliasTable:
    """O(1) sampling from a fixed discrete distribution (Vose's method)."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("alias table needs a non-empty 1-d weight vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("alias table weights must be finite and non-negative")
        total = w.sum()
        if total <= 0.0:
            raise DataError("alias table: all weights are zero")
        self.n = int(w.size)
        self.probabilities = w / total
        scaled = self.probabilities * self.n
        self.prob = np.zeros(self.n, dtype=np.float64)
        self.alias = np.zeros(self.n, dtype=np.int64)
        small = [i for i in range(self.n) if scaled[i] < 1.0]
        large = [i for i in range(self.n) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            l = large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        for i in large:
            self.prob[i] = 1.0
        for i in small:
            self.prob[i] = 1.0  # numerical leftovers

    def sample(self, rng, size=None):
        """Draw indices; one uniform int and one uniform float per draw."""
        if size is None:
            i = int(rng.integers(self.n))
            if rng.random() < self.prob[i]:
                return i
            return int(self.alias[i])
        idx = rng.integers(self.n, size=size)
        u = rng.random(size=size)
        return np.where(u < self.prob[idx], idx, self.alias[idx])


class VertexSampler:
    """Noise-vertex sampler with probabilities proportional to degree^0.75."""

    def __init__(self, probabilities):
        self.probabilities = probabilities
        self._alias = AliasTable(probabilities)

    def sample(self, rng, size=None):
        return self._alias.sample(rng, size=size)


def build_negative_sampler(g):
    """Sampler over vertices with P(v) proportional to degrees[v] ** 0.75."""
    d = np.power(g.degrees, 0.75)
    total = d.sum()
    if total <= 0.0:
        raise DataError("cannot build a negative sampler: all degrees are zero")
    return VertexSampler(d / total)


def sample_edge_batch(g, batch_size, rng):
    """Draw batch_size edges i.i.d. with probability proportional to weight."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1, got %r" % (batch_size,))
    if not g.edges:
        raise DataError("cannot sample edges from an empty edge set")
    if g._edge_alias is None:
        g._edge_alias = AliasTable(np.array([w for (_, _, w) in g.edges]))
    idx = g._edge_alias.sample(rng, size=int(batch_size))
    return [g.edges[int(i)] for i in idx]
