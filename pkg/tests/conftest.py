"""Session fixtures: datasets and cached training runs shared across tests.

The full-size benchmark prefers a real dataset under data/cora/ when one is
present (edges.tsv / text.tsv / labels.tsv); otherwise a deterministic
synthetic network with the same shape is generated.
"""

import sys
import time
from pathlib import Path
from types import SimpleNamespace

import pytest

from wane import benchmark
from wane.corpus import build_corpus, load_labels
from wane.graph import load_graph, split_edges
from wane.trainer import TrainConfig, train

REAL_DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "cora"


@pytest.fixture(scope="session")
def small_ds(tmp_path_factory):
    """Tiny dataset for CLI and end-to-end plumbing tests."""
    out = tmp_path_factory.mktemp("small_ds")
    benchmark.write_dataset(out, num_vertices=60, num_edges=150, num_classes=3,
                            subtopics_per_class=2, mean_len=12, seed=1)
    return str(out)


def _load_dir(root):
    edges = str(Path(root) / "edges.tsv")
    text = str(Path(root) / "text.tsv")
    labels_path = str(Path(root) / "labels.tsv")
    g = load_graph(edges)
    vocab, seqs = build_corpus(text, max_len=300, num_vertices=g.num_vertices)
    labels, names = load_labels(labels_path, num_vertices=g.num_vertices)
    return g, vocab, seqs, labels, names


@pytest.fixture(scope="session")
def bench(tmp_path_factory):
    if all((REAL_DATA_DIR / f).is_file()
           for f in ("edges.tsv", "text.tsv", "labels.tsv")):
        root = REAL_DATA_DIR
        source = "cora"
    else:
        root = tmp_path_factory.mktemp("bench")
        benchmark.write_dataset(root, seed=0)
        source = "synthetic"
    g, vocab, seqs, labels, names = _load_dir(root)
    print("\n[bench] source=%s  N=%d  E=%d  vocab=%d"
          % (source, g.num_vertices, len(g.edges), len(vocab)))
    return SimpleNamespace(dir=str(root), source=source, graph=g, vocab=vocab,
                           sequences=seqs, labels=labels, label_names=names)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance pass/fail lines after the test summary."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def trained(bench):
    """Memoizing factory for trained models; runs are shared across tests."""
    cache = {}

    def get(ratio, seed, mode="wane-ww", align="submult", agg="max",
            alphas=(1.0, 1.0, 1.0), **overrides):
        key = (ratio, seed, mode, align, agg, tuple(alphas),
               tuple(sorted(overrides.items())))
        if key not in cache:
            cfg = TrainConfig(mode=mode, align_fn=align, agg_fn=agg, seed=seed,
                              alpha1=alphas[0], alpha2=alphas[1],
                              alpha3=alphas[2], **overrides)
            split = split_edges(bench.graph, ratio, seed)
            t0 = time.time()
            params, tlog = train(cfg, split.train, (bench.vocab, bench.sequences))
            wall = time.time() - t0
            print("[trained] %s/%s/%s ratio=%.2f seed=%d alphas=%s: %d steps, "
                  "final loss %.3f, %.0fs"
                  % (mode, align, agg, ratio, seed, list(alphas), len(tlog),
                     tlog.losses[-1], wall))
            cache[key] = SimpleNamespace(params=params, split=split, tlog=tlog,
                                         cfg=cfg, wall=wall)
        return cache[key]

    return get
