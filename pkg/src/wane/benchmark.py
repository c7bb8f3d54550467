"""Deterministic synthetic benchmark: a community-structured graph with
topically correlated vertex texts, sized like a small citation network.

Vertices belong to balanced classes, each split into subtopics.  Texts mix
shared function words, class vocabulary, subtopic vocabulary, and background
noise with Zipf-like frequencies; edges prefer same-subtopic endpoints, then
same-class ones, with a small fully random remainder.  Everything is a pure
function of the seed, so two runs write byte-identical files.

Used by the test suite when no real dataset directory is available, and by
`wane synth-data` for demos.
"""

import os

import numpy as np

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"

# text mixture over (function, class, subtopic, background) pools; topical
# words are kept sparse so that word-level alignment has room over averaging
_MIX = (0.25, 0.15, 0.15, 0.45)
# edge mixture: same subtopic / same class / uniform random
_EDGE_MIX = (0.70, 0.25, 0.05)

_N_FUNCTION = 40
_N_BACKGROUND = 800
_N_CLASS_WORDS = 120
_N_SUBTOPIC_WORDS = 60


def _word_pool(rng, count):
    """Distinct pronounceable pseudo-words of 2..4 syllables."""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    words = []
    seen = set()
    while len(words) < count:
        k = int(rng.integers(2, 5))
        w = "".join(syllables[int(rng.integers(len(syllables)))] for _ in range(k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _zipf_weights(n):
    w = 1.0 / (np.arange(n) + 2.0)
    return w / w.sum()


def generate(num_vertices=2277, num_edges=5214, num_classes=7,
             subtopics_per_class=6, mean_len=90, seed=0):
    """Build the dataset in memory.

    Returns a dict with keys: edges [(u, v)], texts [str], labels [int],
    label_names [str], subtopics [int].
    """
    if num_vertices < num_classes * subtopics_per_class:
        raise ValueError("too few vertices for the requested class structure")
    rng = np.random.default_rng(seed)

    # balanced classes; subtopics round-robin within each class
    base = num_vertices // num_classes
    extra = num_vertices % num_classes
    labels = []
    subtopics = []
    for c in range(num_classes):
        size = base + (1 if c < extra else 0)
        for k in range(size):
            labels.append(c)
            subtopics.append(c * subtopics_per_class + k % subtopics_per_class)
    labels = np.array(labels)
    subtopics = np.array(subtopics)
    n_subtopics = num_classes * subtopics_per_class

    total_words = (_N_FUNCTION + _N_BACKGROUND + _N_CLASS_WORDS * num_classes
                   + _N_SUBTOPIC_WORDS * n_subtopics)
    pool = _word_pool(rng, total_words)
    pos = 0

    def take(k):
        nonlocal pos
        out = pool[pos:pos + k]
        pos += k
        return np.array(out)

    function_words = take(_N_FUNCTION)
    background = take(_N_BACKGROUND)
    class_words = [take(_N_CLASS_WORDS) for _ in range(num_classes)]
    subtopic_words = [take(_N_SUBTOPIC_WORDS) for _ in range(n_subtopics)]

    w_func = _zipf_weights(_N_FUNCTION)
    w_back = _zipf_weights(_N_BACKGROUND)
    w_class = _zipf_weights(_N_CLASS_WORDS)
    w_sub = _zipf_weights(_N_SUBTOPIC_WORDS)

    texts = []
    lo, hi = max(10, mean_len // 3), int(mean_len * 2.4)
    for v in range(num_vertices):
        length = int(np.clip(rng.normal(mean_len, 0.22 * mean_len), lo, hi))
        counts = rng.multinomial(length, _MIX)
        toks = np.concatenate([
            rng.choice(function_words, size=counts[0], p=w_func),
            rng.choice(class_words[labels[v]], size=counts[1], p=w_class),
            rng.choice(subtopic_words[subtopics[v]], size=counts[2], p=w_sub),
            rng.choice(background, size=counts[3], p=w_back),
        ])
        texts.append(" ".join(toks[rng.permutation(toks.size)]))

    members_by_sub = [np.flatnonzero(subtopics == s) for s in range(n_subtopics)]
    members_by_class = [np.flatnonzero(labels == c) for c in range(num_classes)]

    def draw_pair(members):
        # a singleton group cannot host an edge; widen to the whole graph
        if members.size < 2:
            members = all_vertices
        while True:
            u = int(members[rng.integers(members.size)])
            v = int(members[rng.integers(members.size)])
            if u != v:
                return u, v

    edges = []
    seen = set()
    all_vertices = np.arange(num_vertices)
    while len(edges) < num_edges:
        r = rng.random()
        if r < _EDGE_MIX[0]:
            u, v = draw_pair(members_by_sub[int(rng.integers(n_subtopics))])
        elif r < _EDGE_MIX[0] + _EDGE_MIX[1]:
            u, v = draw_pair(members_by_class[int(rng.integers(num_classes))])
        else:
            u, v = draw_pair(all_vertices)
        key = (u, v) if u < v else (v, u)
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)

    return {
        "edges": edges,
        "texts": texts,
        "labels": labels.tolist(),
        "label_names": ["c%d" % c for c in range(num_classes)],
        "subtopics": subtopics.tolist(),
    }


def write_dataset(out_dir, **kwargs):
    """Generate and write edges.tsv / text.tsv / labels.tsv into out_dir."""
    data = generate(**kwargs)
    os.makedirs(out_dir, exist_ok=True)
    edges_path = os.path.join(out_dir, "edges.tsv")
    text_path = os.path.join(out_dir, "text.tsv")
    labels_path = os.path.join(out_dir, "labels.tsv")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for (u, v) in data["edges"]:
            fh.write("%d\t%d\n" % (u, v))
    with open(text_path, "w", encoding="utf-8") as fh:
        for v, text in enumerate(data["texts"]):
            fh.write("%d\t%s\n" % (v, text))
    with open(labels_path, "w", encoding="utf-8") as fh:
        for v, lab in enumerate(data["labels"]):
            fh.write("%d\t%s\n" % (v, data["label_names"][lab]))
    return edges_path, text_path, labels_path


def main(argv=None):
    import argparse

    ap = argparse.ArgumentParser(description="write a synthetic benchmark dataset")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--vertices", type=int, default=2277)
    ap.add_argument("--edges", type=int, default=5214)
    ap.add_argument("--classes", type=int, default=7)
    args = ap.parse_args(argv)
    paths = write_dataset(args.out, num_vertices=args.vertices, num_edges=args.edges,
                          num_classes=args.classes, seed=args.seed)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
