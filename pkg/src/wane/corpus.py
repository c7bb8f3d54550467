"""Vertex text ingestion: tokenization, vocabulary, id sequences, labels.

Text files are UTF-8, one vertex per line, `vertex_id<TAB>text`.  Label files
are `vertex_id<TAB>label_string`.  Every graph vertex must appear exactly
once; a vertex with empty text gets the single reserved token `<empty>`
(id 0) so that every vertex has a usable textual embedding.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CorpusFormatError

EMPTY_TOKEN = "<empty>"

# word characters minus underscore: lowercasing plus punctuation-boundary split
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(raw):
    """Lowercase and split on whitespace/punctuation; drops empty tokens."""
    return _TOKEN_RE.findall(raw.lower())


class Vocabulary:
    """Token/id bijection with occurrence counts; id 0 is reserved."""

    def __init__(self):
        self._token_to_id = {EMPTY_TOKEN: 0}
        self.id_to_token = [EMPTY_TOKEN]
        # the reserved token is counted once by convention; uses add to it
        self.counts = [1]

    def add(self, token):
        """Insert or count a token; returns its id."""
        tid = self._token_to_id.get(token)
        if tid is None:
            tid = len(self.id_to_token)
            self._token_to_id[token] = tid
            self.id_to_token.append(token)
            self.counts.append(1)
        else:
            self.counts[tid] += 1
        return tid

    def id_of(self, token):
        return self._token_to_id[token]

    def token_of(self, tid):
        return self.id_to_token[tid]

    def __contains__(self, token):
        return token in self._token_to_id

    def __len__(self):
        return len(self.id_to_token)


@dataclass
class TextSequence:
    """Token-id sequence of one vertex, already truncated to max_len."""

    vertex_id: int
    token_ids: np.ndarray

    @property
    def length(self):
        return int(self.token_ids.size)


def _read_keyed_lines(path, what):
    """Read `vertex_id<TAB>payload` lines; returns {vid: payload}."""
    rows = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            try:
                vid = int(parts[0])
            except ValueError:
                raise CorpusFormatError(
                    "%s:%d: vertex id must be an integer, got %r" % (path, lineno, parts[0])) from None
            if vid < 0:
                raise CorpusFormatError("%s:%d: negative vertex id" % (path, lineno))
            if vid in rows:
                raise CorpusFormatError("%s:%d: duplicate vertex %d in %s" % (path, lineno, vid, what))
            rows[vid] = parts[1] if len(parts) == 2 else ""
    return rows


def _check_coverage(rows, num_vertices, path, what):
    if num_vertices is None:
        num_vertices = (max(rows) + 1) if rows else 0
    for vid in rows:
        if vid >= num_vertices:
            raise CorpusFormatError(
                "%s: vertex %d outside graph range [0, %d)" % (path, vid, num_vertices))
    for vid in range(num_vertices):
        if vid not in rows:
            raise CorpusFormatError("%s: missing %s for vertex %d" % (path, what, vid))
    return num_vertices


def build_corpus(path, max_len=300, num_vertices=None):
    """Read vertex texts into (Vocabulary, [TextSequence]) sorted by vertex id.

    Sequences keep the first max_len tokens.  The vocabulary contains every
    distinct surviving token plus the reserved `<empty>` entry, with ids
    assigned in vertex-id order so the mapping does not depend on file row
    order.
    """
    if max_len < 1:
        raise ConfigError("max_len must be >= 1, got %r" % (max_len,))
    rows = _read_keyed_lines(path, "text")
    n = _check_coverage(rows, num_vertices, path, "text")
    vocab = Vocabulary()
    sequences = []
    for vid in range(n):
        toks = tokenize(rows[vid])[:max_len]
        if toks:
            ids = [vocab.add(t) for t in toks]
        else:
            vocab.counts[0] += 1
            ids = [0]
        sequences.append(TextSequence(vertex_id=vid, token_ids=np.asarray(ids, dtype=np.int64)))
    return vocab, sequences


def load_labels(path, num_vertices=None):
    """Read vertex labels; returns (int label array, sorted label name list)."""
    rows = _read_keyed_lines(path, "label")
    n = _check_coverage(rows, num_vertices, path, "label")
    cleaned = {vid: rows[vid].strip() for vid in rows}
    for vid, name in cleaned.items():
        if not name:
            raise CorpusFormatError("%s: empty label for vertex %d" % (path, vid))
    names = sorted(set(cleaned.values()))
    index = {name: k for k, name in enumerate(names)}
    labels = np.array([index[cleaned[vid]] for vid in range(n)], dtype=np.int64)
    return labels, names
