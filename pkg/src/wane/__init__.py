"""Joint structural and textual vertex embeddings with word alignment.

Learns one embedding per vertex of an undirected network by combining a free
structural vector with a textual vector computed from the vertex's text,
optionally recomputed per interacting partner (context-aware).  Three
encoders of increasing coupling are provided (plain averaging, word-by-context
attention, word-by-word alignment) plus a negative-sampling trainer and an
evaluation harness for link prediction and vertex classification.
"""

__version__ = "0.1.0"

from .corpus import (EMPTY_TOKEN, TextSequence, Vocabulary, build_corpus,
                     load_labels, tokenize)
from .errors import (CheckpointError, ConfigError, CorpusFormatError, DataError,
                     GraphFormatError, NumericError, WaneError)
from .evaluation import (EvalReport, all_global_embeddings, auc_from_scores,
                         classify, export_embeddings, global_embedding,
                         inspect_alignment, link_prediction_auc, pair_score)
from .graph import (AliasTable, EdgeSplit, Graph, build_negative_sampler,
                    file_digest, load_graph, read_split, sample_edge_batch,
                    split_edges, write_split)
from .model import (AGG_FNS, ALIGN_FNS, MODES, MatchingFeatures, ModelParams,
                    PairEmbedding, PairGradients, edge_loss, make_dropout_mask,
                    pair_embeddings, pair_loss, softmax_conditional,
                    text_embed_avg, text_embed_wc, text_embed_ww)
from .trainer import (AdamState, TrainConfig, TrainLog, load_checkpoint,
                      save_checkpoint, train)

__all__ = [
    "AGG_FNS", "ALIGN_FNS", "AdamState", "AliasTable", "CheckpointError",
    "ConfigError", "CorpusFormatError", "DataError", "EMPTY_TOKEN",
    "EdgeSplit", "EvalReport", "Graph", "GraphFormatError", "MODES",
    "MatchingFeatures", "ModelParams", "NumericError", "PairEmbedding",
    "PairGradients", "TextSequence", "TrainConfig", "TrainLog", "Vocabulary",
    "WaneError", "all_global_embeddings", "auc_from_scores",
    "build_corpus", "build_negative_sampler", "classify", "edge_loss",
    "export_embeddings", "file_digest", "global_embedding",
    "inspect_alignment", "link_prediction_auc", "load_checkpoint",
    "load_graph", "load_labels", "make_dropout_mask", "pair_embeddings",
    "pair_loss", "pair_score", "read_split", "sample_edge_batch",
    "save_checkpoint", "softmax_conditional", "split_edges", "text_embed_avg",
    "text_embed_wc", "text_embed_ww", "tokenize", "train", "write_split",
]
