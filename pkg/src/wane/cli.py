"""Command-line interface.

Subcommands: train, eval-link, eval-classify, export, inspect-alignment,
synth-data.  A dataset directory holds `edges.tsv`, `text.tsv`, and
optionally `labels.tsv`.  Exit codes: 0 success, 2 bad flags or
configuration, 3 data errors, 4 numeric failure during training.

`train` persists everything needed for leak-free evaluation next to the
checkpoint: the edge split (with its seed), the train log, and the effective
config; the checkpoint stores the split file's hash, and every evaluation
subcommand refuses to run against a split or text file that no longer
matches.
"""

import argparse
import os
import sys

from . import benchmark
from .corpus import build_corpus, load_labels
from .errors import (CheckpointError, ConfigError, CorpusFormatError, DataError,
                     GraphFormatError, NumericError)
from .evaluation import (EvalReport, classify, all_global_embeddings,
                         export_embeddings, inspect_alignment, link_prediction_auc)
from .graph import file_digest, load_graph, read_split, split_edges, write_split
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

# defaults double as the type table for config-file parsing
_TRAIN_DEFAULTS = {
    "mode": "wane-ww",
    "align": "submult",
    "agg": "max",
    "lr": 1e-3,
    "batch_size": 128,
    "K": 1,
    "keep_prob": 0.5,
    "epochs": 200,
    "seed": 0,
    "alpha1": 1.0,
    "alpha2": 1.0,
    "alpha3": 1.0,
    "max_len": 300,
    "dim": 100,
    "ratio": 1.0,
    "threads": 1,
    "max_steps": 0,
    "allow_any_k": False,
    "deterministic": True,
}

_MODES = ("wane", "wane-wc", "wane-ww")


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError("expected a boolean, got %r" % (text,))


def _read_config_file(path):
    """key=value lines; keys must match train flag names."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected key=value, got %r" % (path, lineno, line))
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _TRAIN_DEFAULTS:
                raise ConfigError("%s:%d: unknown config key %r" % (path, lineno, key))
            proto = _TRAIN_DEFAULTS[key]
            if isinstance(proto, bool):
                values[key] = _parse_bool(val)
            elif isinstance(proto, int):
                values[key] = int(val)
            elif isinstance(proto, float):
                values[key] = float(val)
            else:
                values[key] = val
    return values


def _effective_train_options(args):
    """defaults < config file < explicit flags."""
    merged = dict(_TRAIN_DEFAULTS)
    if args.config:
        merged.update(_read_config_file(args.config))
    for key in _TRAIN_DEFAULTS:
        flag_val = getattr(args, key)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def _dataset_paths(data_dir):
    return (os.path.join(data_dir, "edges.tsv"),
            os.path.join(data_dir, "text.tsv"),
            os.path.join(data_dir, "labels.tsv"))


def _train_config(opt):
    return TrainConfig(
        mode=opt["mode"], align_fn=opt["align"], agg_fn=opt["agg"],
        learning_rate=opt["lr"], batch_size=opt["batch_size"], K=opt["K"],
        keep_prob=opt["keep_prob"], epochs=opt["epochs"], seed=opt["seed"],
        alpha1=opt["alpha1"], alpha2=opt["alpha2"], alpha3=opt["alpha3"],
        max_len=opt["max_len"], d_s=opt["dim"], allow_any_k=opt["allow_any_k"],
        threads=opt["threads"], deterministic=opt["deterministic"],
        max_steps=opt["max_steps"])


def cmd_train(args):
    opt = _effective_train_options(args)
    cfg = _train_config(opt)
    cfg.validate()
    ratio = float(opt["ratio"])

    edges_path, text_path, _ = _dataset_paths(args.data)
    graph = load_graph(edges_path)
    vocab, sequences = build_corpus(text_path, max_len=cfg.max_len,
                                    num_vertices=graph.num_vertices)
    split = split_edges(graph, ratio, cfg.seed)

    os.makedirs(args.out, exist_ok=True)
    split_path = os.path.join(args.out, "split.tsv")
    split_sha = write_split(split, split_path)

    params, tlog = train(cfg, split.train, (vocab, sequences))

    echo = dict(cfg.as_dict())
    echo.update({
        "ratio": ratio,
        "split_sha256": split_sha,
        "text_sha256": file_digest(text_path),
        "num_vertices": graph.num_vertices,
        "num_edges": len(graph.edges),
        "vocab_size": len(vocab),
    })
    ckpt_path = os.path.join(args.out, "checkpoint.bin")
    save_checkpoint(params, ckpt_path, config_echo=echo)
    tlog.write_tsv(os.path.join(args.out, "trainlog.tsv"))
    with open(os.path.join(args.out, "config.tsv"), "w", encoding="utf-8") as fh:
        for key in sorted(echo):
            fh.write("%s\t%s\n" % (key, echo[key]))
    print("checkpoint\t%s" % ckpt_path)
    print("split\t%s" % split_path)
    print("steps\t%d" % len(tlog))
    print("final_loss\t%.6f" % (tlog.losses[-1] if tlog.losses else float("nan")))
    return 0


def _load_eval_state(args, need_labels=False):
    """Shared eval plumbing: checkpoint, verified split, corpus, labels."""
    params, echo = load_checkpoint(args.checkpoint)
    if not echo:
        raise CheckpointError("%s: checkpoint carries no config echo" % args.checkpoint)
    split_sha = file_digest(args.split)
    if split_sha != echo.get("split_sha256"):
        raise DataError("split file %s does not match the checkpoint (hash mismatch)"
                        % args.split)
    split = read_split(args.split)
    _, text_path, labels_path = _dataset_paths(args.data)
    if file_digest(text_path) != echo.get("text_sha256"):
        raise DataError("text file %s does not match the checkpoint (hash mismatch)"
                        % text_path)
    vocab, sequences = build_corpus(text_path, max_len=int(echo["max_len"]),
                                    num_vertices=split.train.num_vertices)
    labels = names = None
    if need_labels:
        labels, names = load_labels(labels_path, num_vertices=split.train.num_vertices)
    return params, echo, split, vocab, sequences, labels, names


def _emit_report(report, out_path):
    print(report)
    if out_path:
        report.write(out_path)


def cmd_eval_link(args):
    params, echo, split, _vocab, sequences, _, _ = _load_eval_state(args)
    auc = link_prediction_auc(split.test_pos, split.test_neg, params, sequences,
                              echo["mode"])
    report = EvalReport(task="link-prediction", metric="auc", value=auc,
                        seed=int(echo.get("seed", 0)), config=echo)
    _emit_report(report, args.out)
    return 0


def cmd_eval_classify(args):
    params, echo, split, _vocab, sequences, labels, _names = \
        _load_eval_state(args, need_labels=True)
    emb = all_global_embeddings(params, split.train, sequences, echo["mode"])
    mean_acc, accs = classify(emb, labels, train_ratio=args.train_ratio,
                              repeats=args.repeats, seed=args.seed)
    report = EvalReport(task="classification", metric="accuracy", value=mean_acc,
                        seed=args.seed, config=echo, repeats=accs)
    _emit_report(report, args.out)
    return 0


def cmd_export(args):
    if not args.out:
        raise ConfigError("export requires --out <file>")
    params, echo, split, _vocab, sequences, _, _ = _load_eval_state(args)
    shape = export_embeddings(params, split.train, sequences, echo["mode"], args.out)
    print("export\t%s\t%d\t%d" % (args.out, shape[0], shape[1]))
    return 0


def cmd_inspect(args):
    if not args.out:
        raise ConfigError("inspect-alignment requires --out <file>")
    params, echo, _split, vocab, sequences, _, _ = _load_eval_state(args)
    try:
        i_str, j_str = args.edge.split(",")
        i, j = int(i_str), int(j_str)
    except ValueError:
        raise ConfigError("--edge expects 'i,j' with integer ids, got %r"
                          % (args.edge,)) from None
    inspect_alignment(i, j, params, vocab, sequences, echo["mode"], args.out)
    print("alignment\t%s" % args.out)
    return 0


def cmd_synth_data(args):
    paths = benchmark.write_dataset(args.out, num_vertices=args.vertices,
                                    num_edges=args.edges, num_classes=args.classes,
                                    seed=args.seed)
    for p in paths:
        print(p)
    return 0


def _add_eval_common(sp):
    sp.add_argument("--checkpoint", required=True, help="checkpoint.bin from train")
    sp.add_argument("--split", required=True, help="split.tsv from the same run")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--out", default=None, help="optional report/output path")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="wane",
        description="joint structural+textual vertex embeddings with word alignment")
    sub = ap.add_subparsers(dest="command", required=True)

    tp = sub.add_parser("train", help="train a model and write run artifacts")
    tp.add_argument("--data", required=True, help="dataset directory")
    tp.add_argument("--out", required=True, help="output directory for artifacts")
    tp.add_argument("--config", default=None, help="key=value config file; flags win")
    tp.add_argument("--mode", choices=_MODES, default=None)
    tp.add_argument("--align", choices=("sub", "mult", "submult"), default=None)
    tp.add_argument("--agg", choices=("max", "mean"), default=None)
    tp.add_argument("--ratio", type=float, default=None, help="train edge fraction")
    tp.add_argument("--seed", type=int, default=None)
    tp.add_argument("--lr", type=float, default=None)
    tp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    tp.add_argument("--K", type=int, default=None, help="negative samples per pair")
    tp.add_argument("--allow-any-k", dest="allow_any_k", action="store_const",
                    const=True, default=None)
    tp.add_argument("--keep-prob", dest="keep_prob", type=float, default=None)
    tp.add_argument("--epochs", type=int, default=None)
    tp.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    tp.add_argument("--alpha1", type=float, default=None)
    tp.add_argument("--alpha2", type=float, default=None)
    tp.add_argument("--alpha3", type=float, default=None)
    tp.add_argument("--max-len", dest="max_len", type=int, default=None)
    tp.add_argument("--dim", type=int, default=None, help="structural dimension d_s")
    tp.add_argument("--threads", type=int, default=None)
    tp.add_argument("--no-deterministic", dest="deterministic", action="store_const",
                    const=False, default=None)
    tp.set_defaults(func=cmd_train)

    lp = sub.add_parser("eval-link", help="AUC on the held-out edge split")
    _add_eval_common(lp)
    lp.set_defaults(func=cmd_eval_link)

    cp = sub.add_parser("eval-classify", help="classification on global embeddings")
    _add_eval_common(cp)
    cp.add_argument("--train-ratio", dest="train_ratio", type=float, default=0.5)
    cp.add_argument("--repeats", type=int, default=10)
    cp.add_argument("--seed", type=int, default=0)
    cp.set_defaults(func=cmd_eval_classify)

    ep = sub.add_parser("export", help="write global embeddings as TSV")
    _add_eval_common(ep)
    ep.set_defaults(func=cmd_export)

    ip = sub.add_parser("inspect-alignment", help="per-word matching norms of a pair")
    _add_eval_common(ip)
    ip.add_argument("--edge", required=True, help="pair as 'i,j'")
    ip.set_defaults(func=cmd_inspect)

    gp = sub.add_parser("synth-data", help="write a synthetic benchmark dataset")
    gp.add_argument("--out", required=True)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--vertices", type=int, default=2277)
    gp.add_argument("--edges", type=int, default=5214)
    gp.add_argument("--classes", type=int, default=7)
    gp.set_defaults(func=cmd_synth_data)
    return ap


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and flag errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (GraphFormatError, CorpusFormatError, CheckpointError, DataError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError,
            PermissionError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except NumericError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
