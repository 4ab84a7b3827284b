"""Command-line entry points.

Subcommands: transform (span clusters -> head-word clusters), train,
predict, evaluate (gold vs predictions), audit (complexity counts), and
gradcheck (finite-difference check of the full loss).  Option precedence is
defaults < --config file < explicit flags.  Every run that writes outputs
also writes a manifest recording arguments, seeds, and library versions.
"""

import argparse
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import kernels, metrics, synthetic, training
from .corpus import CorpusError, load_corpus, to_word_level, write_word_level
from .model import ModelConfig, WordCorefModel


def _parse_value(raw):
    low = raw.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    for cast in (int, float):
        try:
            return cast(low)
        except ValueError:
            pass
    return low


def load_config_file(path):
    """key=value lines; '#' starts a comment, blank lines are skipped."""
    values = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value")
        key, raw = line.split("=", 1)
        values[key.strip()] = _parse_value(raw)
    return values


def _split_config(values):
    """Route config keys to ModelConfig vs TrainConfig; reject strays."""
    model_keys = {f.name for f in dataclasses.fields(ModelConfig) if f.init}
    train_keys = {f.name for f in dataclasses.fields(training.TrainConfig)}
    model_kv, train_kv = {}, {}
    for key, val in values.items():
        if key in model_keys:
            model_kv[key] = val
        elif key in train_keys:
            train_kv[key] = val
        else:
            raise ValueError(f"unknown config key {key!r}")
    return model_kv, train_kv


def _configs(args):
    model_kv, train_kv = {}, {}
    if getattr(args, "config", None):
        model_kv, train_kv = _split_config(load_config_file(args.config))
    overrides = {
        "k": getattr(args, "k", None),
        "alpha": getattr(args, "alpha", None),
        "epochs": getattr(args, "epochs", None),
        "dev_split": getattr(args, "dev_split", None),
        "seed": getattr(args, "seed", None),
    }
    for key, val in overrides.items():
        if val is None:
            continue
        if key == "k":
            model_kv[key] = val
        else:
            train_kv[key] = val
    model_cfg = ModelConfig(**model_kv)
    train_cfg = training.TrainConfig(**train_kv)
    return model_cfg, train_cfg


def write_manifest(path, command, args, extra=None):
    manifest = {
        "command": command,
        "argv": [str(a) for a in sys.argv[1:]],
        "arguments": {k: (str(v) if isinstance(v, Path) else v)
                      for k, v in vars(args).items() if k != "func"},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kernel_backend": kernels.active_backend(),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")


# -- subcommands --------------------------------------------------------------

def cmd_transform(args):
    docs = load_corpus(args.corpus)
    write_word_level([to_word_level(d) for d in docs], args.output)
    write_manifest(str(args.output) + ".manifest.json", "transform", args,
                   {"documents": len(docs)})
    print(f"wrote {len(docs)} word-level records to {args.output}")
    return 0


def cmd_train(args):
    model_cfg, train_cfg = _configs(args)
    docs = load_corpus(args.corpus)
    out_dir = Path(args.out_dir)

    def show(rec):
        print(f"epoch {rec['epoch']:3d}  loss {rec['total']:9.4f}  "
              f"wl_f1 {rec['dev_wl_f1']:.4f}  sl_f1 {rec['dev_sl_f1']:.4f}  "
              f"span_acc {rec['dev_span_acc']:.4f}")

    result = training.train(docs, model_cfg, train_cfg,
                            embeddings_path=args.embeddings,
                            out_dir=out_dir, log_fn=show)
    write_manifest(out_dir / "manifest.json", "train", args, {
        "model_config": dataclasses.asdict(model_cfg),
        "train_config": dataclasses.asdict(train_cfg),
        "best_epoch": result.best_epoch,
        "best_metrics": result.best_metrics,
        "stopped_early": result.stopped_early,
    })
    print(f"best epoch {result.best_epoch}: {result.best_metrics}")
    return 0


def cmd_predict(args):
    model_cfg, train_cfg = _configs(args)
    docs = load_corpus(args.corpus)
    model = WordCorefModel(model_cfg, np.random.default_rng(train_cfg.seed),
                           embeddings_path=args.embeddings)
    model.load(args.checkpoint)
    with open(args.output, "w", encoding="utf-8") as f:
        for doc in docs:
            pred = model.predict_document(doc)
            rec = {
                "doc_id": doc.doc_id,
                "head_clusters": [[int(h) for h in c] for c in pred.head_clusters],
                "span_clusters": [[list(s) for s in c] for c in pred.span_clusters],
            }
            f.write(json.dumps(rec) + "\n")
    write_manifest(str(args.output) + ".manifest.json", "predict", args,
                   {"documents": len(docs),
                    "model_config": dataclasses.asdict(model_cfg)})
    print(f"wrote predictions for {len(docs)} documents to {args.output}")
    return 0


def _load_predictions(path):
    preds = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            preds[rec["doc_id"]] = rec
    return preds


def cmd_evaluate(args):
    docs = load_corpus(args.corpus)
    preds = _load_predictions(args.predictions)
    key_sl, resp_sl, key_wl, resp_wl = [], [], [], []
    for doc in docs:
        rec = preds.get(doc.doc_id, {"head_clusters": [], "span_clusters": []})
        key_sl += [[(doc.doc_id, tuple(s)) for s in c] for c in doc.clusters]
        resp_sl += [[(doc.doc_id, tuple(s)) for s in c]
                    for c in rec.get("span_clusters", [])]
        wl = to_word_level(doc)
        key_wl += [[(doc.doc_id, h) for h in c] for c in wl.head_clusters]
        resp_wl += [[(doc.doc_id, h) for h in c]
                    for c in rec.get("head_clusters", [])]
    print("word level")
    print(metrics.format_report(key_wl, resp_wl))
    print()
    print("span level")
    print(metrics.format_report(key_sl, resp_sl))
    return 0


def cmd_audit(args):
    docs = load_corpus(args.corpus)
    rep = metrics.audit(docs, order=args.order_convention,
                        sbc=args.sbc_convention)
    for key, val in rep.as_dict().items():
        print(f"{key} {val}")
    return 0


def cmd_gradcheck(args):
    cfg = ModelConfig(dim=8, buckets=64, feat_dim=4, ffnn_hidden=12,
                      span_hidden=12, k=5)
    model = WordCorefModel(cfg, np.random.default_rng(args.seed))
    doc = synthetic.gradcheck_document()
    wl = to_word_level(doc)

    def loss_fn():
        loss, _ = training.document_loss(model, doc, wl)
        return loss

    err = ad.grad_check(loss_fn, model.loss_sensitive_parameters(), eps=args.eps)
    print(f"max relative gradient error: {err:.3e} (threshold {args.threshold:g})")
    return 0 if err < args.threshold else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wordcoref",
        description="Word-level coreference resolution over JSONL corpora.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("transform", help="reduce span clusters to head words")
    p.add_argument("corpus", type=Path)
    p.add_argument("output", type=Path)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train", help="train a model on a JSONL corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("out_dir", type=Path)
    p.add_argument("--config", type=Path, help="key=value option file")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="antecedent candidates per token")
    p.add_argument("--alpha", type=float, help="BCE loss weight")
    p.add_argument("--epochs", type=int)
    p.add_argument("--dev-split", dest="dev_split", type=float)
    p.add_argument("--embeddings", type=Path,
                   help="precomputed subtoken embedding file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run a checkpoint over a corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("checkpoint", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--embeddings", type=Path)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("corpus", type=Path)
    p.add_argument("predictions", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", help="word-level vs span-level counts")
    p.add_argument("corpus", type=Path)
    p.add_argument("--order-convention", choices=("lex", "start"),
                   default="lex")
    p.add_argument("--sbc-convention", choices=("masked", "full"),
                   default="masked")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the joint loss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, OSError,
            training.TrainingDivergedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
