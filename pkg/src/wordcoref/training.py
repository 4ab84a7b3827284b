"""Losses, optimizer, and the document-batched training loop.

A batch is one document.  The joint loss is

    L = L_nlml + alpha * L_bce + L_span

where L_nlml is the negative log marginal likelihood of the gold antecedent
sets, L_bce a binary cross-entropy over all surviving candidate pairs, and
L_span the start/end cross-entropy of gold mention boundaries.  Boundary
scores are unmasked during training; the head-relative masks apply only at
inference.
"""

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import metrics
from .corpus import to_word_level
from .model import WordCorefModel


class TrainingDivergedError(RuntimeError):
    """A loss or gradient stopped being finite."""


@dataclass
class TrainConfig:
    epochs: int = 20
    lr_task: float = 5e-3
    lr_encoder: float = 5e-3
    alpha: float = 0.5            # weight of the BCE term
    dev_split: float = 0.1        # held-out fraction when no dev set is given
    clip_norm: float = 1.0        # global gradient norm ceiling
    linear_decay: bool = True     # anneal the learning rate linearly to zero
    bce_reduction: str = "mean"   # "mean" or "sum" over scored pairs
    seed: int = 0
    stop_wl_f1: float = None      # early-stop targets; both must be met when
    stop_span_acc: float = None   # both are set

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0.0 <= self.dev_split < 1.0):
            raise ValueError("dev_split must be in [0, 1)")
        if self.lr_task <= 0 or self.lr_encoder <= 0:
            raise ValueError("learning rates must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")
        if self.bce_reduction not in ("mean", "sum"):
            raise ValueError(f"unknown bce_reduction {self.bce_reduction!r}")
        return self


# -- losses -------------------------------------------------------------------

def _cluster_of(wl):
    return {h: ci for ci, cluster in enumerate(wl.head_clusters) for h in cluster}


def antecedent_masks(scores, wl):
    """Valid and gold masks over the padded [n, width + 1] score matrix.

    Column 0 stands for the dummy antecedent (score fixed at 0).  A token's
    gold set is its coreferent candidates among the survivors; when that set
    is empty the dummy is gold, so the gold mask is always a subset of the
    valid mask with at least one entry per row.
    """
    n, width = scores.cand.shape
    cluster_of = _cluster_of(wl)
    valid = np.zeros((n, width + 1), dtype=bool)
    valid[:, 0] = True
    valid[:, 1:] = scores.valid_mask()
    gold = np.zeros_like(valid)
    for i in range(n):
        ci = cluster_of.get(i)
        if ci is not None:
            for slot in range(int(scores.counts[i])):
                if cluster_of.get(int(scores.cand[i, slot])) == ci:
                    gold[i, slot + 1] = True
        if not gold[i, 1:].any():
            gold[i, 0] = True
    return valid, gold


def nlml_loss(scores, wl):
    """Negative log marginal likelihood of the gold antecedent sets.

    Non-negative by construction: the gold partition function runs over a
    subset of the full one.
    """
    valid, gold = antecedent_masks(scores, wl)
    pad = ad.concat([ad.constant(np.zeros((scores.n, 1))), scores.total], axis=1)
    log_all = ad.logsumexp_rows(pad, valid)
    log_gold = ad.logsumexp_rows(pad, gold)
    return ad.tsum(ad.add(log_all, ad.scale(log_gold, -1.0)))


def bce_loss(scores, wl, reduction="mean"):
    """Binary cross-entropy over every surviving candidate pair.

    Written as softplus(s) - t * s, which equals
    -[t log sigmoid(s) + (1 - t) log(1 - sigmoid(s))] without overflow.
    """
    mask = scores.valid_mask()
    if not mask.any():
        return ad.constant(np.float64(0.0))
    cluster_of = _cluster_of(wl)
    rows_idx, cols_idx = np.nonzero(mask)
    s = ad.take_pairs(scores.total, rows_idx, cols_idx)
    t = np.zeros(rows_idx.shape[0])
    for p, (i, slot) in enumerate(zip(rows_idx, cols_idx)):
        ci = cluster_of.get(int(i))
        if ci is not None and cluster_of.get(int(scores.cand[i, slot])) == ci:
            t[p] = 1.0
    per_pair = ad.add(ad.softplus(s), ad.mul(ad.constant(-t), s))
    return ad.tmean(per_pair) if reduction == "mean" else ad.tsum(per_pair)


def span_ce_loss(bscores, gold):
    """Cross-entropy of the gold start and end over all sentence positions."""
    start_col = ad.col(bscores.scores, 0)
    end_col = ad.col(bscores.scores, 1)
    ls = ad.add(ad.logsumexp_vec(start_col),
                ad.scale(ad.take_at(start_col, gold.start), -1.0))
    le = ad.add(ad.logsumexp_vec(end_col),
                ad.scale(ad.take_at(end_col, gold.end), -1.0))
    return ad.add(ls, le)


def document_loss(model, doc, wl, alpha=0.5, bce_reduction="mean"):
    """Joint loss for one document; returns (loss tensor, detached parts)."""
    model.training = True
    tm = model.token_matrix(doc)
    scores = model.antecedent_scores(doc, tm.T)
    l_nlml = nlml_loss(scores, wl)
    l_bce = bce_loss(scores, wl, bce_reduction)
    total = ad.add(l_nlml, ad.scale(l_bce, alpha)) if alpha != 0 else l_nlml

    l_span = None
    for h in sorted(wl.head_to_span):
        term = span_ce_loss(model.boundary_scores(h, tm.T, doc),
                            wl.head_to_span[h])
        l_span = term if l_span is None else ad.add(l_span, term)
    if l_span is not None:
        total = ad.add(total, l_span)

    parts = {
        "nlml": float(l_nlml.data),
        "bce": float(l_bce.data),
        "span": float(l_span.data) if l_span is not None else 0.0,
        "total": float(total.data),
    }
    return total, parts


# -- optimizer ----------------------------------------------------------------

class _Slot:
    __slots__ = ("param", "m", "v")

    def __init__(self, param):
        self.param = param
        self.m = np.zeros_like(param.data)
        self.v = np.zeros_like(param.data)


class Adam:
    """Adam with bias correction; one learning rate per parameter group."""

    def __init__(self, groups, betas=(0.9, 0.999), eps=1e-8):
        self.groups = [([_Slot(p) for p in params], float(lr))
                       for params, lr in groups]
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0

    def step(self, scale=1.0):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for slots, lr in self.groups:
            for s in slots:
                g = s.param.grad
                s.m *= self.b1
                s.m += (1.0 - self.b1) * g
                s.v *= self.b2
                s.v += (1.0 - self.b2) * (g * g)
                s.param.data -= (lr * scale) * (s.m / c1) / (np.sqrt(s.v / c2) + self.eps)


def clip_global_norm(parameters, max_norm):
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    params = list(parameters)
    for p in params:
        total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if not math.isfinite(norm):
        raise TrainingDivergedError(f"gradient norm is {norm}")
    if max_norm is not None and norm > max_norm > 0:
        s = max_norm / norm
        for p in params:
            p.grad *= s
    return norm


# -- evaluation ---------------------------------------------------------------

def evaluate_model(model, docs, wl_map):
    """Corpus-level word F1, span F1 and span accuracy on gold heads.

    Mention ids are document-qualified so one merged clustering over all
    documents reproduces the per-document aggregation of the metrics.
    """
    key_wl, resp_wl, key_sl, resp_sl = [], [], [], []
    correct = 0
    total = 0
    for doc in docs:
        wl = wl_map[doc.doc_id]
        pred = model.predict_document(doc)
        key_wl += [[(doc.doc_id, h) for h in c] for c in wl.head_clusters]
        resp_wl += [[(doc.doc_id, h) for h in c] for c in pred.head_clusters]
        key_sl += [[(doc.doc_id, tuple(s)) for s in c] for c in doc.clusters]
        resp_sl += [[(doc.doc_id, tuple(s)) for s in c] for c in pred.span_clusters]
        predicted = model.predict_spans_for_heads(doc, sorted(wl.head_to_span))
        for h, gold in wl.head_to_span.items():
            total += 1
            if predicted[h] == gold:
                correct += 1
    return {
        "wl_f1": float(metrics.conll_f1(key_wl, resp_wl)),
        "sl_f1": float(metrics.conll_f1(key_sl, resp_sl)),
        "span_acc": correct / total if total else 1.0,
    }


# -- the loop -----------------------------------------------------------------

@dataclass
class TrainResult:
    model: WordCorefModel
    history: list
    best_epoch: int
    best_metrics: dict
    stopped_early: bool


def split_dev(docs, dev_split, rng):
    """Hold out a dev fraction (at least 1 doc, never all of them)."""
    if dev_split <= 0 or len(docs) < 2:
        return list(docs), list(docs)
    n_dev = int(round(dev_split * len(docs)))
    n_dev = max(1, min(n_dev, len(docs) - 1))
    order = rng.permutation(len(docs))
    dev = [docs[i] for i in order[:n_dev]]
    train_docs = [docs[i] for i in order[n_dev:]]
    return train_docs, dev


def train(docs, model_config, train_config, dev_docs=None,
          embeddings_path=None, out_dir=None, log_fn=None):
    """Train a model from scratch; returns the best-epoch state.

    All stochastic choices (parameter init, dev split, epoch shuffles,
    dropout) come from one generator seeded with ``train_config.seed``, so a
    repeated run is bitwise identical.  Checkpoints ``best.ckpt`` and
    ``last.ckpt`` plus a JSONL log land in ``out_dir`` when it is given; the
    returned model carries the best-epoch weights either way.
    """
    cfg = train_config.validate()
    if not docs:
        raise ValueError("no training documents")
    rng = np.random.default_rng(cfg.seed)
    model = WordCorefModel(model_config, rng, embeddings_path)

    if dev_docs is None:
        train_docs, dev_docs = split_dev(docs, cfg.dev_split, rng)
    else:
        train_docs = list(docs)
    wl_map = {}
    for d in list(train_docs) + list(dev_docs):
        if d.doc_id not in wl_map:
            wl_map[d.doc_id] = to_word_level(d)

    groups = []
    if model.encoder_trainable and model.encoder_parameters():
        groups.append((model.encoder_parameters(), cfg.lr_encoder))
    groups.append((model.task_parameters(), cfg.lr_task))
    opt = Adam(groups)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl" if out_dir is not None else None

    total_steps = cfg.epochs * len(train_docs)
    step = 0
    history = []
    best = (-1.0, 0, None, None)  # (sl_f1, epoch, arrays, metrics)
    stopped_early = False

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_docs))
        sums = {"nlml": 0.0, "bce": 0.0, "span": 0.0, "total": 0.0}
        scale = 1.0
        for di in order:
            doc = train_docs[di]
            model.store.zero_grads()
            try:
                loss, parts = document_loss(model, doc, wl_map[doc.doc_id],
                                            cfg.alpha, cfg.bce_reduction)
                loss.backward()
            except ad.NonFiniteError as e:
                raise TrainingDivergedError(
                    f"epoch {epoch}, doc {doc.doc_id}: {e}") from e
            clip_global_norm(model.trainable_parameters(), cfg.clip_norm)
            if cfg.linear_decay:
                scale = 1.0 - step / total_steps
            opt.step(scale)
            step += 1
            for k in sums:
                sums[k] += parts[k]

        dev = evaluate_model(model, dev_docs, wl_map)
        record = {
            "epoch": epoch,
            "lr_scale": scale,
            "seconds": round(time.perf_counter() - t0, 3),
            **{k: sums[k] / len(train_docs) for k in sums},
            **{f"dev_{k}": dev[k] for k in sorted(dev)},
        }
        history.append(record)
        if log_path is not None:
            with open(log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
        if log_fn is not None:
            log_fn(record)

        if dev["sl_f1"] > best[0]:
            best = (dev["sl_f1"], epoch,
                    {k: v.copy() for k, v in model.store.to_arrays().items()},
                    dict(dev))

        targets = [(cfg.stop_wl_f1, dev["wl_f1"]),
                   (cfg.stop_span_acc, dev["span_acc"])]
        set_targets = [(goal, got) for goal, got in targets if goal is not None]
        if set_targets and all(got >= goal for goal, got in set_targets):
            # the epoch that met the targets wins, whatever its sl_f1
            best = (dev["sl_f1"], epoch, None, dict(dev))
            stopped_early = True
            break

    if out_dir is not None:
        model.save(out_dir / "last.ckpt")
    if best[2] is not None:
        model.store.load_arrays(best[2])
    if out_dir is not None:
        model.save(out_dir / "best.ckpt")

    return TrainResult(model=model, history=history, best_epoch=best[1],
                       best_metrics=best[3] or {}, stopped_early=stopped_early)
