"""Losses against closed-form values, optimizer and clipping behavior, and
the training loop's determinism, checkpointing, and early stopping."""

import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from wordcoref import autodiff as ad
from wordcoref import synthetic
from wordcoref.checkpoint import load as load_ckpt
from wordcoref.coref import AntecedentScores
from wordcoref.corpus import Span, to_word_level
from wordcoref.model import ModelConfig, WordCorefModel
from wordcoref.spans import BoundaryScores
from wordcoref.training import (Adam, TrainConfig, TrainingDivergedError,
                                antecedent_masks, bce_loss, clip_global_norm,
                                document_loss, evaluate_model, nlml_loss,
                                span_ce_loss, split_dev, train)

SMALL = ModelConfig(dim=8, buckets=64, feat_dim=4, ffnn_hidden=10,
                    span_hidden=10, k=5)


def scores_of(cand, counts, total):
    total = np.asarray(total, dtype=np.float64)
    return AntecedentScores(
        cand=np.asarray(cand, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.int64),
        total=ad.constant(total),
        coarse=total.copy(),
        fine=np.zeros_like(total),
    )


def wl_of(head_clusters):
    return SimpleNamespace(head_clusters=head_clusters, head_to_span={})


# -- config -------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    dict(epochs=0),
    dict(dev_split=1.0),
    dict(dev_split=-0.1),
    dict(lr_task=0.0),
    dict(lr_encoder=-1.0),
    dict(alpha=-0.5),
    dict(clip_norm=0.0),
    dict(bce_reduction="median"),
])
def test_train_config_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad).validate()


def test_train_config_defaults_are_valid():
    TrainConfig().validate()


# -- antecedent masks ---------------------------------------------------------

def test_antecedent_masks_frozen_example():
    scores = scores_of(
        cand=[[0, 0], [0, 0], [0, 1], [1, 2]],
        counts=[0, 1, 2, 2],
        total=np.zeros((4, 2)),
    )
    valid, gold = antecedent_masks(scores, wl_of([[1, 3]]))
    np.testing.assert_array_equal(valid, [
        [True, False, False],
        [True, True, False],
        [True, True, True],
        [True, True, True],
    ])
    np.testing.assert_array_equal(gold, [
        [True, False, False],   # no candidates: dummy
        [True, False, False],   # candidate not coreferent: dummy
        [True, False, False],   # token outside every cluster: dummy
        [False, True, False],   # head 1 is a surviving gold antecedent
    ])


def test_antecedent_masks_gold_is_valid_subset_with_one_per_row():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        width = int(rng.integers(1, 4))
        cand = np.zeros((n, width), dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            c = int(min(rng.integers(0, width + 1), i))
            counts[i] = c
            if c:
                cand[i, :c] = np.sort(
                    rng.choice(i, size=c, replace=False))
        heads = list(range(n))
        rng.shuffle(heads)
        clusters = [heads[:3]] if n >= 3 else []
        scores = scores_of(cand, counts, np.zeros((n, width)))
        valid, gold = antecedent_masks(scores, wl_of(clusters))
        assert valid[:, 0].all()
        assert (gold <= valid).all()
        assert gold.any(axis=1).all()
        assert gold.sum(axis=1).min() >= 1


# -- losses -------------------------------------------------------------------

def test_nlml_single_gold_candidate_is_log_two():
    # token 1 has one candidate (token 0, coreferent) at score 0; its row
    # costs log(e^0 + e^0) - log(e^0) = log 2, and token 0 costs nothing.
    scores = scores_of([[0], [0]], [0, 1], [[0.0], [0.0]])
    loss = nlml_loss(scores, wl_of([[0, 1]]))
    assert loss.data == pytest.approx(math.log(2.0))


def test_nlml_dummy_gold_over_m_candidates_is_log_m_plus_one():
    m = 4
    cand = np.arange(m)[None, :].repeat(5, axis=0)
    counts = np.array([0, 1, 2, 3, 4])
    scores = scores_of(cand, counts, np.zeros((5, m)))
    loss = nlml_loss(scores, wl_of([]))
    expected = sum(math.log(c + 1) for c in counts)
    assert loss.data == pytest.approx(expected)


def test_nlml_matches_numpy_recomputation():
    rng = np.random.default_rng(1)
    n, width = 6, 3
    cand = np.zeros((n, width), dtype=np.int64)
    counts = np.minimum(np.arange(n), width)
    for i in range(n):
        if counts[i]:
            cand[i, :counts[i]] = np.arange(counts[i])
    total = rng.standard_normal((n, width))
    wl = wl_of([[0, 2, 5]])
    scores = scores_of(cand, counts, total)
    loss = nlml_loss(scores, wl)

    valid, gold = antecedent_masks(scores, wl)
    pad = np.concatenate([np.zeros((n, 1)), total], axis=1)

    def lse(row, mask):
        vals = row[mask]
        mx = vals.max()
        return mx + math.log(np.exp(vals - mx).sum())

    expected = sum(lse(pad[i], valid[i]) - lse(pad[i], gold[i])
                   for i in range(n))
    assert loss.data == pytest.approx(expected, abs=1e-12)
    assert loss.data >= 0.0


def test_nlml_is_zero_when_gold_saturates():
    # every valid slot is gold (no clusters, no candidates -> dummy only)
    scores = scores_of([[0], [0]], [0, 0], [[3.0], [-2.0]])
    assert nlml_loss(scores, wl_of([])).data == pytest.approx(0.0)


def test_bce_matches_numpy_recomputation():
    rng = np.random.default_rng(2)
    cand = np.array([[0, 0], [0, 0], [0, 1], [1, 2]], dtype=np.int64)
    counts = np.array([0, 1, 2, 2])
    total = rng.standard_normal((4, 2))
    wl = wl_of([[1, 3]])
    scores = scores_of(cand, counts, total)

    s, t = [], []
    for i in range(4):
        for slot in range(counts[i]):
            s.append(total[i, slot])
            j = cand[i, slot]
            t.append(1.0 if {i, j} <= {1, 3} else 0.0)
    s, t = np.array(s), np.array(t)
    per_pair = np.logaddexp(0.0, s) - t * s

    mean_loss = bce_loss(scores, wl, "mean")
    sum_loss = bce_loss(scores, wl, "sum")
    assert mean_loss.data == pytest.approx(per_pair.mean(), abs=1e-12)
    assert sum_loss.data == pytest.approx(per_pair.sum(), abs=1e-12)


def test_bce_with_no_pairs_is_zero():
    scores = scores_of([[0]], [0], [[0.0]])
    assert bce_loss(scores, wl_of([])).data == 0.0


def test_span_ce_uniform_scores_cost_log_m_per_channel():
    for m in (1, 2, 5):
        b = BoundaryScores(scores=ad.constant(np.zeros((m, 2))),
                           sentence=0, head_pos=0)
        loss = span_ce_loss(b, Span(0, 0, m - 1))
        assert loss.data == pytest.approx(2.0 * math.log(m))


def test_span_ce_matches_numpy_recomputation():
    rng = np.random.default_rng(3)
    raw = rng.standard_normal((4, 2))
    b = BoundaryScores(scores=ad.constant(raw), sentence=0, head_pos=2)
    gold = Span(0, 1, 3)
    loss = span_ce_loss(b, gold)

    def lse(v):
        mx = v.max()
        return mx + math.log(np.exp(v - mx).sum())

    expected = (lse(raw[:, 0]) - raw[gold.start, 0]
                + lse(raw[:, 1]) - raw[gold.end, 1])
    assert loss.data == pytest.approx(expected, abs=1e-12)


def test_document_loss_parts_compose():
    doc = synthetic.gradcheck_document()
    wl = to_word_level(doc)
    model = WordCorefModel(SMALL, np.random.default_rng(4))
    total, parts = document_loss(model, doc, wl, alpha=0.5)
    assert parts["total"] == pytest.approx(
        parts["nlml"] + 0.5 * parts["bce"] + parts["span"], abs=1e-9)
    assert total.data == pytest.approx(parts["total"])
    assert parts["nlml"] >= 0.0

    alpha_zero, parts0 = document_loss(model, doc, wl, alpha=0.0)
    assert parts0["total"] == pytest.approx(parts0["nlml"] + parts0["span"],
                                            abs=1e-9)


# -- optimizer and clipping ---------------------------------------------------

def test_adam_first_step_is_a_signed_learning_rate():
    p = ad.Parameter("p", np.array([0.0, 0.0]))
    p.grad = np.array([0.5, -3.0])
    opt = Adam([([p], 0.1)])
    opt.step()
    g = np.array([0.5, -3.0])
    expected = -0.1 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(p.data, expected, atol=1e-12)


def test_adam_constant_gradient_accumulates_linearly():
    p = ad.Parameter("p", np.array([0.0]))
    opt = Adam([([p], 0.01)])
    for _ in range(5):
        p.grad = np.array([2.0])
        opt.step()
    assert p.data[0] == pytest.approx(-0.05, rel=1e-6)


def test_adam_scale_shrinks_the_step():
    p = ad.Parameter("p", np.array([0.0]))
    opt = Adam([([p], 0.1)])
    p.grad = np.array([1.0])
    opt.step(scale=0.25)
    assert p.data[0] == pytest.approx(-0.025, rel=1e-6)


def test_clip_global_norm_scales_jointly():
    a = ad.Parameter("a", np.zeros(1))
    b = ad.Parameter("b", np.zeros(1))
    a.grad = np.array([3.0])
    b.grad = np.array([4.0])
    norm = clip_global_norm([a, b], 1.0)
    assert norm == pytest.approx(5.0)
    assert a.grad[0] == pytest.approx(0.6)
    assert b.grad[0] == pytest.approx(0.8)


def test_clip_global_norm_leaves_small_gradients_alone():
    a = ad.Parameter("a", np.zeros(2))
    a.grad = np.array([0.3, 0.4])
    norm = clip_global_norm([a], 1.0)
    assert norm == pytest.approx(0.5)
    np.testing.assert_array_equal(a.grad, [0.3, 0.4])
    clip_global_norm([a], None)
    np.testing.assert_array_equal(a.grad, [0.3, 0.4])


def test_clip_global_norm_raises_on_non_finite():
    a = ad.Parameter("a", np.zeros(1))
    a.grad = np.array([np.nan])
    with pytest.raises(TrainingDivergedError):
        clip_global_norm([a], 1.0)


# -- dev split ----------------------------------------------------------------

def test_split_dev_zero_fraction_reuses_training_docs():
    docs = list("abcd")
    tr, dev = split_dev(docs, 0.0, np.random.default_rng(0))
    assert tr == docs and dev == docs


def test_split_dev_holds_out_a_disjoint_fraction():
    docs = list(range(10))
    tr, dev = split_dev(docs, 0.1, np.random.default_rng(1))
    assert len(dev) == 1 and len(tr) == 9
    assert set(tr) | set(dev) == set(docs)
    assert set(tr) & set(dev) == set()


def test_split_dev_never_consumes_everything():
    tr, dev = split_dev([1, 2], 0.9, np.random.default_rng(2))
    assert len(dev) == 1 and len(tr) == 1
    tr, dev = split_dev([1], 0.5, np.random.default_rng(3))
    assert tr == [1] and dev == [1]


# -- the loop -----------------------------------------------------------------

def tiny_corpus(n=4, seed=11):
    return synthetic.make_corpus(n, seed=seed)


def tiny_train(docs, out_dir=None, **overrides):
    cfg = dict(epochs=2, dev_split=0.0, seed=5)
    cfg.update(overrides)
    return train(docs, SMALL, TrainConfig(**cfg), out_dir=out_dir)


def test_training_is_bitwise_deterministic():
    docs = tiny_corpus()
    r1 = tiny_train(docs)
    r2 = tiny_train(docs)

    def stripped(history):
        return [{k: v for k, v in rec.items() if k != "seconds"}
                for rec in history]

    assert stripped(r1.history) == stripped(r2.history)
    a1 = r1.model.store.to_arrays()
    a2 = r2.model.store.to_arrays()
    assert set(a1) == set(a2)
    for name in a1:
        assert (a1[name] == a2[name]).all(), name


def test_training_writes_log_and_checkpoints(tmp_path):
    docs = tiny_corpus()
    result = tiny_train(docs, out_dir=tmp_path)
    log_lines = (tmp_path / "train_log.jsonl").read_text().splitlines()
    assert len(log_lines) == 2
    for i, line in enumerate(log_lines, start=1):
        record = json.loads(line)
        assert record["epoch"] == i
        for key in ("nlml", "bce", "span", "total", "lr_scale",
                    "dev_sl_f1", "dev_wl_f1", "dev_span_acc"):
            assert key in record
    assert (tmp_path / "best.ckpt").exists()
    assert (tmp_path / "last.ckpt").exists()

    # the saved best checkpoint reproduces the returned model exactly
    saved = load_ckpt(tmp_path / "best.ckpt")
    current = result.model.store.to_arrays()
    for name, arr in current.items():
        f32 = arr.astype(np.float32).astype(np.float64)
        assert (saved[name] == f32).all(), name


def test_training_keeps_the_best_dev_epoch():
    docs = tiny_corpus(6)
    result = tiny_train(docs, epochs=3)
    best_by_history = max(
        range(len(result.history)),
        key=lambda i: (result.history[i]["dev_sl_f1"], -i)) + 1
    assert result.best_epoch == best_by_history
    assert result.best_metrics["sl_f1"] == pytest.approx(
        result.history[result.best_epoch - 1]["dev_sl_f1"])


def test_lr_scale_follows_the_linear_schedule():
    docs = tiny_corpus(3)
    result = tiny_train(docs, epochs=2)
    total_steps = 2 * len(docs)
    # recorded scale is the one used for the last step of each epoch
    for e, record in enumerate(result.history, start=1):
        last_step = e * len(docs) - 1
        assert record["lr_scale"] == pytest.approx(1.0 - last_step / total_steps)


def test_constant_lr_when_decay_is_disabled():
    docs = tiny_corpus(3)
    result = tiny_train(docs, epochs=2, linear_decay=False)
    assert all(r["lr_scale"] == 1.0 for r in result.history)


def test_early_stopping_keeps_current_weights_and_reports_the_epoch():
    docs = tiny_corpus()
    result = tiny_train(docs, epochs=10, stop_wl_f1=0.0, stop_span_acc=0.0)
    assert result.stopped_early
    assert result.best_epoch == 1
    assert len(result.history) == 1


def test_stop_targets_must_all_be_met():
    docs = tiny_corpus()
    # an unreachable span target keeps training alive for all epochs
    result = tiny_train(docs, epochs=2, stop_wl_f1=0.0, stop_span_acc=1.1)
    assert not result.stopped_early
    assert len(result.history) == 2


@pytest.mark.filterwarnings("ignore:overflow")
def test_training_divergence_is_reported():
    docs = tiny_corpus(3)
    with pytest.raises(TrainingDivergedError):
        tiny_train(docs, epochs=1, lr_task=1e160, lr_encoder=1e160,
                   clip_norm=None)


def test_train_requires_documents():
    with pytest.raises(ValueError):
        tiny_train([])


def test_evaluate_model_reports_unit_interval_scores():
    docs = tiny_corpus(3)
    model = WordCorefModel(SMALL, np.random.default_rng(6))
    wl_map = {d.doc_id: to_word_level(d) for d in docs}
    out = evaluate_model(model, docs, wl_map)
    assert set(out) == {"wl_f1", "sl_f1", "span_acc"}
    for v in out.values():
        assert isinstance(v, float)
        assert 0.0 <= v <= 1.0
