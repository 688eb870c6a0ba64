import math

import numpy as np
import pytest

import reference as ref
from conftest import random_dialogue
from ted_erc.attention import Architecture, Prediction, loss_and_grads
from ted_erc.dialogue import LabelSet
from ted_erc.errors import NumericError
from ted_erc.model import HeadConfig, InputConfig, TedModel, make_batch
from ted_erc.priority import PriorityConfig
from ted_erc.training import (
    PlateauSchedule,
    TrainConfig,
    batch_loss,
    cross_entropy,
    featurize,
    grad_check,
    predict_logits,
    score,
    train,
)

LABELS4 = LabelSet(("a", "b", "c", "d"))
TED_HEAD = HeadConfig(PriorityConfig("same_speaker", "normdist", 2.0, 3.0))


def pred(logits):
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return Prediction(e / e.sum(), z)


# --- loss


def test_cross_entropy_uniform():
    assert cross_entropy(pred(np.zeros(6)), 3) == pytest.approx(1.79175946922805500081, abs=1e-15)


def test_cross_entropy_certain():
    assert cross_entropy(pred([0.0, 800.0, 0.0]), 1) == 0.0


def test_cross_entropy_matches_oracle():
    rng = np.random.default_rng(12)
    for _ in range(100):
        z = rng.standard_normal(int(rng.integers(2, 8))) * 5
        g = int(rng.integers(len(z)))
        assert cross_entropy(pred(z), g) == pytest.approx(ref.log_sum_exp_ce(z.tolist(), g), abs=1e-12)
    with pytest.raises(ValueError):
        cross_entropy(pred([0.0, 1.0]), 2)


def examples(n_dialogues, seed=0, head=None, dim=16, max_turns=4, arch_seed=1111, **arch_kw):
    rng = np.random.default_rng(seed)
    ds = [random_dialogue(rng, int(rng.integers(1, 7)), did=f"d{i}") for i in range(n_dialogues)]
    arch = Architecture(dim=dim, layers=2, heads=4, labels=4, **arch_kw)
    model = TedModel.initialize(arch, arch_seed, InputConfig(max_turns=max_turns), head or HeadConfig())
    return model, featurize(model, ds)


def test_bias_gradient_is_probability_minus_onehot():
    model, ex = examples(3, dropout=0.0)
    tv, g = ex.items[0], int(ex.gold[0])
    batch = make_batch([tv], model.head, gold=[g])
    _, grads = loss_and_grads(model.params, model.arch, batch.X, batch.allowed, batch.cur, batch.gold, batch.log_beta)
    p = predict_logits(model, type(ex)([tv], ex.gold[:1]))[0]
    p = np.exp(p - p.max())
    p /= p.sum()
    np.testing.assert_allclose(grads["cls.b"], p - np.eye(4)[g], rtol=0, atol=1e-12)


def test_batch_loss_is_mean_of_example_losses():
    model, ex = examples(4)
    batch = make_batch(ex.items, model.head, gold=ex.gold)
    per = [cross_entropy(model_pred, int(g)) for model_pred, g in
           zip((pred(z) for z in predict_logits(model, ex)), ex.gold)]
    assert batch_loss(model, batch) == pytest.approx(float(np.mean(per)), abs=1e-12)


# --- schedule


def test_one_plateau_step():
    s = PlateauSchedule(2e-6, 0.8, patience=5)
    s.update(0.5)
    s.update(0.4)
    assert s.lr == pytest.approx(1.6e-6, abs=1e-21)


def test_three_plateaus_and_stop():
    s = PlateauSchedule(2e-6, 0.8, patience=5)
    for score_ in (0.5, 0.4, 0.6, 0.5, 0.7, 0.6, 0.8):
        s.update(score_)
    assert s.lr == 2e-6 * 0.8**3
    assert abs(s.lr - 1.024e-6) < 1e-18
    for k in range(1, 6):
        assert not s.should_stop
        s.update(0.1)
    assert s.should_stop and s.stale == 5


# --- training loop


def quick_cfg(**kw):
    base = dict(lr=1e-2, lr_decay=0.8, patience=3, batch_size=8, max_epochs=6, seed=1111, metric="accuracy")
    base.update(kw)
    return TrainConfig(**base)


def test_overfits_single_batch():
    model, ex = examples(12, seed=3, dropout=0.0)
    assert len(ex) >= 20
    ex.items, ex.gold = ex.items[:20], ex.gold[:20]
    initial = batch_loss(model, make_batch(ex.items, model.head, gold=ex.gold))
    _, hist = train(model, ex, ex, LABELS4, quick_cfg(batch_size=20, max_epochs=200, patience=1000, lr_decay=0.999))
    assert hist.epochs[-1].train_loss < 0.1 * initial


def test_identical_seed_identical_history():
    model, tr = examples(20, seed=4, head=TED_HEAD)
    _, dev = examples(8, seed=5, head=TED_HEAD)
    _, h1 = train(model, tr, dev, LABELS4, quick_cfg())
    _, h2 = train(model, tr, dev, LABELS4, quick_cfg())
    assert h1.to_json() == h2.to_json()
    lrs = [e.lr for e in h1.epochs]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_best_model_reproduces_dev_metric():
    model, tr = examples(20, seed=6, head=TED_HEAD)
    _, dev = examples(8, seed=7, head=TED_HEAD)
    best, hist = train(model, tr, dev, LABELS4, quick_cfg(metric="weighted_f1"))
    assert score(best, dev, LABELS4, "weighted_f1") == hist.best_metric
    assert sum(e.best for e in hist.epochs) >= 1


def test_non_finite_loss_aborts():
    model, tr = examples(5)
    model.params["cls.w"][...] = np.nan
    with pytest.raises(NumericError, match="epoch 0 batch 0"):
        train(model, tr, tr, LABELS4, quick_cfg())


def test_eval_thread_count_invariant():
    model, ex = examples(120, seed=8, head=TED_HEAD)
    assert len(ex) > 2 * 128
    one = predict_logits(model, ex, threads=1)
    four = predict_logits(model, ex, threads=4)
    assert one.tobytes() == four.tobytes()


# --- gradients


@pytest.mark.parametrize(
    "head, arch_kw",
    [
        (HeadConfig(), {}),
        (TED_HEAD, {}),
        (HeadConfig(PriorityConfig("listener", "constant", 2.0, 1.0), "same_speaker_only"), {"output_projection": False}),
        (HeadConfig(None, "listener_only"), {"pe": True, "ffn": True}),
    ],
)
def test_gradients_match_central_differences(head, arch_kw):
    model, ex = examples(2, seed=9, head=head, dim=8, dropout=0.0, **arch_kw)
    batch = make_batch(ex.items[:3], model.head, gold=ex.gold[:3])
    report = grad_check(model, batch)
    worst = max(r["rel_error"] for r in report.values())
    assert worst < 1e-6, report


def test_last_layer_query_gradient_nonzero_with_priority():
    model, ex = examples(3, seed=10, head=TED_HEAD, dropout=0.0)
    items = [tv for tv in ex.items if len(tv) > 1][:4]
    batch = make_batch(items, model.head, gold=[0] * len(items))
    _, grads = loss_and_grads(model.params, model.arch, batch.X, batch.allowed, batch.cur, batch.gold, batch.log_beta)
    assert np.abs(grads["layer1.wq"]).max() > 1e-8
    assert math.isfinite(float(np.abs(grads["layer1.wq"]).sum()))
