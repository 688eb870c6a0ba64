"""Training loop, evaluation and finite-difference gradient checks."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .attention import Prediction, batch_logits, loss_and_grads, softmax_row
from .dialogue import Dialogue, LabelSet
from .errors import DataError, NumericError
from .metrics import metric_value
from .model import Batch, TedModel, make_batch
from .pooling import TurnVectors

log = logging.getLogger(__name__)

METRICS = ("weighted_f1", "micro_f1", "macro_f1", "accuracy")
EVAL_CHUNK = 128


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    lr_decay: float = 0.8
    patience: int = 5
    batch_size: int = 4
    max_epochs: int = 50
    seed: int = 1111
    metric: str = "weighted_f1"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 < self.lr_decay < 1:
            raise ValueError("lr_decay must lie in (0, 1)")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("patience, batch_size and max_epochs must be positive")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    lr: float
    best: bool


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def best_metric(self) -> float:
        return max(e.dev_metric for e in self.epochs)

    def to_json(self) -> dict:
        return {"epochs": [asdict(e) for e in self.epochs], "stopped_early": self.stopped_early}


class PlateauSchedule:
    """Multiply the learning rate by ``decay`` after every non-improving epoch;
    stop once ``patience`` consecutive epochs fail to beat the best score."""

    def __init__(self, lr: float, decay: float = 0.8, patience: int = 5):
        self.lr0 = lr
        self.decay = decay
        self.patience = patience
        self.best = -math.inf
        self.plateaus = 0
        self.stale = 0

    @property
    def lr(self) -> float:
        return self.lr0 * self.decay**self.plateaus

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience

    def update(self, score: float) -> bool:
        if score > self.best:
            self.best = score
            self.stale = 0
            return True
        self.stale += 1
        self.plateaus += 1
        return False


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def cross_entropy(pred: Prediction, gold: int) -> float:
    z = np.asarray(pred.logits, dtype=np.float64)
    if not 0 <= gold < z.size:
        raise ValueError("gold label out of range")
    zmax = z.max()
    return float(zmax + math.log(np.exp(z - zmax).sum()) - z[gold])


# ---------------------------------------------------------------------------
# data preparation


@dataclass
class Examples:
    items: list[TurnVectors]
    gold: np.ndarray

    def __len__(self):
        return len(self.items)


def featurize(model: TedModel, dialogues: Sequence[Dialogue], require_labels=True) -> Examples:
    """One example per labelled turn of every dialogue."""
    items, gold = [], []
    for d in dialogues:
        for c, turn in enumerate(d.turns):
            if turn.label is None:
                if require_labels:
                    continue
                gold.append(-1)
            else:
                gold.append(turn.label)
            items.append(model.turn_vectors(d, c))
    if not items:
        raise DataError("no labelled turns")
    return Examples(items, np.asarray(gold, dtype=np.int64))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TED_THREADS", "1")))
    except ValueError:
        return 1


def predict_logits(model: TedModel, examples: Examples, threads: Optional[int] = None) -> np.ndarray:
    """Logits for every example, in example order.

    Chunks have a fixed shape (rows and turns padded), so results do not
    depend on how many workers run them.
    """
    n = len(examples)
    M = max(len(tv) for tv in examples.items)

    def run(lo):
        chunk = examples.items[lo : lo + EVAL_CHUNK]
        batch = make_batch(chunk, model.head, pad_to=M, pad_rows=EVAL_CHUNK - len(chunk))
        return batch_logits(model.params, model.arch, batch.X, batch.allowed, batch.cur, batch.log_beta)[: len(chunk)]

    starts = range(0, n, EVAL_CHUNK)
    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts)


def predict(model: TedModel, examples: Examples, threads: Optional[int] = None) -> np.ndarray:
    return np.argmax(predict_logits(model, examples, threads), axis=1)


def score(model: TedModel, examples: Examples, labels: LabelSet, metric: str) -> float:
    return metric_value(metric, predict(model, examples), examples.gold, labels)


# ---------------------------------------------------------------------------


def train(
    model: TedModel,
    train_set: Examples,
    dev_set: Examples,
    labels: LabelSet,
    cfg: TrainConfig,
) -> tuple[TedModel, TrainHistory]:
    """Adam over seeded shuffled mini-batches with plateau decay and early stopping.

    The returned model carries the parameters of the best dev epoch.
    """
    if len(train_set) == 0 or len(dev_set) == 0:
        raise DataError("training and dev splits must be nonempty")
    params = {k: v.copy() for k, v in model.params.items()}
    opt = Adam(params)
    sched = PlateauSchedule(cfg.lr, cfg.lr_decay, cfg.patience)
    shuffle_rng = np.random.default_rng([cfg.seed, 0])
    dropout_rng = np.random.default_rng([cfg.seed, 1])
    history = TrainHistory()
    best_params = params
    work = TedModel(model.arch, params, model.inputs, model.head)
    n = len(train_set)

    for epoch in range(cfg.max_epochs):
        lr = sched.lr
        order = shuffle_rng.permutation(n)
        total = 0.0
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            batch = make_batch([train_set.items[i] for i in idx], model.head, gold=train_set.gold[idx])
            loss, grads = loss_and_grads(
                params, model.arch, batch.X, batch.allowed, batch.cur, batch.gold,
                batch.log_beta, train=True, rng=dropout_rng,
            )
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch} batch {bi}")
            opt.step(params, grads, lr)
            total += loss * len(idx)
        dev = score(work, dev_set, labels, cfg.metric)
        improved = sched.update(dev)
        if improved:
            best_params = {k: v.copy() for k, v in params.items()}
        history.epochs.append(EpochRecord(epoch, total / n, dev, lr, improved))
        log.info("epoch %d loss %.5f dev %s %.5f lr %.3g%s", epoch, total / n, cfg.metric, dev, lr, " *" if improved else "")
        if sched.should_stop:
            history.stopped_early = True
            break

    return TedModel(model.arch, best_params, model.inputs, model.head), history


# ---------------------------------------------------------------------------


def batch_loss(model: TedModel, batch: Batch) -> float:
    loss, _ = loss_and_grads(
        model.params, model.arch, batch.X, batch.allowed, batch.cur, batch.gold, batch.log_beta
    )
    return loss


def grad_check(model: TedModel, batch: Batch, h: float = 1e-5, tol: float = 1e-4) -> dict:
    """Compare analytic gradients with central differences on every tensor.

    The error per tensor is ``|a - n|_2 / (|a|_2 + |n|_2)``, which stays
    meaningful when individual entries are near zero. Dropout is off.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    params = model.params
    _, grads = loss_and_grads(params, model.arch, batch.X, batch.allowed, batch.cur, batch.gold, batch.log_beta)
    report = {}
    for name in sorted(params):
        w = params[name]
        numeric = np.zeros_like(w)
        flat, nflat = w.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = batch_loss(model, batch)
            flat[i] = keep - h
            down = batch_loss(model, batch)
            flat[i] = keep
            nflat[i] = (up - down) / (2 * h)
        a = grads[name]
        denom = np.linalg.norm(a) + np.linalg.norm(numeric)
        err = float(np.linalg.norm(a - numeric) / denom) if denom > 0 else 0.0
        report[name] = {"rel_error": err, "abs_error": float(np.max(np.abs(a - numeric))), "ok": err < tol}
    return report
