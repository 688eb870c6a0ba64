"""Glue between a RunConfig and the model, training and evaluation code."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .attention import Architecture
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, format_config, parse_config_text
from .dialogue import Dialogue, LabelSet, load_dialogues, load_labels
from .errors import ConfigError
from .metrics import EvalResult, evaluate_predictions
from .model import HeadConfig, InputConfig, TedModel
from .priority import PriorityConfig
from .training import Examples, TrainConfig, TrainHistory, featurize, predict, score, train


def build_model(cfg: RunConfig, n_labels: int, turn_counts: Optional[Sequence[int]] = None) -> TedModel:
    """Fresh model for ``cfg``; ``sigma=auto`` is resolved from ``turn_counts``."""
    arch = Architecture(
        dim=cfg.embed.dim,
        layers=cfg.model.layers,
        heads=cfg.model.heads,
        labels=n_labels,
        output_projection=cfg.attn.output_projection,
        pe=cfg.model.pe,
        ffn=cfg.model.ffn,
        dropout=cfg.model.dropout,
    )
    inputs = InputConfig(
        context=cfg.cust.context,
        max_turns=cfg.cust.max_turns,
        speaker_tokens=cfg.cust.speaker_tokens,
        embed_mode=cfg.embed.mode,
        embed_seed=cfg.embed.seed,
        embed_source=cfg.embed.source,
    )
    prio = None
    if cfg.priority.enabled:
        p = cfg.priority
        prio = PriorityConfig(p.target, p.decay, p.gamma, p.sigma).resolved(turn_counts)
    return TedModel.initialize(arch, cfg.train.seed, inputs, HeadConfig(prio, cfg.attn.mask))


def train_config(cfg: RunConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(t.lr, t.lr_decay, t.patience, t.batch_size, t.max_epochs, t.seed, t.metric)


def resolved_config(cfg: RunConfig, model: TedModel) -> RunConfig:
    """Copy of ``cfg`` with sigma replaced by the numeric value actually used."""
    out = copy.deepcopy(cfg)
    if model.head.priority is not None:
        out.priority.sigma = float(model.head.priority.sigma)
    return out


@dataclass
class TrainResult:
    model: TedModel
    history: TrainHistory
    config: RunConfig
    labels: LabelSet
    dev_metric: float


def run_training(
    cfg: RunConfig,
    train_dialogues: Sequence[Dialogue],
    dev_dialogues: Sequence[Dialogue],
    labels: LabelSet,
) -> TrainResult:
    model = build_model(cfg, len(labels), [len(d) for d in train_dialogues])
    tr = featurize(model, train_dialogues)
    dv = featurize(model, dev_dialogues)
    best, history = train(model, tr, dv, labels, train_config(cfg))
    dev_metric = score(best, dv, labels, cfg.train.metric)
    return TrainResult(best, history, resolved_config(cfg, best), labels, dev_metric)


def require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        if cfg.get(key) is None:
            raise ConfigError(f"missing required config key {key}")


def load_split(path, labels: LabelSet) -> list[Dialogue]:
    return load_dialogues(path, labels)


def save_result(result: TrainResult, checkpoint_path, history_path=None) -> None:
    meta = {
        "config": format_config(result.config),
        "seed": result.config.train.seed,
        "labels": list(result.labels.names),
        "neutral_index": result.labels.neutral_index,
        "dev_metric": result.dev_metric,
        "metric": result.config.train.metric,
    }
    Path(checkpoint_path).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(checkpoint_path, result.model.params, meta)
    if history_path is not None:
        Path(history_path).write_text(json.dumps(result.history.to_json(), indent=1, sort_keys=True) + "\n")


def load_model(checkpoint_path) -> tuple[TedModel, RunConfig, LabelSet, dict]:
    params, meta = load_checkpoint(checkpoint_path)
    cfg = parse_config_text(meta["config"])
    labels = LabelSet(tuple(meta["labels"]), meta["neutral_index"])
    model = build_model(cfg, len(labels))
    model.params = params
    return model, cfg, labels, meta


def evaluate(model: TedModel, dialogues: Sequence[Dialogue], labels: LabelSet) -> tuple[EvalResult, Examples]:
    ex = featurize(model, dialogues)
    return evaluate_predictions(predict(model, ex), ex.gold, labels), ex
