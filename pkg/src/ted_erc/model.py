"""End-to-end model: sequence building, embedding, pooling, attention, classifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .attention import (
    Architecture,
    Params,
    Prediction,
    attention_maps,
    batch_logits,
    column_mask,
    init_params,
    softmax_row,
    stack_forward,
)
from .cust import cust_encode
from .dialogue import Dialogue
from .embedding import embed
from .pooling import TurnVectors, pool_turns
from .priority import PriorityConfig, beta_vector


@dataclass(frozen=True)
class InputConfig:
    context: str = "past"
    max_turns: Optional[int] = None
    speaker_tokens: bool = False
    embed_mode: str = "hash"
    embed_seed: int = 0
    embed_source: Optional[str] = None


@dataclass(frozen=True)
class HeadConfig:
    """Everything above the turn vectors besides parameter tensors."""

    priority: Optional[PriorityConfig] = None  # None: plain turn-based attention
    mask: str = "all"


@dataclass
class TedModel:
    arch: Architecture
    params: Params
    inputs: InputConfig = field(default_factory=InputConfig)
    head: HeadConfig = field(default_factory=HeadConfig)

    @classmethod
    def initialize(cls, arch, seed, inputs=None, head=None) -> "TedModel":
        rng = np.random.default_rng(seed)
        return cls(arch, init_params(arch, rng), inputs or InputConfig(), head or HeadConfig())

    def turn_vectors(self, dialogue: Dialogue, c: int) -> TurnVectors:
        cfg = self.inputs
        seq = cust_encode(dialogue, c, cfg.context, cfg.max_turns, cfg.speaker_tokens)
        emb = embed(seq, cfg.embed_mode, self.arch.dim, cfg.embed_seed, cfg.embed_source)
        return pool_turns(emb, seq, dialogue.speaker_ids)

    def predict(self, dialogue: Dialogue, c: int) -> Prediction:
        batch = make_batch([self.turn_vectors(dialogue, c)], self.head)
        logits = batch_logits(self.params, self.arch, batch.X, batch.allowed, batch.cur, batch.log_beta)[0]
        return Prediction(softmax_row(logits), logits)

    def attention(self, dialogue: Dialogue, c: int) -> list[np.ndarray]:
        """Normalized attention per layer, each (J, m', m')."""
        batch = make_batch([self.turn_vectors(dialogue, c)], self.head)
        _, caches = stack_forward(self.params, self.arch, batch.X, batch.allowed, batch.log_beta)
        return [a[0] for a in attention_maps(caches)]


def forward(dialogue: Dialogue, c: int, model: TedModel) -> Prediction:
    return model.predict(dialogue, c)


@dataclass
class Batch:
    X: np.ndarray
    allowed: np.ndarray
    cur: np.ndarray
    log_beta: Optional[np.ndarray]
    gold: Optional[np.ndarray] = None

    def __len__(self):
        return self.X.shape[0]


def make_batch(
    items: Sequence[TurnVectors],
    head: HeadConfig,
    gold: Optional[Sequence[int]] = None,
    pad_to: Optional[int] = None,
    pad_rows: int = 0,
) -> Batch:
    """Pad turn-vector lists into one batch.

    ``pad_rows`` appends dummy single-turn rows so chunk shapes can be kept
    fixed; callers drop their outputs.
    """
    M = max(len(tv) for tv in items)
    if pad_to is not None:
        M = max(M, pad_to)
    B, d = len(items) + pad_rows, items[0].vectors.shape[1]
    X = np.zeros((B, M, d))
    allowed = np.zeros((B, M), dtype=bool)
    allowed[:, 0] = True
    cur = np.zeros(B, dtype=np.int64)
    log_beta = np.zeros((B, M)) if head.priority is not None else None
    for b, tv in enumerate(items):
        m = len(tv)
        X[b, :m] = tv.vectors
        allowed[b, :m] = column_mask(tv.speaker_ids, tv.current_pos, head.mask)
        cur[b] = tv.current_pos
        if log_beta is not None:
            beta = beta_vector(tv.speaker_ids, tv.current_pos, head.priority, tv.positions)
            log_beta[b, :m] = np.log(beta.values)
    g = None if gold is None else np.concatenate([np.asarray(gold, dtype=np.int64), np.zeros(pad_rows, np.int64)])
    return Batch(X, allowed, cur, log_beta, g)
