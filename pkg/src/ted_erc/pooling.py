from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cust import CustSequence
from .embedding import TokenEmbeddings
from .errors import DataError


@dataclass(frozen=True)
class TurnVectors:
    vectors: np.ndarray  # (m', d)
    current_pos: int
    speaker_ids: tuple[int, ...]
    turn_indices: Optional[tuple[int, ...]] = None  # original dialogue indices

    def __post_init__(self):
        m = self.vectors.shape[0]
        if m < 1 or not 0 <= self.current_pos < m:
            raise ValueError("TurnVectors needs m' >= 1 and a valid current_pos")
        if len(self.speaker_ids) != m:
            raise ValueError("speaker_ids must have one entry per turn vector")

    @property
    def positions(self) -> tuple[int, ...]:
        return self.turn_indices if self.turn_indices is not None else tuple(range(len(self)))

    def __len__(self):
        return self.vectors.shape[0]


def pool_turns(emb: TokenEmbeddings, seq: CustSequence, speaker_ids: Sequence[int]) -> TurnVectors:
    """Mean of the token vectors inside each turn's utterance span.

    ``speaker_ids`` is indexed by original dialogue turn; only the included
    turns are kept.
    """
    if len(emb) != len(seq.tokens):
        raise DataError(f"{len(emb)} token vectors for {len(seq.tokens)} tokens")
    rows = []
    for pos, (lo, hi) in enumerate(seq.spans):
        if hi <= lo:
            raise DataError(f"empty utterance span at included position {pos}")
        rows.append(emb.vectors[lo:hi].mean(axis=0))
    return TurnVectors(
        np.stack(rows),
        seq.current_pos,
        tuple(int(speaker_ids[t]) for t in seq.included_turns),
        tuple(seq.included_turns),
    )
