"""Turn-priority attention factors.

Each included turn gets a factor ``beta`` that multiplies its exponentiated
attention score in the last attention layer. ``decay`` shapes the factor by
distance from the current turn; ``target`` restricts which turns receive it
(all turns, turns by the current speaker, or turns by anyone else).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

TARGETS = ("all", "same_speaker", "listener")
DECAYS = ("constant", "normdist")

# Std. of turns per dialogue for the four standard ERC corpora.
SIGMA_PRESETS = {
    "iemocap": 16.8,
    "meld": 5.79,
    "emorynlp": 5.34,
    "dailydialog": 3.99,
}


@dataclass(frozen=True)
class PriorityConfig:
    target: str = "same_speaker"
    decay: str = "normdist"
    gamma: float = 2.0
    sigma: Union[float, str] = "auto"

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"priority target must be one of {TARGETS}")
        if self.decay not in DECAYS:
            raise ValueError(f"priority decay must be one of {DECAYS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if isinstance(self.sigma, str):
            if self.sigma != "auto" and self.sigma not in SIGMA_PRESETS:
                raise ValueError(f"sigma must be a number, 'auto' or one of {sorted(SIGMA_PRESETS)}")
        elif not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def resolved(self, turn_counts: Optional[Sequence[int]] = None) -> "PriorityConfig":
        """Replace a symbolic sigma with a number.

        ``auto`` uses the (population) std of ``turn_counts``.
        """
        if not isinstance(self.sigma, str):
            return self
        if self.sigma in SIGMA_PRESETS:
            value = SIGMA_PRESETS[self.sigma]
        else:
            if not turn_counts:
                raise ValueError("sigma=auto needs the training split's turn counts")
            value = float(np.std(np.asarray(turn_counts, dtype=np.float64)))
            if value <= 0:
                # every dialogue has the same length; fall back to a unit width
                value = 1.0
        return PriorityConfig(self.target, self.decay, self.gamma, value)


@dataclass(frozen=True)
class BetaVector:
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values <= 0):
            raise ValueError("attention factors must be positive")

    def __len__(self):
        return len(self.values)


def gamma_t(t: int, t_c: int, cfg: PriorityConfig) -> float:
    if cfg.decay == "constant":
        return float(cfg.gamma)
    sigma = cfg.sigma
    if isinstance(sigma, str):
        raise ValueError("sigma must be resolved before computing priorities")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 1.0 + cfg.gamma * math.exp(-((t - t_c) ** 2) / (2.0 * sigma**2))


def beta_vector(
    speaker_ids: Sequence[int],
    t_c: int,
    cfg: PriorityConfig,
    turn_indices: Optional[Sequence[int]] = None,
) -> BetaVector:
    """Attention factors for the included turns.

    ``t_c`` is the current turn's position in ``speaker_ids``. Distances are
    measured on ``turn_indices`` (original dialogue positions) when given.
    """
    if not 0 <= t_c < len(speaker_ids):
        raise ValueError("t_c out of range")
    idx = list(turn_indices) if turn_indices is not None else list(range(len(speaker_ids)))
    s_c = speaker_ids[t_c]
    out = np.ones(len(speaker_ids))
    for pos, (s, t) in enumerate(zip(speaker_ids, idx)):
        if cfg.target == "all" or (cfg.target == "same_speaker") == (s == s_c):
            out[pos] = gamma_t(t, idx[t_c], cfg)
    return BetaVector(out)
