"""Synthetic dialogues whose labels live in the speaker's own history.

Every turn carries filler words plus one cue word ``cue<k>``. A speaker's
first turn is labelled by its own cue. Later turns copy the cue of that
speaker's most recent earlier turn with probability ``cue_strength`` and use
their own cue otherwise. A turn's own cue is always drawn different from
the speaker's previous cue, so the two sources never coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dialogue import Dialogue, LabelSet, Turn, remap_speaker_ids, save_dialogues, save_labels


@dataclass(frozen=True)
class SynthConfig:
    dialogues: int = 2000
    dev_dialogues: int = 300
    test_dialogues: int = 300
    turns_mean: float = 8.0
    turns_std: float = 3.0
    speakers: int = 2
    labels: int = 4
    cue_strength: float = 0.9
    vocab_size: int = 200
    min_words: int = 2
    max_words: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.cue_strength <= 1.0:
            raise ValueError("cue_strength must lie in [0, 1]")
        for name in ("dialogues", "speakers", "labels", "vocab_size", "turns_mean", "max_words"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.labels < 2:
            raise ValueError("need at least two labels")
        if self.turns_std < 0 or self.min_words < 0 or self.min_words > self.max_words:
            raise ValueError("invalid turn/word count settings")


@dataclass(frozen=True)
class SynthData:
    train: list[Dialogue]
    dev: list[Dialogue]
    test: list[Dialogue]
    labels: LabelSet


def label_set(n: int) -> LabelSet:
    return LabelSet(tuple(f"emo{k}" for k in range(n)))


def cue_token(k: int) -> str:
    return f"cue{k}"


def _dialogue(rng: np.random.Generator, cfg: SynthConfig, did: str) -> Dialogue:
    m = max(1, int(round(rng.normal(cfg.turns_mean, cfg.turns_std))))
    names = [f"p{x}" for x in rng.choice(10 * cfg.speakers, size=cfg.speakers, replace=False)]
    last_cue: dict[str, int] = {}
    turns = []
    for _ in range(m):
        spk = names[int(rng.integers(cfg.speakers))]
        prev = last_cue.get(spk)
        if prev is None:
            own = int(rng.integers(cfg.labels))
        else:
            own = int(rng.integers(cfg.labels - 1))
            own += own >= prev
        label = prev if prev is not None and rng.random() < cfg.cue_strength else own
        n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
        words = [f"w{x}" for x in rng.integers(cfg.vocab_size, size=n_words)]
        words.insert(int(rng.integers(n_words + 1)), cue_token(own))
        turns.append(Turn(spk, tuple(words), label))
        last_cue[spk] = own
    return remap_speaker_ids(Dialogue(did, tuple(turns)))


def generate(cfg: SynthConfig) -> SynthData:
    rng = np.random.default_rng(cfg.seed)
    splits = []
    for name, n in (("train", cfg.dialogues), ("dev", cfg.dev_dialogues), ("test", cfg.test_dialogues)):
        splits.append([_dialogue(rng, cfg, f"{name}-{i:05d}") for i in range(n)])
    return SynthData(*splits, label_set(cfg.labels))


def history_source(dialogue: Dialogue) -> list:
    """Per turn: the cue of the speaker's previous turn, or None."""
    last: dict[int, int] = {}
    out = []
    for spk, turn in zip(dialogue.speaker_ids, dialogue.turns):
        out.append(last.get(spk))
        last[spk] = own_cue(turn)
    return out


def own_cue(turn: Turn) -> int:
    for tok in turn.tokens:
        if tok.startswith("cue"):
            return int(tok[3:])
    raise ValueError("turn has no cue token")


def write_splits(data: SynthData, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in ("train", "dev", "test"):
        paths[name] = out / f"{name}.jsonl"
        save_dialogues(paths[name], getattr(data, name), data.labels)
    paths["labels"] = out / "labels.txt"
    save_labels(paths["labels"], data.labels)
    return paths
