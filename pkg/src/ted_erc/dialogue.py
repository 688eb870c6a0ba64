"""Dialogue containers, label sets and JSONL ingestion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataError


@dataclass(frozen=True)
class Turn:
    speaker: str
    tokens: tuple[str, ...]
    label: Optional[int] = None

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise DataError(f"turn by {self.speaker!r} has no tokens")


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]
    speaker_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if len(self.turns) == 0:
            raise DataError(f"dialogue {self.id!r} has no turns")
        if not self.speaker_ids:
            object.__setattr__(self, "speaker_ids", _dense_ids(t.speaker for t in self.turns))
        elif len(self.speaker_ids) != len(self.turns):
            raise DataError(f"dialogue {self.id!r}: speaker_ids/turns length mismatch")

    def __len__(self):
        return len(self.turns)


@dataclass(frozen=True)
class LabelSet:
    names: tuple[str, ...]
    neutral_index: Optional[int] = None

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("label names must be unique")
        if self.neutral_index is not None and not 0 <= self.neutral_index < len(self.names):
            raise DataError(f"neutral_index {self.neutral_index} out of range")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown label {name!r}") from None


def _dense_ids(speakers: Iterable[str]) -> tuple[int, ...]:
    seen: dict[str, int] = {}
    return tuple(seen.setdefault(s, len(seen)) for s in speakers)


def remap_speaker_ids(dialogue: Dialogue) -> Dialogue:
    """Assign speaker ids 0, 1, ... by first appearance within this dialogue."""
    return replace(dialogue, speaker_ids=_dense_ids(t.speaker for t in dialogue.turns))


def parse_dialogue(obj: dict, labels: Optional[LabelSet]) -> Dialogue:
    if not isinstance(obj, dict) or "turns" not in obj:
        raise DataError("dialogue object needs a 'turns' list")
    turns = []
    for k, t in enumerate(obj["turns"]):
        if "speaker" not in t:
            raise DataError(f"turn {k} has no speaker")
        if t.get("tokens") is not None:
            tokens = tuple(str(x) for x in t["tokens"])
        else:
            tokens = tuple(str(t.get("text", "")).split())
        if not tokens:
            raise DataError(f"turn {k} is empty")
        lab = t.get("label")
        turns.append(Turn(str(t["speaker"]), tokens, None if lab is None or labels is None else labels.index(lab)))
    return remap_speaker_ids(Dialogue(str(obj.get("id", "")), tuple(turns)))


def load_dialogues(path, labels: Optional[LabelSet]) -> list[Dialogue]:
    """Read one dialogue per JSONL line, in file order.

    With ``labels=None`` gold labels are ignored (inference only).
    Errors carry the 1-based line number. Blank lines are skipped.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            try:
                out.append(parse_dialogue(obj, labels))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def dialogue_to_json(d: Dialogue, labels: LabelSet) -> dict:
    return {
        "id": d.id,
        "turns": [
            {
                "speaker": t.speaker,
                "text": " ".join(t.tokens),
                "tokens": list(t.tokens),
                "label": None if t.label is None else labels.names[t.label],
            }
            for t in d.turns
        ],
    }


def save_dialogues(path, dialogues: Sequence[Dialogue], labels: LabelSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(json.dumps(dialogue_to_json(d, labels), ensure_ascii=False))
            fh.write("\n")


def load_labels(path) -> LabelSet:
    names, neutral = [], None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("!neutral"):
            neutral = line[len("!neutral"):].strip()
            continue
        names.append(line)
    if neutral is not None and neutral not in names:
        raise DataError(f"neutral label {neutral!r} is not in the label list")
    return LabelSet(tuple(names), None if neutral is None else names.index(neutral))


def save_labels(path, labels: LabelSet) -> None:
    lines = list(labels.names)
    if labels.neutral_index is not None:
        lines.append(f"!neutral {labels.names[labels.neutral_index]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def labeled_turns(dialogues: Sequence[Dialogue]) -> list[tuple[int, int]]:
    """(dialogue index, turn index) for every turn carrying a gold label."""
    return [(i, c) for i, d in enumerate(dialogues) for c, t in enumerate(d.turns) if t.label is not None]
