"""Multi-turn input sequences with turn-break and current-turn markers."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .dialogue import Dialogue
from .errors import DataError

TURN = "[TURN]"
SEP = "[SEP]"
CONTEXT_MODES = ("past", "past_and_future")
RESERVED_SPEAKER_TOKENS = 8

_SPK_RE = re.compile(r"^\[SPK(\d+)\]$")


def speaker_token(k: int) -> str:
    return f"[SPK{k}]"


def is_marker(token: str) -> bool:
    return token in (TURN, SEP) or _SPK_RE.match(token) is not None


@dataclass(frozen=True)
class CustSequence:
    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]
    included_turns: tuple[int, ...]
    current_pos: int

    @property
    def current_turn(self) -> int:
        return self.included_turns[self.current_pos]

    def utterance(self, pos: int) -> tuple[str, ...]:
        lo, hi = self.spans[pos]
        return self.tokens[lo:hi]

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "spans": [list(s) for s in self.spans],
            "included_turns": list(self.included_turns),
            "current_pos": self.current_pos,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False)


def window(m: int, c: int, context: str, max_turns: Optional[int]) -> list[int]:
    """Turn indices kept around current turn ``c`` of an ``m``-turn dialogue.

    Over budget, past turns go first (oldest first), then future turns
    (most distant first). The current turn is never dropped.
    """
    if context not in CONTEXT_MODES:
        raise ValueError(f"context must be one of {CONTEXT_MODES}, got {context!r}")
    if max_turns is not None and max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    past = list(range(c))
    future = list(range(c + 1, m)) if context == "past_and_future" else []
    if max_turns is not None:
        excess = len(past) + 1 + len(future) - max_turns
        if excess > 0:
            cut = min(excess, len(past))
            past = past[cut:]
            excess -= cut
        if excess > 0:
            future = future[: len(future) - excess]
    return past + [c] + future


def cust_encode(
    dialogue: Dialogue,
    c: int,
    context: str = "past",
    max_turns: Optional[int] = None,
    insert_speaker_tokens: bool = False,
) -> CustSequence:
    m = len(dialogue.turns)
    if not 0 <= c < m:
        raise DataError(f"current turn {c} out of range for dialogue {dialogue.id!r} with {m} turns")
    included = window(m, c, context, max_turns)
    tokens: list[str] = []
    spans = []
    for t in included:
        if t == c:
            tokens.append(SEP)
        if insert_speaker_tokens:
            tokens.append(speaker_token(dialogue.speaker_ids[t]))
        lo = len(tokens)
        tokens.extend(dialogue.turns[t].tokens)
        spans.append((lo, len(tokens)))
        if t == c:
            tokens.append(SEP)
        tokens.append(TURN)
    return CustSequence(tuple(tokens), tuple(spans), tuple(included), included.index(c))


def vocabulary(sequences: Sequence[CustSequence]) -> dict[str, int]:
    """Token-to-id map; markers take the low ids, words follow in sorted order."""
    n_spk = RESERVED_SPEAKER_TOKENS
    words = set()
    for seq in sequences:
        for tok in seq.tokens:
            m = _SPK_RE.match(tok)
            if m:
                n_spk = max(n_spk, int(m.group(1)) + 1)
            elif tok not in (TURN, SEP):
                words.add(tok)
    reserved = [TURN, SEP] + [speaker_token(k) for k in range(n_spk)]
    vocab = {tok: i for i, tok in enumerate(reserved)}
    for w in sorted(words):
        vocab[w] = len(vocab)
    return vocab
