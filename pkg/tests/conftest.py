import numpy as np
import pytest

from ted_erc.dialogue import Dialogue, LabelSet, Turn


def make_dialogue(speakers, utterances=None, labels=None, did="d"):
    if utterances is None:
        utterances = [[f"u{t}a", f"u{t}b"] for t in range(len(speakers))]
    if labels is None:
        labels = [None] * len(speakers)
    turns = tuple(Turn(s, tuple(u), lab) for s, u, lab in zip(speakers, utterances, labels))
    return Dialogue(did, turns)


def random_dialogue(rng, m, n_speakers=2, n_labels=4, vocab=30, did="r"):
    speakers = [f"s{int(k)}" for k in rng.integers(n_speakers, size=m)]
    utts = [[f"w{int(x)}" for x in rng.integers(vocab, size=int(rng.integers(1, 6)))] for _ in range(m)]
    labels = [int(x) for x in rng.integers(n_labels, size=m)]
    return make_dialogue(speakers, utts, labels, did)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def four_labels():
    return LabelSet(("anger", "joy", "neutral", "sad"), neutral_index=2)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
