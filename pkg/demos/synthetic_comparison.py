"""
Does same-speaker history help?
===============================

A small version of the synthetic experiment: labels mostly copy a cue word
from the speaker's own previous turn, so a model that only sees the current
turn is stuck near chance while context models can recover the label.

Runs in about a minute on one core.  Use the acceptance suite for the full
five-seed version.
"""

from ted_erc.attention import Architecture
from ted_erc.model import HeadConfig, InputConfig, TedModel
from ted_erc.priority import PriorityConfig
from ted_erc.synthetic import SynthConfig, generate
from ted_erc.training import TrainConfig, featurize, score, train

data = generate(SynthConfig(dialogues=600, dev_dialogues=100, test_dialogues=150, seed=0))
print("train dialogues:", len(data.train), " labels:", data.labels.names)

first = data.train[0]
for turn in first.turns[:4]:
    print(f"  {turn.speaker}: {' '.join(turn.tokens):<32} -> {data.labels.names[turn.label]}")
print()

counts = [len(d) for d in data.train]
variants = [
    ("current turn only", 1, None),
    ("context, plain attention", 4, None),
    ("context, speaker priority", 4, PriorityConfig("same_speaker", "normdist", 2.0, "auto").resolved(counts)),
]
cfg = TrainConfig(lr=3e-3, batch_size=32, max_epochs=30, patience=5, seed=1111, metric="accuracy")

for name, max_turns, prio in variants:
    model = TedModel.initialize(Architecture(dim=32, layers=2, heads=4, labels=4), 1111,
                                InputConfig(max_turns=max_turns), HeadConfig(prio))
    tr, dv, te = (featurize(model, s) for s in (data.train, data.dev, data.test))
    best, hist = train(model, tr, dv, data.labels, cfg)
    acc = score(best, te, data.labels, "accuracy")
    print(f"{name:<27} epochs {len(hist.epochs):>2}  test accuracy {acc:.3f}")
