"""
From a dialogue to an emotion label
===================================

Follow one prediction through every stage: the multi-turn token sequence,
per-turn mean vectors, the stacked attention layers and the classifier.
"""

import numpy as np

from ted_erc.attention import Architecture
from ted_erc.cust import cust_encode
from ted_erc.dialogue import Dialogue, Turn
from ted_erc.model import HeadConfig, InputConfig, TedModel
from ted_erc.priority import PriorityConfig

np.set_printoptions(precision=3, suppress=True)

dialogue = Dialogue("demo", (
    Turn("Ann", tuple("i lost my keys again".split())),
    Turn("Bob", tuple("oh no where did you last see them".split())),
    Turn("Ann", tuple("no idea this is the worst day".split())),
    Turn("Bob", tuple("let us retrace your steps".split())),
    Turn("Ann", tuple("found them in the fridge".split())),
))
c = 4

arch = Architecture(dim=16, layers=2, heads=4, labels=4)
inputs = InputConfig(context="past_and_future", max_turns=4, speaker_tokens=True)
ted = TedModel.initialize(arch, 1111, inputs, HeadConfig(PriorityConfig("same_speaker", "normdist", 2.0, 2.0)))

# 1. token sequence: past turns end with [TURN]; the current one is wrapped in [SEP]
seq = cust_encode(dialogue, c, inputs.context, inputs.max_turns, inputs.speaker_tokens)
print("tokens:", " ".join(seq.tokens))
print("kept turns:", seq.included_turns, " current position:", seq.current_pos)
print()

# 2. one mean vector per kept turn (markers are not averaged in)
tv = ted.turn_vectors(dialogue, c)
print("turn vectors:", tv.vectors.shape, "speakers", tv.speaker_ids)
print()

# 3. attention maps; the priority factors only enter the last layer
for n, layer in enumerate(ted.attention(dialogue, c)):
    print(f"layer {n}, head 0, row of the current turn:", layer[0, tv.current_pos])
print()

# 4. classifier on the current turn's final vector (weights are untrained here)
pred = ted.predict(dialogue, c)
print("probabilities:", pred.probabilities, " label:", pred.label)

# Without priority factors the last-layer row changes; the other layers do not.
plain = TedModel(arch, ted.params, inputs, HeadConfig())
print("no priority, last layer:", plain.attention(dialogue, c)[-1][0, tv.current_pos])
