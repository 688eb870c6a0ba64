"""
Turn-priority factors
=====================

How much extra weight each context turn gets, for the three targeting
rules and both decay shapes.
"""

import numpy as np

from ted_erc.priority import SIGMA_PRESETS, PriorityConfig, beta_vector, gamma_t

np.set_printoptions(precision=3, suppress=True)

# A six-turn exchange between two people; we classify turn 4 (speaker 0).
speakers = [0, 1, 0, 1, 0, 1]
current = 4

print("speakers:", speakers, " current turn:", current)
print()

# The bell-shaped decay peaks at 1 + gamma on the current turn and falls
# towards 1 with distance.  Sigma sets how fast.
for name, sigma in SIGMA_PRESETS.items():
    cfg = PriorityConfig("all", "normdist", 2.0, sigma)
    row = [gamma_t(t, current, cfg) for t in range(6)]
    print(f"normdist sigma={sigma:<5} ({name:<11})", np.array(row))
print()

# Targeting decides which turns receive the boost; the rest keep 1.
for target in ("all", "same_speaker", "listener"):
    for decay in ("constant", "normdist"):
        beta = beta_vector(speakers, current, PriorityConfig(target, decay, 2.0, 2.0))
        print(f"{target:<13} {decay:<9}", beta.values)
print()

# sigma="auto" is taken from the training data: the population standard
# deviation of turns per dialogue.
turns_per_dialogue = [4, 9, 12, 6, 7, 15, 3]
print("auto sigma for", turns_per_dialogue, "->",
      round(PriorityConfig(sigma="auto").resolved(turns_per_dialogue).sigma, 3))
