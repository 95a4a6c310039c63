"""
Instance-based memory: activation, retrieval and blending
=========================================================

How an IBL learner turns a handful of remembered outcomes into one value
per action, and why the most recent and most frequent outcomes dominate.
"""

import math

import numpy as np

from ibl_delegation.ibl import IBLMemory, IBLParams, base_activation, retrieval_probabilities

params = IBLParams(d=0.5, sigma=0.0, tau=0.25 * math.sqrt(2))

# Two outcomes for the same action: a bad one long ago, a good one just now.
memory = IBLMemory(params)
memory.record(("cell", "right", -50.0), 2)
memory.record(("cell", "right", 90.0), 9)

now = 10
acts = [base_activation(r, now, params) for r in memory.matching("cell", "right")]
print("activations:", np.round(acts, 4))
print("retrieval p:", np.round(retrieval_probabilities(acts, params.tau), 4))
print("blended value:", round(memory.blend("cell", "right", now), 3))

# Activation fades as a power law of age.
for later in (10, 20, 50, 200):
    print(f"t={later:>3}: blended value {memory.blend('cell', 'right', later):8.3f}")

# Only the first and five latest sightings of an instance are stored; older
# ones are folded into a closed-form tail. Compare with the full history.
times = list(range(1, 61))
full = math.log(sum((61 - t) ** -0.5 for t in times))
m = IBLMemory(params)
for t in times:
    m.record(("cell", "up", 1.0), t)
(rec,) = m.matching("cell", "up")
print(f"full history {full:.4f}, bounded storage {base_activation(rec, 61, params):.4f}")

# With noise switched on, each read redraws the activation noise, so a
# blend of several outcomes wobbles around its noise-free value. A lone
# instance always blends to its own outcome.
noisy = IBLMemory(IBLParams())
noisy.record(("cell", "left", 0.0), 1)
noisy.record(("cell", "left", 100.0), 2)
noisy.record(("cell", "down", 60.0), 3)
rng = np.random.default_rng(0)
draws = np.array([noisy.blend("cell", "left", 4, rng) for _ in range(1000)])
print(f"left: mean {draws.mean():.2f}, sd {draws.std():.2f}; down: {noisy.blend('cell', 'down', 4, rng)}")
picks = [noisy.choose("cell", ["left", "down"], 4, rng) for _ in range(1000)]
print({a: picks.count(a) for a in ("left", "down")})
