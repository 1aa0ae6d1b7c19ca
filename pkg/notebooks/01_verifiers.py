"""
Scoring constructions
=====================

Each environment turns a candidate into a certified bound and a positive
reward. Start with the flat constructions every run is seeded with.
"""

import numpy as np

from discover import verify_ac1, verify_ac2, verify_circle_packing, verify_erdos

# A flat step function is the usual starting point for the autoconvolution problems.
flat = np.ones(200)
print("AC1 flat:", verify_ac1(flat))
print("AC2 flat:", verify_ac2(np.ones(1024)))

# The minimum overlap problem wants heights in [0, 1] that integrate to one.
print("Erdos flat:", verify_erdos(np.full(200, 0.5)))

# AC1 only cares about shape, not scale.
rng = np.random.default_rng(0)
h = rng.random(64)
print("scale check:", verify_ac1(h).bound, verify_ac1(37.0 * h).bound)

# A tapered profile already beats the flat one.
x = np.linspace(-1, 1, 200)
taper = 1.0 / np.sqrt(1.05 - x ** 2)
print("AC1 taper:", verify_ac1(taper).bound)

# Invalid inputs are rejected with a reason, never with an exception.
print(verify_ac1([0.001, 0.002]))
print(verify_circle_packing([(0.5, 0.5, 0.5), (0.5, 0.5, 0.1)], 2))
print(verify_circle_packing([(0.25, 0.25, 0.25), (0.75, 0.75, 0.25)], 2))
