"""
Tilted weights and the temperature budget
=========================================

A group of rewards is reweighted by ``exp(beta * r)``. The temperature is
picked so that the reweighted distribution sits ln 2 nats from uniform.
"""

import math

import numpy as np

from discover.entropic import (
    adaptive_advantages,
    kl_tilted_uniform,
    mean_baseline_advantages,
    solve_beta,
)

rng = np.random.default_rng(1)
rewards = np.sort(rng.random(16))

for beta in (0.0, 1.0, 5.0, 20.0, 100.0):
    print(f"beta={beta:6.1f}  KL={kl_tilted_uniform(rewards, beta):.4f}")

beta, kl = solve_beta(rewards)
print(f"\nsolved beta={beta:.4f}, KL={kl:.10f} (target {math.log(2):.10f})")

# Advantages concentrate on the top of the group; the mean baseline does not.
batch = adaptive_advantages(rewards)
print("\n reward   entropic   mean-baseline")
for r, a, m in zip(rewards, batch.advantages, mean_baseline_advantages(rewards)):
    print(f"{r:7.3f} {a:10.3f} {m:12.3f}")

# Shifting and scaling the rewards leaves the advantages alone.
moved = adaptive_advantages(40.0 * rewards - 3.0)
print("\nmax change under r -> 40 r - 3:", np.max(np.abs(moved.advantages - batch.advantages)))

# Two outcomes can never reach the budget, so the cap is returned.
print("two-point group:", solve_beta([0.0, 1.0]))
