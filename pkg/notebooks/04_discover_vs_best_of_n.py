"""
Search with training against independent sampling
=================================================

Both runs get the same number of proposals on the first autoconvolution
problem with 200 pieces. The first trains the mutation policy and reuses good
states; the second samples everything from the flat seed.
"""

import numpy as np

from discover import RunConfig, run_best_of_n, run_discover

config = RunConfig(env="ac1", env_size=200, steps=50, groups_per_step=4, rollouts_per_group=32)

trained = run_discover(config)
sampled = run_best_of_n(config)
print(f"trained search best bound: {trained.best_attempt.bound:.5f}")
print(f"independent samples best : {sampled.best_attempt.bound:.5f}")

# Reward histograms at the start, middle and end of each run (text bars).
edges = np.linspace(0.45, 0.6, 13)
for step in (0, 25, 49):
    print(f"\nstep {step}")
    for name, res in (("trained", trained), ("sampled", sampled)):
        counts, _ = np.histogram(res.step_logs[step].rewards, bins=edges)
        print(f"  {name}: " + " ".join(f"{c:3d}" for c in counts))
print("bins:", " ".join(f"{e:.3f}" for e in edges[:-1]))

# Best bound over time.
for step in range(0, 50, 7):
    print(f"step {step:2d}: {trained.step_logs[step].best_bound_so_far:.4f} "
          f"vs {sampled.step_logs[step].best_bound_so_far:.4f}")
