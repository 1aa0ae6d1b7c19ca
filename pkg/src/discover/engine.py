"""The discovery loop: select start states, sample, verify, train, archive.

Every rollout draws from its own generator, spawned from ``rng_seed`` and
keyed by (step, group, rollout), so results do not depend on how many
workers verify the batch.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import entropic
from .archive import Archive, epsilon_greedy_select, no_reuse_select, puct_select_batch
from .core import Attempt, ObjectiveMode, ReuseMode, RunConfig, StepLog
from .environments import Environment
from .policy import MutationPolicy, Proposal
from .verifiers import Direction

logger = logging.getLogger(__name__)

# (objective, reuse) pairs of the ablation grid.
ABLATIONS = {
    "constant-beta": (ObjectiveMode.ENTROPIC_CONSTANT, ReuseMode.PUCT),
    "expected-reward": (ObjectiveMode.EXPECTED_REWARD, ReuseMode.PUCT),
    "no-ttt": (ObjectiveMode.NO_TRAINING, ReuseMode.PUCT),
    "epsilon-greedy": (ObjectiveMode.ENTROPIC_ADAPTIVE, ReuseMode.EPSILON_GREEDY),
    "no-reuse": (ObjectiveMode.ENTROPIC_ADAPTIVE, ReuseMode.NONE),
    "naive-rl": (ObjectiveMode.EXPECTED_REWARD, ReuseMode.NONE),
}
CONSTANT_BETA = 2.0
ABLATION_EPSILON = 0.1


@dataclass
class RunResult:
    best_attempt: Attempt
    step_logs: list[StepLog]
    total_rollouts: int
    config_echo: RunConfig
    archive_snapshots: list[dict] = field(default_factory=list, repr=False)


def _worker_count(config: RunConfig) -> int:
    cap = os.environ.get("DISCOVER_WORKERS")
    if cap:
        try:
            return max(1, min(config.workers, int(cap)))
        except ValueError:
            logger.warning("ignoring non-integer DISCOVER_WORKERS=%r", cap)
    return config.workers


def group_advantages(config: RunConfig, rewards: np.ndarray) -> tuple[np.ndarray, float]:
    """Advantages for one group under the configured objective, plus the temperature used."""
    mode = config.objective_mode
    if mode is ObjectiveMode.ENTROPIC_ADAPTIVE:
        batch = entropic.adaptive_advantages(
            rewards, config.kl_budget_gamma, config.beta_max, config.epsilon_stabilizer)
        return batch.advantages, batch.beta
    if mode is ObjectiveMode.ENTROPIC_CONSTANT:
        batch = entropic.constant_beta_advantages(rewards, config.constant_beta, config.epsilon_stabilizer)
        return batch.advantages, batch.beta
    if mode is ObjectiveMode.EXPECTED_REWARD:
        return entropic.mean_baseline_advantages(rewards), 0.0
    return np.zeros_like(rewards), 0.0


def run_discover(config: RunConfig, environment: Optional[Environment] = None, policy=None,
                 on_step: Optional[Callable[[StepLog], None]] = None) -> RunResult:
    """Run the full search-and-train loop and return the best attempt found."""
    env = environment or Environment.from_config(config)
    policy = policy if policy is not None else MutationPolicy(config.operators, config.magnitudes)
    root = np.random.SeedSequence(config.rng_seed)
    seed_rng = np.random.default_rng(root.spawn(1)[0]) if config.seed_mode == "random" else None
    select_rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, 0x5E1EC7]))

    archive = Archive(config.archive_capacity)
    seed_state = env.seed(seed_rng)
    seed_result = env.verify(seed_state)
    seed_id = archive.add_seed(seed_state, seed_result.reward, seed_result.bound)
    # The seed is not an attempt: the result is the best rollout of the run.
    best: Optional[Attempt] = None
    next_attempt_id = 0

    G, R = config.groups_per_step, config.rollouts_per_group
    logs: list[StepLog] = []
    snapshots: list[dict] = []
    workers = _worker_count(config)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def rollout(args) -> tuple[Proposal, float, float]:
        state, step, g, k, best_reward = args
        rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, step, g, k]))
        ctx = {"best_reward": best_reward, "step": step}
        prop = policy.propose(state, rng, env, ctx)
        if prop.construction is None:
            fail = math.inf if env.direction is Direction.MINIMIZE else 0.0
            return prop, 0.0, fail
        res = env.verify(prop.construction)
        return prop, res.reward, res.bound

    try:
        for step in range(config.steps):
            fallback = False
            if config.reuse_mode is ReuseMode.PUCT:
                selected, fallback = puct_select_batch(archive, G, config.puct_c)
            elif config.reuse_mode is ReuseMode.EPSILON_GREEDY:
                selected = [epsilon_greedy_select(archive, config.reuse_epsilon, select_rng) for _ in range(G)]
            else:
                selected = [no_reuse_select(archive) for _ in range(G)]

            context_reward = max(seed_result.reward, best.reward if best else 0.0)
            jobs = [(archive[selected[g]].construction, step, g, k, context_reward)
                    for g in range(G) for k in range(R)]
            results = list(pool.map(rollout, jobs) if pool else map(rollout, jobs))

            step_rewards: list[float] = []
            betas: list[float] = []
            samples = []
            for g in range(G):
                chunk = results[g * R:(g + 1) * R]
                rewards = np.array([r for _, r, _ in chunk])
                adv, beta = group_advantages(config, rewards)
                betas.append(float(beta))
                step_rewards.extend(float(r) for r in rewards)
                if policy.trainable and config.objective_mode is not ObjectiveMode.NO_TRAINING:
                    cells = [p.cell for p, _, _ in chunk]
                    logp = np.array([p.log_prob for p, _, _ in chunk])
                    ref = np.array([policy.reference_log_prob(c) for c in cells])
                    adv = entropic.kl_penalized_advantages(adv, logp, ref, config.kl_penalty_lambda)
                    samples.extend(zip(cells, logp, adv))

                parent = selected[g]
                for k, (prop, reward, bound) in enumerate(chunk):
                    if best is None or reward > best.reward:
                        best = Attempt(next_attempt_id + g * R + k, parent, prop.construction,
                                       reward, bound, step, g)
            next_attempt_id += G * R

            if samples:
                policy.update(samples, config.learning_rate_eta)

            for g in range(G):
                chunk = results[g * R:(g + 1) * R]
                archive.record_expansion(
                    selected[g],
                    [(p.construction, r) for p, r, _ in chunk],
                    bounds=[b for _, _, b in chunk],
                    insertable=[r > 0 for _, r, _ in chunk],
                    prune=False,
                )
            archive.prune()

            log = StepLog(
                step_index=step,
                rewards=step_rewards,
                best_reward_so_far=best.reward,
                best_bound_so_far=best.bound,
                betas=betas,
                selected_node_ids=list(selected),
            )
            logs.append(log)
            snapshots.append({
                "step_index": step,
                "total_expansions": archive.total_expansions,
                "blocking_fallback": fallback,
                "nodes": archive.snapshot(),
            })
            if on_step is not None:
                on_step(log)
            logger.debug("step %d best bound %.6g", step, best.bound)
    finally:
        if pool is not None:
            pool.shutdown()

    return RunResult(best, logs, config.steps * G * R, config, snapshots)


def run_best_of_n(config: RunConfig, environment: Optional[Environment] = None, policy=None) -> RunResult:
    """Independent samples from the seed state with no training and no reuse.

    The budget is ``steps * groups_per_step * rollouts_per_group``; each step
    of the log is one pseudo-step of that many samples.
    """
    cfg = dataclasses.replace(config, objective_mode=ObjectiveMode.NO_TRAINING, reuse_mode=ReuseMode.NONE)
    return run_discover(cfg, environment, policy)


def ablation_config(config: RunConfig, name: str) -> RunConfig:
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {name!r}; expected one of {sorted(ABLATIONS)}")
    objective, reuse = ABLATIONS[name]
    return dataclasses.replace(config, objective_mode=objective, reuse_mode=reuse,
                               constant_beta=CONSTANT_BETA, reuse_epsilon=ABLATION_EPSILON)


def run_ablation(config: RunConfig, name: str, environment: Optional[Environment] = None,
                 policy=None) -> RunResult:
    return run_discover(ablation_config(config, name), environment, policy)
