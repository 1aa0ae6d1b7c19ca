"""Entropic (risk-seeking) policy-gradient weights and advantages.

The tilted distribution over a batch of rewards is ``q_b(n) ∝ exp(b r_n)``.
Its KL divergence from the uniform sampling distribution controls how far a
reweighted update can move, and the temperature ``b`` is chosen per batch so
that this divergence matches a fixed budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

BISECTION_MAX_ITER = 200


@dataclass(frozen=True)
class AdvantageBatch:
    rewards: np.ndarray
    beta: float
    weights: np.ndarray
    advantages: np.ndarray
    kl_achieved: float


def tilted_distribution(rewards, beta: float) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64)
    return softmax(beta * (r - r.max()))


def tilted_weights(rewards, beta: float) -> np.ndarray:
    """``w_n = exp(b r_n) / mean(exp(b r_m))``; averages to one."""
    r = np.asarray(rewards, dtype=np.float64)
    return r.size * tilted_distribution(r, beta)


def kl_tilted_uniform(rewards, beta: float) -> float:
    """``KL(q_b || uniform)`` in nats, computed with the max reward shifted out."""
    r = np.asarray(rewards, dtype=np.float64)
    n = r.size
    z = beta * (r - r.max())
    # After the shift every exponent is <= 0 and the sum is >= 1, so a plain
    # log-sum is already stable (and much cheaper inside the bisection).
    e = np.exp(z)
    log_q = z - math.log(e.sum())
    q = e / e.sum()
    kl = float(np.sum(q * (log_q + math.log(n))))
    return max(kl, 0.0)


def solve_beta(rewards, gamma: float = math.log(2.0), beta_max: float = 1e4) -> tuple[float, float]:
    """Temperature whose tilted batch distribution sits ``gamma`` nats from uniform.

    KL is nondecreasing in the temperature, so bisection on ``[0, beta_max]``
    converges. When even ``beta_max`` stays under budget (constant rewards, or
    a budget at or above the supremum ``ln(N / #argmax)``), ``beta_max`` is
    returned with its KL.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    r = np.asarray(rewards, dtype=np.float64)
    kl_hi = kl_tilted_uniform(r, beta_max)
    # Supremum over all temperatures: all mass spread evenly on the tied maxima.
    sup_kl = math.log(r.size / np.count_nonzero(r == r.max()))
    if kl_hi < gamma or sup_kl <= gamma:
        return float(beta_max), kl_hi
    lo, hi = 0.0, float(beta_max)
    # Run the bracket down to round-off rather than stopping at the KL
    # tolerance: the advantages then inherit the exact shift/scale invariance.
    for _ in range(BISECTION_MAX_ITER):
        beta = 0.5 * (lo + hi)
        if beta <= lo or beta >= hi:
            break
        if kl_tilted_uniform(r, beta) < gamma:
            lo = beta
        else:
            hi = beta
    beta = 0.5 * (lo + hi)
    kl = kl_tilted_uniform(r, beta)
    return beta, kl


def loo_advantages(rewards, beta: float, eps: float = 1e-8) -> np.ndarray:
    """Leave-one-out entropic advantages ``exp(b(r_n - r_max)) / (Z_-n + eps) - 1``."""
    r = np.asarray(rewards, dtype=np.float64)
    n = r.size
    if n < 2:
        raise ValueError("need at least two rewards")
    e = np.exp(beta * (r - r.max()))
    z_loo = (e.sum() - e) / (n - 1)
    return e / (z_loo + eps) - 1.0


def adaptive_advantages(rewards, gamma: float = math.log(2.0), beta_max: float = 1e4,
                        eps: float = 1e-8) -> AdvantageBatch:
    r = np.asarray(rewards, dtype=np.float64)
    beta, kl = solve_beta(r, gamma, beta_max)
    return AdvantageBatch(r, beta, tilted_weights(r, beta), loo_advantages(r, beta, eps), kl)


def constant_beta_advantages(rewards, beta: float, eps: float = 1e-8) -> AdvantageBatch:
    r = np.asarray(rewards, dtype=np.float64)
    return AdvantageBatch(r, beta, tilted_weights(r, beta), loo_advantages(r, beta, eps),
                          kl_tilted_uniform(r, beta))


def kl_penalized_advantages(advantages, logp_current, logp_reference, lam: float) -> np.ndarray:
    a = np.asarray(advantages, dtype=np.float64)
    cur = np.asarray(logp_current, dtype=np.float64)
    ref = np.asarray(logp_reference, dtype=np.float64)
    if not (a.shape == cur.shape == ref.shape):
        raise ValueError("advantages and log-probabilities must have equal lengths")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return a - lam * (cur - ref)


def mean_baseline_advantages(rewards) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise ValueError("need at least two rewards")
    return r - r.mean()


def _check_simplex(p: np.ndarray) -> None:
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must form a simplex")


def entropic_objective_exact(probabilities, rewards, beta: float) -> float:
    """``log sum_k p_k exp(b r_k)`` for a policy over a finite action set."""
    p = np.asarray(probabilities, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    _check_simplex(p)
    p = np.clip(p, 0.0, None)
    support = p > 0
    return float(logsumexp(beta * r[support], b=p[support]))


def entropic_gradient_exact(logits, rewards, beta: float) -> np.ndarray:
    """Gradient of the exact entropic objective of ``softmax(logits)`` w.r.t. the logits.

    Equals ``q_b - p`` where ``q_b ∝ p exp(b r)`` is the tilted policy.
    """
    z = np.asarray(logits, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    p = softmax(z)
    q = softmax(z + beta * r)
    return q - p
