import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import softmax

from discover.entropic import (
    adaptive_advantages,
    constant_beta_advantages,
    entropic_gradient_exact,
    entropic_objective_exact,
    kl_penalized_advantages,
    kl_tilted_uniform,
    loo_advantages,
    mean_baseline_advantages,
    solve_beta,
    tilted_distribution,
    tilted_weights,
)
from oracles import beta_star_0001, entropic_objective_mp, kl_tilted_uniform_mp

LN2 = math.log(2)

reward_lists = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=40)


# --- KL ----------------------------------------------------------------------

@pytest.mark.parametrize("beta", [0.0, 1.0, 1e4])
def test_kl_equal_rewards_zero(beta):
    assert kl_tilted_uniform([0.3] * 5, beta) == 0.0


def test_kl_two_point_limit():
    assert kl_tilted_uniform([0.0, 1.0], 60.0) == pytest.approx(LN2, abs=1e-12)
    assert kl_tilted_uniform([0.0, 1.0], 60.0) <= LN2


def test_kl_matches_high_precision():
    r = [0.0, 0.0, 0.0, 1.0]
    assert kl_tilted_uniform(r, 2.0) == pytest.approx(kl_tilted_uniform_mp(r, 2.0), abs=1e-12)
    # frozen oracle value
    assert kl_tilted_uniform(r, 2.0) == pytest.approx(0.4680105956619471733, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(reward_lists)
def test_kl_monotone_in_beta(r):
    grid = np.concatenate(([0.0], np.logspace(-3, 3, 60)))
    kls = [kl_tilted_uniform(r, b) for b in grid]
    assert all(b >= a - 1e-12 for a, b in zip(kls, kls[1:]))
    assert all(k >= 0 for k in kls)


@pytest.mark.parametrize("seed", range(3))
def test_kl_random_vs_mp(seed):
    r = np.random.default_rng(seed).normal(size=9)
    for beta in (0.1, 1.0, 5.0):
        assert kl_tilted_uniform(r, beta) == pytest.approx(kl_tilted_uniform_mp(r, beta), abs=1e-12)


# --- beta solve --------------------------------------------------------------

def test_solve_beta_equal_rewards():
    assert solve_beta([1.0] * 4, LN2, 1e4) == (1e4, 0.0)


def test_solve_beta_0001():
    beta, kl = solve_beta([0, 0, 0, 1], LN2, 1e4)
    assert beta == pytest.approx(beta_star_0001(), rel=1e-10)
    assert beta == pytest.approx(2.5532449091856573, rel=1e-10)
    assert abs(kl - LN2) <= 1e-8


def test_solve_beta_unattainable_two_point():
    beta, kl = solve_beta([0.0, 1.0], LN2, 1e4)
    assert beta == 1e4
    assert kl <= LN2 and kl == pytest.approx(LN2, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(reward_lists)
def test_solve_beta_hits_budget(r):
    beta, kl = solve_beta(r, LN2, 1e4)
    r = np.asarray(r)
    if kl_tilted_uniform(r, 1e4) >= LN2 and math.log(r.size / np.sum(r == r.max())) > LN2:
        assert abs(kl - LN2) <= 1e-8
    else:
        assert beta == 1e4


# --- advantages --------------------------------------------------------------

def test_loo_equal_rewards():
    eps = 1e-8
    assert np.allclose(loo_advantages([2.0] * 4, 3.0, eps), 1 / (1 + eps) - 1, atol=0, rtol=1e-15)


def test_loo_two_point():
    assert np.allclose(loo_advantages([0.0, 1.0], math.log(3), 0.0), [-2 / 3, 2.0], atol=1e-12)


def test_loo_matches_formula_loop():
    rng = np.random.default_rng(4)
    r = rng.normal(size=7)
    beta, eps = 1.7, 1e-3
    rmax = r.max()
    expected = []
    for n in range(len(r)):
        z = sum(math.exp(beta * (r[m] - rmax)) for m in range(len(r)) if m != n) / (len(r) - 1)
        expected.append(math.exp(beta * (r[n] - rmax)) / (z + eps) - 1)
    assert np.allclose(loo_advantages(r, beta, eps), expected, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=2, max_size=30),
       st.floats(0.01, 100), st.floats(-100, 100))
def test_affine_invariance(r, w, b):
    r = np.asarray(r)
    s = w * r + b
    # Only batches whose budget is met; a capped temperature is not rescaled.
    assume(all(kl_tilted_uniform(x, 1e4) >= LN2 and math.log(x.size / np.sum(x == x.max())) > LN2
               for x in (r, s)))
    a1 = adaptive_advantages(r).advantages
    a2 = adaptive_advantages(s).advantages
    assert np.allclose(a1, a2, atol=1e-6, rtol=0)


def test_affine_invariance_example():
    r = np.array([0.1, 0.4, 0.35, 0.9, 0.0])
    a1 = adaptive_advantages(r).advantages
    a2 = adaptive_advantages(3.0 * r - 7.0).advantages
    assert np.max(np.abs(a1 - a2)) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(reward_lists, st.floats(0, 50))
def test_weights_mean_one_and_ordered(r, beta):
    w = tilted_weights(r, beta)
    assert abs(w.mean() - 1) <= 1e-6
    order = np.argsort(r, kind="stable")
    adv = loo_advantages(r, beta)
    assert np.all(np.diff(adv[order]) >= -1e-12)
    assert np.all(np.diff(w[order]) >= -1e-12)


def test_batch_fields():
    b = constant_beta_advantages([0.0, 0.5, 1.0], 2.0)
    assert b.beta == 2.0 and len(b.weights) == 3 and np.all(b.weights > 0)
    assert b.kl_achieved == pytest.approx(kl_tilted_uniform([0.0, 0.5, 1.0], 2.0))
    a = adaptive_advantages([0.0, 0.0, 0.0, 1.0])
    assert abs(a.kl_achieved - LN2) <= 1e-8


def test_kl_penalty():
    a = np.array([0.3, -0.2])
    assert np.array_equal(kl_penalized_advantages(a, [1.0, 2.0], [0.0, 0.0], 0.0), a)
    assert np.array_equal(kl_penalized_advantages(a, [1.0, 2.0], [1.0, 2.0], 0.5), a)
    assert np.allclose(kl_penalized_advantages([0, 0], [1.0, -1.0], [0.0, 0.0], 0.1), [-0.1, 0.1])
    with pytest.raises(ValueError):
        kl_penalized_advantages([0, 0], [1.0], [0.0], 0.1)


def test_mean_baseline():
    assert np.allclose(mean_baseline_advantages([0, 1]), [-0.5, 0.5])
    assert np.all(mean_baseline_advantages([3.0] * 4) == 0)
    r = np.random.default_rng(0).normal(size=50)
    assert abs(mean_baseline_advantages(r).sum()) <= 1e-12


# --- exact objective and gradient --------------------------------------------

def test_objective_examples():
    assert entropic_objective_exact([0.2, 0.8], [1.0, 5.0], 0.0) == 0.0
    assert entropic_objective_exact([0.0, 1.0, 0.0], [1.0, 0.7, 9.0], 3.0) == pytest.approx(2.1, abs=1e-12)
    val = entropic_objective_exact([0.5, 0.5], [0.0, 1.0], 1.0)
    assert val == pytest.approx(entropic_objective_mp([0.5, 0.5], [0.0, 1.0], 1.0), abs=1e-12)
    assert val == pytest.approx(0.6201145069582775246, abs=1e-12)


def test_objective_rejects_non_simplex():
    with pytest.raises(ValueError):
        entropic_objective_exact([0.5, 0.6], [0.0, 1.0], 1.0)


def test_gradient_examples():
    rng = np.random.default_rng(7)
    z, r = rng.normal(size=5), rng.normal(size=5)
    assert np.allclose(entropic_gradient_exact(z, r, 0.0), 0.0, atol=1e-15)
    g = entropic_gradient_exact(z, r, 1.3)
    assert abs(g.sum()) <= 1e-12
    p = softmax(z)
    q = p * np.exp(1.3 * r)
    q /= q.sum()
    assert np.allclose(g, q - p, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    z, r, beta = rng.normal(size=5), rng.normal(size=5), float(rng.uniform(0.1, 3))
    g = entropic_gradient_exact(z, r, beta)
    h = 1e-6
    fd = np.empty(5)
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        fd[k] = (entropic_objective_exact(softmax(z + e), r, beta)
                 - entropic_objective_exact(softmax(z - e), r, beta)) / (2 * h)
    assert np.allclose(fd, g, rtol=1e-4, atol=1e-9)


def test_tilted_distribution_sums_to_one():
    assert tilted_distribution([0.0, 1e3, -1e3], 10.0).sum() == pytest.approx(1.0)
