import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discover.verifiers import (
    Direction,
    InvalidBound,
    autoconvolution,
    reward_from_bound,
    verify_ac1,
    verify_ac2,
    verify_circle_packing,
    verify_erdos,
)
from oracles import ac2_continuous, ac2_quadrature


# --- AC1 ---------------------------------------------------------------------

@pytest.mark.parametrize("n,value", [(1, 1.0), (7, 0.3), (200, 1.0), (1000, 5.5)])
def test_ac1_constant_is_two(n, value):
    res = verify_ac1([value] * n)
    assert res.valid
    assert res.bound == pytest.approx(2.0, abs=1e-12)
    assert res.reward == pytest.approx(0.5, abs=1e-12)


def test_ac1_small_sum_invalid():
    res = verify_ac1([0.001, 0.002])
    assert not res.valid and res.reward == 0 and res.bound == math.inf


@pytest.mark.parametrize("n", [1, 2, 10, 50])
def test_ac1_single_spike(n):
    # max autoconvolution 1, sum 1
    assert verify_ac1([1.0] + [0.0] * (n - 1)).bound == pytest.approx(2 * n)


def test_ac1_rejects_negative_and_empty():
    assert not verify_ac1([]).valid
    assert not verify_ac1([1.0, -1.0]).valid
    assert not verify_ac1([1.0, math.nan]).valid


def test_ac1_clamps_large_heights():
    assert verify_ac1([5000.0, 1000.0]).bound == verify_ac1([1000.0, 1000.0]).bound


def test_fft_path_matches_direct():
    h = np.random.default_rng(1).random(3000)
    direct = np.convolve(h, h)
    assert np.allclose(autoconvolution(h), direct, rtol=1e-10, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=60).filter(lambda v: sum(v) > 0.1),
       st.floats(0.1, 50.0))
def test_ac1_scale_invariant(hs, k):
    a, b = verify_ac1(hs), verify_ac1([k * h for h in hs])
    assert a.valid and b.valid
    assert b.bound == pytest.approx(a.bound, rel=1e-12)


# --- AC2 ---------------------------------------------------------------------

def test_ac2_constant_1024():
    assert verify_ac2([1.0] * 1024).bound == pytest.approx(2 / 3, abs=1e-3)


def test_ac2_zero_invalid():
    res = verify_ac2([0.0] * 10)
    assert not res.valid and res.reward == 0 and res.bound == 0


def test_ac2_two_piece_matches_quadrature():
    assert verify_ac2([1.0, 1.0]).bound == pytest.approx(ac2_quadrature([1.0, 1.0]), abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_ac2_random_matches_quadrature(seed):
    h = np.random.default_rng(seed).random(9)
    assert verify_ac2(h).bound == pytest.approx(ac2_quadrature(h), abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=60).filter(lambda v: max(v) > 1e-3),
       st.floats(0.1, 50.0))
def test_ac2_scale_invariant(hs, k):
    assert verify_ac2([k * h for h in hs]).bound == pytest.approx(verify_ac2(hs).bound, rel=1e-12)


@pytest.mark.parametrize("f", [
    lambda x: np.cos(2 * np.pi * x) ** 2 + 0.3,
    lambda x: 1.0 - 8.0 * x ** 2,
    lambda x: np.exp(-30 * x ** 2),
])
def test_ac2_converges_under_refinement(f):
    ref = ac2_continuous(f)
    errs = []
    for n in (16, 32, 64, 128, 256):
        x = (np.arange(n) + 0.5) / n * 0.5 - 0.25
        errs.append(abs(verify_ac2(f(x)).bound - ref))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-4


# --- Erdős -------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 10, 64, 1000])
def test_erdos_constant_half(n):
    res = verify_erdos([0.5] * n)
    assert res.valid
    assert res.bound == pytest.approx(0.5, abs=1e-12)


def test_erdos_too_long():
    res = verify_erdos([0.5] * 1001)
    assert not res.valid and "1000" in res.rejection_reason


def test_erdos_normalization():
    res = verify_erdos([0.45] * 100)  # integral 0.9
    assert not res.valid and res.reward == 0


def test_erdos_range():
    h = [0.5] * 10
    h[0], h[1] = 1.2, -0.2
    assert not verify_erdos(h).valid
    h = [0.5] * 10
    h[0], h[1] = 0.5 + 5e-13, 0.5 - 5e-13
    assert verify_erdos(h).valid


def test_erdos_matches_definition():
    rng = np.random.default_rng(3)
    n = 40
    h = rng.random(n)
    h = h / h.sum() * n / 2
    h = np.clip(h, 0, 1)
    h[0] += n / 2 - h.sum()
    dx = 2 / n
    best = -math.inf
    for k in range(-(n - 1), n):
        s = sum(h[i] * (1 - h[i + k]) for i in range(n) if 0 <= i + k < n)
        best = max(best, s * dx)
    assert verify_erdos(h).bound == pytest.approx(best, rel=1e-12)


# --- circle packing ----------------------------------------------------------

def test_single_circle():
    res = verify_circle_packing([(0.5, 0.5, 0.5)], 1)
    assert res.valid and res.reward == 0.5 and res.bound == 0.5


def test_overlap_rejected():
    res = verify_circle_packing([(0.5, 0.5, 0.5), (0.5, 0.5, 0.5)], 2)
    assert not res.valid and res.reward == 0


def test_wrong_count_and_outside():
    assert not verify_circle_packing([(0.5, 0.5, 0.1)], 2).valid
    assert not verify_circle_packing([(0.05, 0.5, 0.1)], 1).valid


def test_touching_circles_valid():
    res = verify_circle_packing([(0.25, 0.5, 0.25), (0.75, 0.5, 0.25)], 2)
    assert res.valid and res.reward == pytest.approx(0.5)


# --- reward mapping ----------------------------------------------------------

def test_reward_from_bound():
    assert reward_from_bound(2.0, Direction.MINIMIZE) == 0.5
    assert reward_from_bound(2 / 3, Direction.MAXIMIZE) == 2 / 3
    with pytest.raises(InvalidBound):
        reward_from_bound(0.0, Direction.MINIMIZE)


# --- cross-cutting -----------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=0, max_size=256))
def test_fuzzed_bytes_never_crash(blob):
    arr = np.frombuffer(blob[: len(blob) // 8 * 8], dtype=np.float64)
    for res in (verify_ac1(arr), verify_ac2(arr), verify_erdos(arr),
                verify_circle_packing(arr[: len(arr) // 3 * 3].reshape(-1, 3), len(arr) // 3)):
        assert res.reward >= 0
        assert res.valid == (res.reward > 0)
        if res.valid:
            assert math.isfinite(res.bound)


def test_deterministic():
    h = np.random.default_rng(5).random(300)
    assert verify_ac1(h) == verify_ac1(h.copy())
    assert verify_ac2(h) == verify_ac2(h.copy())
