"""Reward functions for the four mathematics environments.

Each verifier is a pure function that never raises on bad input: rejection is
reported through :class:`VerifierResult` with ``reward == 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

CLAMP_MAX = 1000.0
MIN_SUM = 0.01
DEFAULT_MAX_LEN = 100_000
ERDOS_MAX_LEN = 1000
ERDOS_SUM_TOL = 1e-9
ERDOS_RANGE_TOL = 1e-12
GEOM_TOL = 1e-9
FFT_THRESHOLD = 2048


class Direction(str, enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


@dataclass(frozen=True)
class VerifierResult:
    valid: bool
    bound: float
    reward: float
    rejection_reason: Optional[str] = None

    def to_dict(self) -> dict:
        bound = self.bound if math.isfinite(self.bound) else None
        return {
            "valid": self.valid,
            "bound": bound,
            "reward": self.reward,
            "rejection_reason": self.rejection_reason,
        }


class InvalidBound(ValueError):
    pass


def reward_from_bound(bound: float, direction: Direction) -> float:
    """Map a certified bound to a reward: ``1/bound`` when minimizing, ``bound`` when maximizing."""
    direction = Direction(direction)
    if direction is Direction.MINIMIZE:
        if not (bound > 0) or not math.isfinite(bound):
            raise InvalidBound(f"bound must be finite and > 0 when minimizing, got {bound!r}")
        return 1.0 / bound
    if not (bound >= 0) or not math.isfinite(bound):
        raise InvalidBound(f"bound must be finite and >= 0 when maximizing, got {bound!r}")
    return float(bound)


def _reject(direction: Direction, reason: str) -> VerifierResult:
    sentinel = math.inf if direction is Direction.MINIMIZE else 0.0
    return VerifierResult(False, sentinel, 0.0, reason)


def _accept(bound: float, direction: Direction) -> VerifierResult:
    try:
        reward = reward_from_bound(bound, direction)
    except InvalidBound as exc:
        return _reject(direction, str(exc))
    if not reward > 0:
        return _reject(direction, "degenerate bound")
    return VerifierResult(True, float(bound), reward, None)


def _as_heights(heights, max_len: int) -> tuple[Optional[np.ndarray], Optional[str]]:
    try:
        h = np.asarray(heights, dtype=np.float64)
    except (TypeError, ValueError):
        return None, "heights are not numeric"
    if h.ndim != 1:
        return None, "heights must be one-dimensional"
    if h.size == 0:
        return None, "non-empty required"
    if h.size > max_len:
        return None, f"too many values ({h.size} > {max_len})"
    if not np.all(np.isfinite(h)):
        return None, "non-finite height"
    if np.any(h < 0):
        return None, "negative height"
    return h, None


def autoconvolution(h: np.ndarray) -> np.ndarray:
    """Full linear convolution of ``h`` with itself (length ``2n - 1``)."""
    if h.size < FFT_THRESHOLD:
        return np.convolve(h, h)
    # FFT round-off can produce tiny negatives; the exact result is non-negative.
    return np.maximum(fftconvolve(h, h), 0.0)


def verify_ac1(heights: Sequence[float], max_len: int = DEFAULT_MAX_LEN) -> VerifierResult:
    """Upper bound on the first autoconvolution constant: ``2n max(f*f) / (sum f)^2``."""
    d = Direction.MINIMIZE
    h, why = _as_heights(heights, max_len)
    if h is None:
        return _reject(d, why)
    h = np.clip(h, 0.0, CLAMP_MAX)
    total = float(h.sum())
    if total < MIN_SUM:
        return _reject(d, f"sum {total:g} below {MIN_SUM}")
    n = h.size
    bound = 2.0 * n * float(autoconvolution(h).max()) / (total * total)
    return _accept(bound, d)


def ac2_ratio(conv: np.ndarray) -> float:
    """``||g||_2^2 / (||g||_1 ||g||_inf)`` for the piecewise-linear interpolant of ``g``.

    The samples are padded with a zero at each end; the grid spacing cancels
    in the ratio so it is taken to be 1.
    """
    y = np.concatenate(([0.0], conv, [0.0]))
    a, b = y[:-1], y[1:]
    l2sq = float(np.sum(a * a + a * b + b * b)) / 3.0
    l1 = float(np.sum(np.abs(conv)))
    linf = float(np.max(np.abs(conv)))
    denom = l1 * linf
    # Denormal inputs can underflow the product even when both norms are positive.
    if not denom > 0:
        return 0.0
    return l2sq / denom


def verify_ac2(heights: Sequence[float], max_len: int = DEFAULT_MAX_LEN) -> VerifierResult:
    """Lower bound on the second autoconvolution constant."""
    d = Direction.MAXIMIZE
    h, why = _as_heights(heights, max_len)
    if h is None:
        return _reject(d, why)
    h = np.clip(h, 0.0, CLAMP_MAX)
    if not np.any(h > 0):
        return _reject(d, "degenerate autoconvolution (all heights zero)")
    return _accept(ac2_ratio(autoconvolution(h)), d)


def erdos_overlap(h: np.ndarray) -> float:
    """``max_k sum h(x) (1 - h(x + k)) dx`` over all lags, with ``dx = 2 / len(h)``."""
    dx = 2.0 / h.size
    return float(np.max(np.correlate(h, 1.0 - h, mode="full")) * dx)


def verify_erdos(heights: Sequence[float], max_len: int = ERDOS_MAX_LEN) -> VerifierResult:
    """Upper bound on the minimum-overlap constant from a density on ``[0, 2]``."""
    d = Direction.MINIMIZE
    try:
        h = np.asarray(heights, dtype=np.float64)
    except (TypeError, ValueError):
        return _reject(d, "heights are not numeric")
    if h.ndim != 1 or h.size == 0:
        return _reject(d, "non-empty one-dimensional sequence required")
    if h.size > max_len:
        return _reject(d, f"too many values ({h.size} > {max_len})")
    if not np.all(np.isfinite(h)):
        return _reject(d, "non-finite height")
    if np.any(h < -ERDOS_RANGE_TOL) or np.any(h > 1.0 + ERDOS_RANGE_TOL):
        return _reject(d, "heights outside [0, 1]")
    h = np.clip(h, 0.0, 1.0)
    dx = 2.0 / h.size
    integral = float(h.sum()) * dx
    if abs(integral - 1.0) > ERDOS_SUM_TOL:
        return _reject(d, f"integral {integral:.12g} != 1")
    return _accept(erdos_overlap(h), d)


def verify_circle_packing(circles, n: int) -> VerifierResult:
    """Sum of radii of ``n`` disjoint circles inside the unit square."""
    d = Direction.MAXIMIZE
    try:
        c = np.asarray(circles, dtype=np.float64)
    except (TypeError, ValueError):
        return _reject(d, "circles are not numeric")
    if c.size == 0 and n == 0:
        c = c.reshape(0, 3)
    if c.ndim != 2 or c.shape[1] != 3:
        return _reject(d, "circles must be (x, y, r) triples")
    if c.shape[0] != n:
        return _reject(d, f"expected {n} circles, got {c.shape[0]}")
    if not np.all(np.isfinite(c)):
        return _reject(d, "non-finite circle value")
    x, y, r = c[:, 0], c[:, 1], c[:, 2]
    if np.any(r < 0):
        return _reject(d, "negative radius")
    if np.any(x - r < -GEOM_TOL) or np.any(x + r > 1 + GEOM_TOL) or \
            np.any(y - r < -GEOM_TOL) or np.any(y + r > 1 + GEOM_TOL):
        return _reject(d, "circle outside the unit square")
    if n > 1:
        i, j = np.triu_indices(n, k=1)
        dist = np.hypot(x[i] - x[j], y[i] - y[j])
        bad = dist < r[i] + r[j] - GEOM_TOL
        if np.any(bad):
            k = int(np.argmax(bad))
            return _reject(d, f"circles {i[k]} and {j[k]} overlap")
    return _accept(float(r.sum()), d)
