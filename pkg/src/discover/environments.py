"""Environment adapters: seed state, constraint projection and reward for each problem."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Construction, EnvKind, Kind, RunConfig
from .verifiers import (
    CLAMP_MAX,
    Direction,
    VerifierResult,
    verify_ac1,
    verify_ac2,
    verify_circle_packing,
    verify_erdos,
)


def project_erdos(h: np.ndarray) -> np.ndarray:
    """Closest-by-shift density with values in ``[0, 1]`` and ``sum(h) = n / 2``.

    Finds ``t`` with ``sum(clip(h + t, 0, 1)) = n / 2`` by bisection, then
    spreads the remaining round-off over the entries strictly inside ``(0, 1)``.
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.size
    target = n / 2.0
    h = np.where(np.isfinite(h), h, 0.5)
    lo, hi = -1.0 - float(h.max()), 1.0 - float(h.min())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(h + mid, 0.0, 1.0).sum() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    out = np.clip(h + 0.5 * (lo + hi), 0.0, 1.0)
    for _ in range(8):
        resid = target - out.sum()
        if resid == 0.0:
            break
        free = (out > 1e-12) & (out < 1.0 - 1e-12)
        if not free.any():
            free = np.ones(n, dtype=bool)
        out[free] = np.clip(out[free] + resid / free.sum(), 0.0, 1.0)
    return out


def project_circles(c: np.ndarray) -> np.ndarray:
    """Clamp circles into the unit square and shrink radii until no pair overlaps."""
    c = np.array(c, dtype=np.float64).reshape(-1, 3)
    c[~np.isfinite(c)] = 0.0
    c[:, :2] = np.clip(c[:, :2], 0.0, 1.0)
    x, y = c[:, 0], c[:, 1]
    wall = np.minimum.reduce([x, y, 1.0 - x, 1.0 - y])
    r = np.clip(c[:, 2], 0.0, wall)
    n = len(c)
    # Shrinking a pair never creates new overlaps, so one sweep suffices.
    for i in range(n):
        for j in range(i + 1, n):
            dist = math.hypot(x[i] - x[j], y[i] - y[j])
            s = r[i] + r[j]
            if s > dist:
                f = dist / s * (1.0 - 1e-12) if s > 0 else 0.0
                r[i] *= f
                r[j] *= f
    c[:, 2] = r
    return c


@dataclass(frozen=True)
class Environment:
    """One verifiable problem instance.

    ``size`` is the number of step-function pieces, or the number of circles.
    """

    kind: EnvKind
    size: int

    @classmethod
    def from_config(cls, config: RunConfig) -> "Environment":
        return cls(config.env, config.env_size)

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def direction(self) -> Direction:
        if self.kind in (EnvKind.ERDOS, EnvKind.AC1):
            return Direction.MINIMIZE
        return Direction.MAXIMIZE

    @property
    def construction_kind(self) -> Kind:
        return Kind.CIRCLE_PACKING if self.kind is EnvKind.CIRCLE_PACKING else Kind.STEP_FUNCTION

    def verify(self, c: Construction) -> VerifierResult:
        if self.kind is EnvKind.CIRCLE_PACKING:
            if c.kind is not Kind.CIRCLE_PACKING:
                return VerifierResult(False, 0.0, 0.0, "expected a circle packing")
            return verify_circle_packing(c.circles, self.size)
        if c.kind is not Kind.STEP_FUNCTION:
            sentinel = math.inf if self.direction is Direction.MINIMIZE else 0.0
            return VerifierResult(False, sentinel, 0.0, "expected a step function")
        if self.kind is EnvKind.AC1:
            return verify_ac1(c.heights)
        if self.kind is EnvKind.AC2:
            return verify_ac2(c.heights)
        return verify_erdos(c.heights)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Re-impose the hard constraints on a raw mutated array."""
        if self.kind is EnvKind.CIRCLE_PACKING:
            return project_circles(x)
        if self.kind is EnvKind.ERDOS:
            return project_erdos(x)
        x = np.where(np.isfinite(x), x, 0.0)
        return np.clip(x, 0.0, CLAMP_MAX)

    def from_array(self, x: np.ndarray) -> Construction:
        if self.kind is EnvKind.CIRCLE_PACKING:
            return Construction.circle_packing(np.asarray(x).reshape(-1, 3))
        return Construction.step_function(np.asarray(x).ravel())

    def seed(self, rng: np.random.Generator | None = None) -> Construction:
        """Initial archive state: a constant (or, with ``rng``, random) valid construction."""
        n = self.size
        if self.kind is EnvKind.CIRCLE_PACKING:
            return self.from_array(self._grid_circles(n, rng))
        if self.kind is EnvKind.ERDOS:
            if rng is None:
                return self.from_array(np.full(n, 0.5))
            return self.from_array(project_erdos(0.5 + 0.1 * rng.standard_normal(n)))
        value = 1.0 if rng is None else float(rng.uniform(0.01, 1.0))
        return self.from_array(np.full(n, value))

    @staticmethod
    def _grid_circles(n: int, rng) -> np.ndarray:
        k = math.ceil(math.sqrt(n))
        cell = 1.0 / k
        idx = np.arange(n)
        x = (idx % k + 0.5) * cell
        y = (idx // k + 0.5) * cell
        r = np.full(n, 0.5 * cell * (1.0 - 1e-9))
        if rng is not None:
            r = r * rng.uniform(0.5, 1.0, n)
        return np.column_stack([x, y, r])
