"""Domain types shared across the package and their text serialization.

Constructions are written as a small JSON document whose numbers carry 17
significant digits, so a decoded file is bit-identical to what was encoded::

    {"kind": "step_function", "heights": [0.5, 0.5]}
    {"kind": "circle_packing", "circles": [[0.5, 0.5, 0.5]]}

A bare array of numbers decodes as a step function and a bare array of
``[x, y, r]`` triples as a circle packing, which makes hand-written files easy.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Optional, Sequence


class InvariantViolation(ValueError):
    """A value breaks the invariants of its domain type."""


class MalformedInput(ValueError):
    """Serialized input could not be parsed."""


class Kind(str, enum.Enum):
    STEP_FUNCTION = "step_function"
    CIRCLE_PACKING = "circle_packing"


@dataclass(frozen=True)
class Construction:
    """A candidate solution: step-function heights or a set of circles.

    Use :meth:`step_function` / :meth:`circle_packing` to build validated
    instances. ``heights`` and ``circles`` are stored as tuples so that
    constructions are hashable, immutable values.
    """

    kind: Kind
    heights: tuple[float, ...] = ()
    circles: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.kind is Kind.STEP_FUNCTION:
            if len(self.heights) == 0:
                raise InvariantViolation("non-empty required")
            for h in self.heights:
                if not math.isfinite(h):
                    raise InvariantViolation("invariant violation: non-finite height")
                if h < 0:
                    raise InvariantViolation("invariant violation: negative height")
        else:
            for c in self.circles:
                if len(c) != 3:
                    raise InvariantViolation("invariant violation: circle needs (x, y, r)")
                if not all(math.isfinite(v) for v in c):
                    raise InvariantViolation("invariant violation: non-finite circle value")
                if c[2] < 0:
                    raise InvariantViolation("invariant violation: negative radius")

    @classmethod
    def step_function(cls, heights: Iterable[float]) -> "Construction":
        return cls(Kind.STEP_FUNCTION, heights=tuple(float(h) for h in heights))

    @classmethod
    def circle_packing(cls, circles: Iterable[Sequence[float]]) -> "Construction":
        return cls(
            Kind.CIRCLE_PACKING,
            circles=tuple(tuple(float(v) for v in c) for c in circles),
        )


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise InvariantViolation("invariant violation: non-finite number")
    return format(x, ".17g")


def encode_construction(c: Construction) -> bytes:
    # Re-validate: a Construction may have been built with object.__new__ tricks.
    Construction(c.kind, c.heights, c.circles)
    if c.kind is Kind.STEP_FUNCTION:
        body = ", ".join(_fmt(h) for h in c.heights)
        text = '{"kind": "step_function", "heights": [%s]}\n' % body
    else:
        body = ", ".join("[%s]" % ", ".join(_fmt(v) for v in circ) for circ in c.circles)
        text = '{"kind": "circle_packing", "circles": [%s]}\n' % body
    return text.encode("utf-8")


def _reject_constant(name: str):
    raise MalformedInput(f"non-finite literal {name!r} not allowed")


def decode_construction(data: bytes | str) -> Construction:
    """Parse a construction file; raises :class:`MalformedInput` or :class:`InvariantViolation`."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"not utf-8: {exc}") from None
    try:
        obj = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"malformed input: {exc}") from None

    if isinstance(obj, list):
        if obj and all(isinstance(v, list) for v in obj):
            obj = {"kind": "circle_packing", "circles": obj}
        else:
            obj = {"kind": "step_function", "heights": obj}
    if not isinstance(obj, dict) or "kind" not in obj:
        raise MalformedInput("malformed input: expected an object with a 'kind' key")

    try:
        kind = Kind(obj["kind"])
    except ValueError:
        raise MalformedInput(f"malformed input: unknown kind {obj['kind']!r}") from None

    def number(v: Any) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedInput(f"malformed input: expected a number, got {v!r}")
        return float(v)

    if kind is Kind.STEP_FUNCTION:
        hs = obj.get("heights")
        if not isinstance(hs, list):
            raise MalformedInput("malformed input: 'heights' must be an array")
        return Construction.step_function(number(h) for h in hs)

    cs = obj.get("circles")
    if not isinstance(cs, list) or not all(isinstance(c, list) and len(c) == 3 for c in cs):
        raise MalformedInput("malformed input: 'circles' must be an array of [x, y, r]")
    return Construction.circle_packing([number(v) for v in c] for c in cs)


# --- run configuration -------------------------------------------------------


class EnvKind(str, enum.Enum):
    ERDOS = "erdos"
    AC1 = "ac1"
    AC2 = "ac2"
    CIRCLE_PACKING = "circle_packing"


class ReuseMode(str, enum.Enum):
    PUCT = "puct"
    EPSILON_GREEDY = "epsilon_greedy"
    NONE = "none"


# Default mutation cells: operator names and relative step sizes.
OPERATORS = ("GaussianPerturb", "BlockResample", "Smooth", "SpliceSwap", "RescaleProject")
MAGNITUDES = (1e-3, 1e-2, 1e-1, 3e-1)


class ObjectiveMode(str, enum.Enum):
    ENTROPIC_ADAPTIVE = "entropic_adaptive"
    ENTROPIC_CONSTANT = "entropic_constant"
    EXPECTED_REWARD = "expected_reward"
    NO_TRAINING = "no_training"


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a discovery run.

    ``env_size`` is the number of pieces for step-function problems and the
    circle count for circle packing. ``reuse_epsilon`` is only read in
    epsilon-greedy mode and ``constant_beta`` only for the constant-beta
    objective.
    """

    env: EnvKind = EnvKind.AC1
    env_size: int = 200
    seed_mode: str = "constant"
    steps: int = 50
    groups_per_step: int = 8
    rollouts_per_group: int = 64
    puct_c: float = 1.0
    kl_budget_gamma: float = math.log(2.0)
    kl_penalty_lambda: float = 0.1
    learning_rate_eta: float = 0.003
    epsilon_stabilizer: float = 1e-8
    beta_max: float = 1e4
    rng_seed: int = 0
    reuse_mode: ReuseMode = ReuseMode.PUCT
    reuse_epsilon: float = 0.1
    objective_mode: ObjectiveMode = ObjectiveMode.ENTROPIC_ADAPTIVE
    constant_beta: float = 2.0
    archive_capacity: int = 1000
    workers: int = 1
    operators: tuple[str, ...] = OPERATORS
    magnitudes: tuple[float, ...] = MAGNITUDES

    def __post_init__(self):
        # Allow plain strings for the enum fields.
        for name, typ in (("env", EnvKind), ("reuse_mode", ReuseMode), ("objective_mode", ObjectiveMode)):
            object.__setattr__(self, name, typ(getattr(self, name)))
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(self, "magnitudes", tuple(float(m) for m in self.magnitudes))
        unknown = [o for o in self.operators if o not in OPERATORS]
        if unknown or not self.operators:
            raise InvariantViolation(f"operators must be a non-empty subset of {OPERATORS}")
        if not self.magnitudes or not all(math.isfinite(m) and m >= 0 for m in self.magnitudes):
            raise InvariantViolation("magnitudes must be non-empty, finite and >= 0")
        if self.steps < 1:
            raise InvariantViolation("steps must be >= 1")
        if self.groups_per_step < 1:
            raise InvariantViolation("groups_per_step must be >= 1")
        if self.rollouts_per_group < 2:
            raise InvariantViolation("rollouts_per_group must be >= 2")
        if not self.beta_max > 0:
            raise InvariantViolation("beta_max must be > 0")
        if self.env_size < 1:
            raise InvariantViolation("env_size must be >= 1")
        if self.archive_capacity < 1:
            raise InvariantViolation("archive_capacity must be >= 1")
        if self.workers < 1:
            raise InvariantViolation("workers must be >= 1")
        if not 0.0 <= self.reuse_epsilon <= 1.0:
            raise InvariantViolation("reuse_epsilon must be in [0, 1]")
        if self.seed_mode not in ("constant", "random"):
            raise InvariantViolation("seed_mode must be 'constant' or 'random'")
        if self.kl_budget_gamma <= 0 or self.kl_penalty_lambda < 0 or self.epsilon_stabilizer < 0:
            raise InvariantViolation("gamma must be > 0; lambda and epsilon must be >= 0")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvariantViolation(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# --- attempts and logs -------------------------------------------------------


@dataclass(frozen=True)
class Attempt:
    id: int
    parent_id: Optional[int]
    construction: Optional[Construction]
    reward: float
    bound: float
    step_index: int
    group_index: int


@dataclass(frozen=True)
class StepLog:
    step_index: int
    rewards: list[float] = field(default_factory=list)
    best_reward_so_far: float = 0.0
    best_bound_so_far: float = math.inf
    betas: list[float] = field(default_factory=list)
    selected_node_ids: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        # Non-finite bounds (nothing valid found yet) are written as null.
        d = asdict(self)
        if not math.isfinite(d["best_bound_so_far"]):
            d["best_bound_so_far"] = None
        return json.dumps(d, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "StepLog":
        d = json.loads(line)
        if not isinstance(d, dict) or set(d) != {f.name for f in fields(cls)}:
            raise MalformedInput("step log line has unexpected keys")
        if d["best_bound_so_far"] is None:
            d["best_bound_so_far"] = math.inf
        return cls(**d)


def write_jsonl(path, logs: Iterable[StepLog]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json() + "\n")


def read_jsonl(path) -> list[StepLog]:
    with open(path, encoding="utf-8") as fh:
        return [StepLog.from_json(line) for line in fh if line.strip()]
