"""Proposal policies.

:class:`MutationPolicy` is a softmax over (operator, magnitude) cells; a
sampled cell is applied to the start state and the result is projected back
onto the environment's hard constraints. :class:`ExternalPolicy` forwards
proposals to a child process speaking line-delimited JSON.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .core import MAGNITUDES, OPERATORS, Construction, InvariantViolation, Kind

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class Proposal:
    construction: Optional[Construction]
    cell: Optional[int]
    log_prob: float
    error: Optional[str] = None


# --- mutation operators ------------------------------------------------------
# All operators act on rows: one row per piece (step function) or per circle.


def _block(n: int, m: float, rng) -> slice:
    length = min(n, max(1, math.ceil(m * n)))
    i = int(rng.integers(0, n - length + 1))
    return slice(i, i + length)


def gaussian_perturb(x, m, rng):
    scale = float(np.mean(np.abs(x))) or 1.0
    return x + m * scale * rng.standard_normal(x.shape)


def block_resample(x, m, rng):
    """Replace a block of ``ceil(m n)`` pieces with one random level in ``[0, 2 mean]``."""
    y = x.copy()
    sl = _block(len(x), m, rng)
    y[sl] = rng.uniform(0.0, 2.0) * float(np.mean(x))
    return y


def block_resample_circles(c, m, rng):
    """Re-place a block of circles uniformly in the square at the mean radius."""
    y = c.copy()
    sl = _block(len(c), m, rng)
    k = sl.stop - sl.start
    y[sl, :2] = rng.uniform(0.0, 1.0, (k, 2))
    y[sl, 2] = float(np.mean(c[:, 2]))
    return y


def smooth(x, m, rng):
    """Add a Gaussian bump of random center, width and sign (height ``m`` relative)."""
    n = len(x)
    scale = float(np.mean(np.abs(x))) or 1.0
    center = rng.uniform(0, n)
    width = max(1.0, n * rng.uniform(0.01, 0.3))
    bump = np.exp(-0.5 * ((np.arange(n) + 0.5 - center) / width) ** 2)
    return x + (m * scale * rng.standard_normal()) * bump.reshape((n,) + (1,) * (x.ndim - 1))


def splice_swap(x, m, rng):
    n = len(x)
    length = min(n // 2, max(1, math.ceil(m * n)))
    y = x.copy()
    if length == 0:
        return y
    i, j = rng.choice(n - length + 1, size=2, replace=False)
    a, b = x[i:i + length].copy(), x[j:j + length].copy()
    y[j:j + length] = a
    y[i:i + length] = b
    return y


def rescale_project(x, m, rng):
    """Rescale with a factor that tilts linearly across the domain."""
    n = len(x)
    ramp = np.linspace(-1.0, 1.0, n).reshape((n,) + (1,) * (x.ndim - 1))
    return x * np.exp(m * rng.standard_normal() * ramp)


_APPLY = (gaussian_perturb, block_resample, smooth, splice_swap, rescale_project)


def _rows(c: Construction) -> np.ndarray:
    if c.kind is Kind.STEP_FUNCTION:
        return np.asarray(c.heights, dtype=np.float64).reshape(-1, 1)
    return np.asarray(c.circles, dtype=np.float64).reshape(-1, 3)


def apply_operator(op: int, magnitude: float, state: Construction, env, rng) -> Construction:
    x = _rows(state)
    name = OPERATORS[op]
    if name == "RescaleProject" and state.kind is Kind.CIRCLE_PACKING:
        # Grow (or shrink) all radii; projection then resolves contacts.
        y = x.copy()
        y[:, 2] = x[:, 2] * math.exp(magnitude * rng.standard_normal())
    elif name == "BlockResample" and state.kind is Kind.CIRCLE_PACKING:
        y = block_resample_circles(x, magnitude, rng)
    else:
        y = _APPLY[op](x, magnitude, rng)
    return env.from_array(env.project(y.reshape(-1) if x.shape[1] == 1 else y))


class MutationPolicy:
    """State-independent softmax policy over (operator, magnitude) cells.

    Cell ``k`` corresponds to ``operators[k // len(magnitudes)]`` applied at
    ``magnitudes[k % len(magnitudes)]``. ``reference_logits`` is frozen at
    construction time and anchors the KL penalty.
    """

    trainable = True

    def __init__(self, operators: Sequence[str] = OPERATORS, magnitudes: Sequence[float] = MAGNITUDES,
                 logits: Optional[np.ndarray] = None):
        unknown = [o for o in operators if o not in OPERATORS]
        if unknown:
            raise ValueError(f"unknown operators: {unknown}")
        self.operators = tuple(operators)
        self.magnitudes = tuple(float(m) for m in magnitudes)
        if not self.operators or not self.magnitudes:
            raise ValueError("operators and magnitudes must be non-empty")
        if not all(math.isfinite(m) and m >= 0 for m in self.magnitudes):
            raise ValueError("magnitudes must be finite and >= 0")
        shape = (len(self.operators), len(self.magnitudes))
        if logits is None:
            logits = np.zeros(shape)
        logits = np.array(logits, dtype=np.float64).reshape(shape)
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        self.logits = logits
        self._reference = logits.copy()
        self._reference.flags.writeable = False

    @property
    def reference_logits(self) -> np.ndarray:
        return self._reference

    @property
    def n_cells(self) -> int:
        return self.logits.size

    def probabilities(self) -> np.ndarray:
        return softmax(self.logits.ravel())

    def log_prob(self, cell: int) -> float:
        return float(log_softmax(self.logits.ravel())[cell])

    def reference_log_prob(self, cell: int) -> float:
        return float(log_softmax(self._reference.ravel())[cell])

    def cell_info(self, cell: int) -> tuple[str, float]:
        i, j = divmod(cell, len(self.magnitudes))
        return self.operators[i], self.magnitudes[j]

    def sample_cell(self, rng: np.random.Generator) -> int:
        p = self.probabilities()
        # Inverse-CDF sampling keeps the draw count fixed at one uniform per cell choice.
        k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        return min(k, p.size - 1)

    def propose(self, state: Construction, rng: np.random.Generator, env, context=None) -> Proposal:
        cell = self.sample_cell(rng)
        name, magnitude = self.cell_info(cell)
        new = apply_operator(OPERATORS.index(name), magnitude, state, env, rng)
        return Proposal(new, cell, self.log_prob(cell))

    def update(self, samples: Sequence[tuple[int, float, float]], eta: float) -> "MutationPolicy":
        """One ascent step ``logits += eta * sum_n A_n grad log p(cell_n)``.

        ``samples`` holds ``(cell, log_prob, advantage)`` triples for the whole batch.
        """
        if not samples:
            raise ValueError("samples must be non-empty")
        if not eta > 0:
            raise ValueError("eta must be > 0")
        p = self.probabilities()
        grad = np.zeros_like(p)
        for cell, _, adv in samples:
            if cell is None or adv == 0.0:
                continue
            grad -= adv * p
            grad[cell] += adv
        self.logits = self.logits + eta * grad.reshape(self.logits.shape)
        return self


# --- external process bridge -------------------------------------------------


class ExternalPolicyError(RuntimeError):
    pass


class ExternalPolicyTimeout(ExternalPolicyError):
    pass


class MalformedResponse(ExternalPolicyError):
    pass


class ExternalPolicyHandle:
    """Line-delimited JSON channel to a proposal process.

    Messages (one JSON object per line)::

        -> {"type": "hello", "version": 1}
        <- {"type": "hello", "version": 1}
        -> {"type": "propose", "env": "ac1", "state": [...], "best_reward": 0.5, "step": 3}
        <- {"type": "proposal", "state": [...]}

    Step-function states are flat number arrays, circle packings arrays of
    ``[x, y, r]``. A process that misses the timeout is killed and restarted
    on the next request, so a late reply can never be paired with a new one.
    """

    def __init__(self, command: Sequence[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: Optional[queue.Queue] = None
        self._lock = threading.Lock()

    def _start(self) -> None:
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()
        self._send({"type": "hello", "version": PROTOCOL_VERSION})
        reply = self._receive()
        if reply.get("type") != "hello" or reply.get("version") != PROTOCOL_VERSION:
            self.close()
            raise MalformedResponse(f"bad handshake: {reply!r}")

    @staticmethod
    def _pump(proc, lines):
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def _send(self, msg: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise ExternalPolicyError(f"policy process unavailable: {exc}") from None

    def _receive(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close()
            raise ExternalPolicyTimeout(f"no response within {self.timeout}s") from None
        if line is None:
            self.close()
            raise ExternalPolicyError("policy process exited")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedResponse(f"malformed response: {line.strip()[:200]!r}") from None
        if not isinstance(msg, dict):
            raise MalformedResponse(f"malformed response: {line.strip()[:200]!r}")
        return msg

    def request(self, msg: dict) -> dict:
        with self._lock:
            if self._proc is None:
                self._start()
            self._send(msg)
            return self._receive()

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        if proc.poll() is None:
            proc.kill()
        proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _state_payload(c: Construction):
    if c.kind is Kind.STEP_FUNCTION:
        return list(c.heights)
    return [list(t) for t in c.circles]


def external_propose(handle: ExternalPolicyHandle, state: Construction, context: dict) -> Construction:
    """Ask the external process for a proposal and validate it.

    ``context`` supplies ``env``, ``best_reward`` and ``step``. Raises
    :class:`ExternalPolicyTimeout`, :class:`MalformedResponse` or
    :class:`~discover.core.InvariantViolation`.
    """
    reply = handle.request({
        "type": "propose",
        "env": context.get("env", ""),
        "state": _state_payload(state),
        "best_reward": float(context.get("best_reward", 0.0)),
        "step": int(context.get("step", 0)),
    })
    if reply.get("type") != "proposal" or not isinstance(reply.get("state"), list):
        raise MalformedResponse(f"malformed response: {reply!r}")
    values = reply["state"]
    try:
        if state.kind is Kind.STEP_FUNCTION:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise MalformedResponse("malformed response: state must be numbers")
            return Construction.step_function(values)
        if not all(isinstance(t, list) and len(t) == 3 for t in values):
            raise MalformedResponse("malformed response: state must be [x, y, r] triples")
        return Construction.circle_packing(values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (InvariantViolation, MalformedResponse)):
            raise
        raise MalformedResponse(f"malformed response: {exc}") from None


class ExternalPolicy:
    """Engine adapter around :class:`ExternalPolicyHandle`; not trainable.

    Failures become proposals with ``construction=None`` and an error string,
    which the engine scores as reward 0.
    """

    trainable = False

    def __init__(self, handle: ExternalPolicyHandle):
        self.handle = handle

    def propose(self, state, rng, env, context=None) -> Proposal:
        ctx = {"env": env.name, **(context or {})}
        try:
            return Proposal(external_propose(self.handle, state, ctx), None, 0.0)
        except (ExternalPolicyError, InvariantViolation) as exc:
            logger.warning("external proposal failed: %s", exc)
            return Proposal(None, None, 0.0, f"{type(exc).__name__}: {exc}")

    def update(self, samples, eta):
        return self
