"""Command-line driver.

::

    discover run --config run.cfg [--set key=value]... [--mode discover|best-of-n|ablation:NAME]
    discover verify ENV PATH
    discover report RUN_LOG [--steps 0,24,49] [--out DIR] [--bins 20]

Exit codes: 0 ok, 1 invalid construction, 2 bad config, 3 I/O error,
4 corrupt or empty log, 5 log invariant breach.

Config files are flat ``key = value`` lines with dotted keys; ``#`` starts a
comment. See :data:`CONFIG_KEYS` for the mapping onto :class:`RunConfig`.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    EnvKind,
    InvariantViolation,
    MalformedInput,
    RunConfig,
    StepLog,
    decode_construction,
    encode_construction,
    write_jsonl,
)
from .engine import ABLATIONS, run_ablation, run_best_of_n, run_discover
from .environments import Environment

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_IO, EXIT_CORRUPT_LOG, EXIT_INVARIANT = range(6)

CONFIG_KEYS = {
    "env.kind": "env",
    "env.size": "env_size",
    "env.seed_mode": "seed_mode",
    "run.steps": "steps",
    "run.groups": "groups_per_step",
    "run.rollouts": "rollouts_per_group",
    "run.seed": "rng_seed",
    "run.workers": "workers",
    "puct.c": "puct_c",
    "reuse.mode": "reuse_mode",
    "reuse.epsilon": "reuse_epsilon",
    "archive.capacity": "archive_capacity",
    "objective.mode": "objective_mode",
    "objective.gamma": "kl_budget_gamma",
    "objective.lambda": "kl_penalty_lambda",
    "objective.eta": "learning_rate_eta",
    "objective.epsilon": "epsilon_stabilizer",
    "objective.beta_max": "beta_max",
    "objective.beta": "constant_beta",
    "policy.operators": "operators",
    "policy.magnitudes": "magnitudes",
}
FIELD_TO_KEY = {v: k for k, v in CONFIG_KEYS.items()}
OUTPUT_KEY = "output.dir"


class ConfigError(ValueError):
    pass


def _coerce(field_name: str, raw: str):
    default = getattr(RunConfig(), field_name)
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return tuple(float(x) for x in items) if field_name == "magnitudes" else tuple(items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int) and not isinstance(default, bool) and not hasattr(default, "value"):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {FIELD_TO_KEY[field_name]}: {raw!r}") from None
    return raw.replace("-", "_") if hasattr(default, "value") else raw


def parse_config_text(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def build_config(pairs: dict[str, str]) -> tuple[RunConfig, Optional[str]]:
    kwargs = {}
    output = None
    for key, raw in pairs.items():
        if key == OUTPUT_KEY:
            output = raw
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[CONFIG_KEYS[key]] = _coerce(CONFIG_KEYS[key], raw)
    try:
        return RunConfig(**kwargs), output
    except (InvariantViolation, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def format_config(config: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(config, f.name)
        v = v.value if hasattr(v, "value") else v
        if isinstance(v, float):
            v = format(v, ".17g")
        elif isinstance(v, tuple):
            v = ", ".join(format(x, ".17g") if isinstance(x, float) else x for x in v)
        lines.append(f"{FIELD_TO_KEY[f.name]} = {v}")
    return "\n".join(lines) + "\n"


def parse_env(name: str, default_size: Optional[int] = None) -> Environment:
    """``ac1``, ``ac2``, ``erdos``, ``circle_packing`` with an optional ``:N`` size."""
    base, _, size = name.partition(":")
    try:
        kind = EnvKind(base.replace("-", "_").lower())
    except ValueError:
        raise ConfigError(f"unknown environment {name!r}") from None
    return Environment(kind, int(size) if size else (default_size or 0))


# --- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        pairs = parse_config_text(text)
        for item in args.set or []:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            pairs[k.strip()] = v.strip()
        config, output = build_config(pairs)
        mode = args.mode or "discover"
        if mode.startswith("ablation:") and mode.split(":", 1)[1] not in ABLATIONS:
            raise ConfigError(f"unknown ablation {mode.split(':', 1)[1]!r}; choose from {sorted(ABLATIONS)}")
        if mode not in ("discover", "best-of-n") and not mode.startswith("ablation:"):
            raise ConfigError(f"unknown mode {mode!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(output or "run_output")
    print(f"rng_seed = {config.rng_seed}")
    if mode == "discover":
        result = run_discover(config)
    elif mode == "best-of-n":
        result = run_best_of_n(config)
    else:
        result = run_ablation(config, mode.split(":", 1)[1])

    try:
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "run_log.jsonl", result.step_logs)
        with open(out / "archive.jsonl", "w", encoding="utf-8") as fh:
            for snap in result.archive_snapshots:
                fh.write(json.dumps(snap) + "\n")
        (out / "config_echo.cfg").write_text(format_config(result.config_echo), encoding="utf-8")
        if result.best_attempt.construction is not None:
            (out / "best.json").write_bytes(encode_construction(result.best_attempt.construction))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"best bound = {result.best_attempt.bound:.10f}")
    return EXIT_OK


# --- verify ------------------------------------------------------------------


def cmd_verify(args) -> int:
    try:
        data = Path(args.path).read_bytes()
    except OSError as exc:
        print(f"error: cannot read construction: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        construction = decode_construction(data)
    except (MalformedInput, InvariantViolation) as exc:
        print(json.dumps({"valid": False, "bound": None, "reward": 0.0, "rejection_reason": str(exc)}))
        return EXIT_INVALID
    try:
        env = parse_env(args.env, default_size=len(construction.circles))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = env.verify(construction)
    print(json.dumps(result.to_dict()))
    return EXIT_OK if result.valid else EXIT_INVALID


# --- report ------------------------------------------------------------------


@dataclass
class ReportBundle:
    per_step_histograms: list[tuple[int, np.ndarray, np.ndarray]]
    best_trajectory: list[tuple[int, float]]


class CorruptLog(ValueError):
    pass


def load_log(path) -> list[StepLog]:
    logs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                logs.append(StepLog.from_json(line))
            except (ValueError, TypeError) as exc:
                raise CorruptLog(f"line {lineno}: {exc}") from None
    if not logs:
        raise CorruptLog("log is empty")
    return logs


def build_report(logs: Sequence[StepLog], steps: Optional[Sequence[int]] = None, bins: int = 20) -> ReportBundle:
    if steps is None:
        idx = sorted({0, len(logs) // 2, len(logs) - 1})
    else:
        idx = list(steps)
    by_step = {log.step_index: log for log in logs}
    hists = []
    for s in idx:
        if s not in by_step:
            raise KeyError(f"step {s} not in log")
        counts, edges = np.histogram(np.asarray(by_step[s].rewards, dtype=float), bins=bins)
        hists.append((s, edges, counts))
    traj = [(log.step_index, log.best_bound_so_far) for log in logs]
    return ReportBundle(hists, traj)


def is_monotone(logs: Sequence[StepLog]) -> bool:
    best = [log.best_reward_so_far for log in logs]
    return all(b >= a for a, b in zip(best, best[1:]))


def cmd_report(args) -> int:
    try:
        logs = load_log(args.path)
    except OSError as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return EXIT_IO
    except CorruptLog as exc:
        print(f"error: corrupt log: {exc}", file=sys.stderr)
        return EXIT_CORRUPT_LOG
    if not is_monotone(logs):
        print("error: best_reward_so_far decreases", file=sys.stderr)
        return EXIT_INVARIANT
    steps = None
    if args.steps:
        try:
            steps = [int(s) for s in args.steps.split(",")]
        except ValueError:
            print(f"error: bad --steps {args.steps!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        bundle = build_report(logs, steps, args.bins)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(args.path).parent
    try:
        out.mkdir(parents=True, exist_ok=True)
        for step, edges, counts in bundle.per_step_histograms:
            with open(out / f"hist_step_{step}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["bin_left", "bin_right", "count"])
                for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                    w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        with open(out / "best_trajectory.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step_index", "best_bound"])
            for step, bound in bundle.best_trajectory:
                w.writerow([step, repr(float(bound)) if math.isfinite(bound) else ""])
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discover", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="launch a discovery run")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--mode", default="discover")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="verify a construction file")
    p.add_argument("env")
    p.add_argument("path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="reward histograms and best-bound trajectory from a run log")
    p.add_argument("path")
    p.add_argument("--steps")
    p.add_argument("--out")
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
