"""Test-time search and training for verifiable mathematical constructions."""

from .archive import Archive, ArchiveNode, epsilon_greedy_select, no_reuse_select, puct_select
from .core import (
    Attempt,
    Construction,
    EnvKind,
    ObjectiveMode,
    ReuseMode,
    RunConfig,
    StepLog,
    decode_construction,
    encode_construction,
)
from .engine import RunResult, run_ablation, run_best_of_n, run_discover
from .environments import Environment
from .policy import ExternalPolicy, ExternalPolicyHandle, MutationPolicy
from .verifiers import VerifierResult, verify_ac1, verify_ac2, verify_circle_packing, verify_erdos

__version__ = "0.1.0"
