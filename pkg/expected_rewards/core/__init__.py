"""Extended reals, MDPs, fixed-point iteration and reachability."""

from expected_rewards.core.extreal import INFINITY, ONE, ZERO, ExtValue
from expected_rewards.core.fixpoint import (
    BellmanMode,
    ValueFunction,
    Verdict,
    divergence_probe,
    extract_min_scheduler,
    kleene_iterate,
    park_check,
)
from expected_rewards.core.mdp import Distribution, ExplicitMdp, LazyMdp, Mdp, RewardFn
from expected_rewards.core.telemetry import TracingService

__all__ = [
    "BellmanMode",
    "Distribution",
    "ExplicitMdp",
    "ExtValue",
    "INFINITY",
    "LazyMdp",
    "Mdp",
    "ONE",
    "RewardFn",
    "TracingService",
    "ValueFunction",
    "Verdict",
    "ZERO",
    "divergence_probe",
    "extract_min_scheduler",
    "kleene_iterate",
    "park_check",
]
