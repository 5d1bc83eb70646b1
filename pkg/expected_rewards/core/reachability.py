"""Reachability probabilities as total expected rewards on a sink-redirected MDP."""

import fnmatch
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, FrozenSet, Iterable, Optional, Sequence, Tuple

from expected_rewards.core.extreal import ONE, ZERO, ExtValue
from expected_rewards.core.fixpoint import (
    DEFAULT_MAX_NODES,
    BellmanMode,
    KleeneResult,
    ParkResult,
    ValueFunction,
    kleene_iterate,
    park_check,
)
from expected_rewards.core.mdp import Action, Distribution, Mdp, MdpError, RewardFn, State

logger = logging.getLogger(__name__)


class ReachSink(Enum):
    """The fresh absorbing state added by the reachability transformation."""

    SINK = "reach-sink"

    def __str__(self) -> str:
        return self.value


REACH_SINK = ReachSink.SINK


@dataclass(frozen=True)
class TargetSet:
    """Target states, listed explicitly and/or described by a membership predicate."""

    members: FrozenSet[State] = frozenset()
    predicate: Optional[Callable[[State], bool]] = field(default=None, compare=False)

    @classmethod
    def of(cls, states: Iterable[State]) -> "TargetSet":
        return cls(frozenset(states))

    @classmethod
    def from_patterns(cls, patterns: Sequence[str]) -> "TargetSet":
        """Match state names against shell-style patterns such as ``s*^R``."""
        compiled = tuple(patterns)

        def matches(state: State) -> bool:
            name = str(state)
            return any(fnmatch.fnmatchcase(name, pattern) for pattern in compiled)

        return cls(frozenset(), matches)

    def __contains__(self, state: object) -> bool:
        if state is REACH_SINK:
            return False
        if state in self.members:
            return True
        return self.predicate is not None and self.predicate(state)


class ReachMdp:
    """Base MDP with every target state redirected to a fresh sink under every action."""

    def __init__(self, base: Mdp, targets: TargetSet) -> None:
        self.base = base
        self.targets = targets

    @property
    def action_labels(self) -> Sequence[Action]:
        return self.base.action_labels

    def _redirected(self, state: State) -> bool:
        return state is REACH_SINK or state in self.targets

    def enabled_actions(self, state: State) -> Sequence[Action]:
        if self._redirected(state):
            return tuple(self.base.action_labels)
        return self.base.enabled_actions(state)

    def successors(self, state: State, action: Action) -> Distribution:
        if self._redirected(state):
            if action not in self.base.action_labels:
                raise MdpError(f"Unknown action {action!r}")
            return Distribution.dirac(REACH_SINK)
        return self.base.successors(state, action)


def reach_transform(mdp: Mdp, targets: TargetSet) -> Tuple[ReachMdp, RewardFn]:
    """Return the redirected MDP and the reward collecting 1 on entering a target."""

    def reward(state: State) -> ExtValue:
        return ONE if state in targets else ZERO

    return ReachMdp(mdp, targets), RewardFn(rule=reward)


def reach_probability(
    mdp: Mdp,
    targets: TargetSet,
    start: State,
    mode: BellmanMode,
    steps: int,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> KleeneResult:
    """Kleene lower bounds on the min or max probability of reaching ``targets`` from ``start``."""
    reach_mdp, reward = reach_transform(mdp, targets)
    result = kleene_iterate(reach_mdp, reward, mode, [start], steps, max_nodes)
    logger.debug(f"Reach probability at {start} after {steps} steps: {result.last[start]}")
    return result


def reach_certificate(
    mdp: Mdp,
    targets: TargetSet,
    mode: BellmanMode,
    candidate: ValueFunction,
    domain: Iterable[State],
) -> ParkResult:
    """Park check on the redirected MDP; the fresh sink joins ``domain`` with its candidate value."""
    reach_mdp, reward = reach_transform(mdp, targets)
    states = list(domain)
    if REACH_SINK not in states:
        states.append(REACH_SINK)
    return park_check(reach_mdp, reward, mode, candidate, states)


__all__ = [
    "REACH_SINK",
    "ReachMdp",
    "ReachSink",
    "TargetSet",
    "reach_certificate",
    "reach_probability",
    "reach_transform",
]
