"""Bellman operators, Kleene iteration, Park induction and min-scheduler extraction."""

import logging
from collections.abc import Mapping as MappingABC
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from expected_rewards.core.extreal import INFINITY, ZERO, ExtValue, ext_add, render_ext
from expected_rewards.core.mdp import Action, Mdp, MemorylessScheduler, RewardFn, State
from expected_rewards.core.telemetry import traced

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 2_000_000

Edges = List[Tuple[Action, Tuple[Tuple[State, Fraction], ...]]]


class FixpointError(Exception):
    """Base error for fixed-point computations."""

    pass


class ResourceCapExceeded(FixpointError):
    """Raised when an exploration would materialize more states than its budget."""

    def __init__(self, explored: int, budget: int) -> None:
        super().__init__(f"Exploration reached {explored} states, node budget is {budget}")
        self.explored = explored
        self.budget = budget


class DomainNotClosedError(FixpointError):
    """Raised when a domain has a successor outside itself."""

    def __init__(self, escaping: State, source: State, action: Action) -> None:
        super().__init__(
            f"Domain is not successor-closed: {escaping} is reachable from {source} via {action}"
        )
        self.escaping = escaping
        self.source = source
        self.action = action


class BellmanMode(str, Enum):
    MIN = "min"
    MAX = "max"


class Verdict(str, Enum):
    CONVERGED_EXACT = "converged-exact"
    LOWER_BOUND = "lower-bound"


class ValueFunction:
    """Sparse map from states to extended values; unlisted states are 0."""

    def __init__(self, values: Optional[Mapping[State, ExtValue]] = None) -> None:
        self._values: Dict[State, ExtValue] = dict(values or {})

    @classmethod
    def constant(cls, states: Iterable[State], value: ExtValue) -> "ValueFunction":
        return cls({s: value for s in states})

    def __getitem__(self, state: State) -> ExtValue:
        return self._values.get(state, ZERO)

    def __contains__(self, state: State) -> bool:
        return state in self._values

    def __iter__(self) -> Iterator[State]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def items(self) -> Iterator[Tuple[State, ExtValue]]:
        return iter(self._values.items())

    def updated(self, values: Mapping[State, ExtValue]) -> "ValueFunction":
        merged = dict(self._values)
        merged.update(values)
        return ValueFunction(merged)

    def leq(self, other: "ValueFunction", domain: Iterable[State]) -> bool:
        """Pointwise order on ``domain``."""
        return all(self[s] <= other[s] for s in domain)

    def to_dict(self) -> Dict[str, str]:
        return {str(s): render_ext(v) for s, v in self._values.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ValueFunction):
            return NotImplemented
        keys = set(self._values) | set(other._values)
        return all(self[s] == other[s] for s in keys)

    def __repr__(self) -> str:
        return f"ValueFunction({self.to_dict()})"


def _weighted_sum(pairs: Iterable[Tuple[State, Fraction]], lookup: Mapping[State, ExtValue]) -> ExtValue:
    # Support probabilities are positive, so an infinite successor makes the sum infinite.
    total = Fraction(0)
    for target, probability in pairs:
        value = lookup.get(target, ZERO)
        if value.rational is None:
            return INFINITY
        total += probability * value.rational
    return ExtValue(total)


def _optimize(mode: BellmanMode, values: Iterable[ExtValue]) -> ExtValue:
    return min(values) if mode is BellmanMode.MIN else max(values)


def _edges(mdp: Mdp, state: State) -> Edges:
    return [(a, mdp.successors(state, a).support) for a in mdp.enabled_actions(state)]


def _bellman_value(
    reward: ExtValue, mode: BellmanMode, edges: Edges, lookup: Mapping[State, ExtValue]
) -> ExtValue:
    return ext_add(reward, _optimize(mode, (_weighted_sum(pairs, lookup) for _, pairs in edges)))


def bellman_apply(
    mdp: Mdp,
    rew: RewardFn,
    mode: BellmanMode,
    v: ValueFunction,
    frontier: Iterable[State],
) -> ValueFunction:
    """One application of the min- or max-Bellman operator on ``frontier``; other states keep ``v``."""
    mode = BellmanMode(mode)
    lookup = _LookupView(v)
    updates = {s: _bellman_value(rew(s), mode, _edges(mdp, s), lookup) for s in frontier}
    return v.updated(updates)


class _LookupView(MappingABC):
    """Mapping adapter over a ValueFunction with default 0."""

    def __init__(self, v: ValueFunction) -> None:
        self._v = v

    def __getitem__(self, state: State) -> ExtValue:
        return self._v[state]

    def get(self, state: State, default: Any = None) -> ExtValue:
        return self._v[state]

    def __iter__(self) -> Iterator[State]:
        return iter(self._v)

    def __len__(self) -> int:
        return len(self._v)


@dataclass
class KleeneResult:
    """Iterates Φ^0(0), ..., Φ^steps(0) restricted to the start states."""

    start: Tuple[State, ...]
    mode: BellmanMode
    iterates: List[ValueFunction] = field(default_factory=list)
    verdict: Verdict = Verdict.LOWER_BOUND
    converged_at: Optional[int] = None
    explored_states: int = 0

    def __getitem__(self, k: int) -> ValueFunction:
        return self.iterates[k]

    def __len__(self) -> int:
        return len(self.iterates)

    @property
    def last(self) -> ValueFunction:
        return self.iterates[-1]

    def values_at(self, state: State) -> List[ExtValue]:
        return [v[state] for v in self.iterates]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "steps": len(self.iterates) - 1,
            "verdict": self.verdict.value,
            "converged_at": self.converged_at,
            "explored_states": self.explored_states,
            "final": self.last.to_dict(),
        }


def _explore(
    mdp: Mdp, start: Sequence[State], depth: int, max_nodes: int
) -> Tuple[List[List[State]], Dict[State, Edges], bool]:
    """Breadth-first layers up to ``depth`` with edges for every layer before the last.

    Returns the layers, the expanded edges and whether the region closed early.
    """
    layers: List[List[State]] = [list(start)]
    seen = set(start)
    edges: Dict[State, Edges] = {}

    for _ in range(depth):
        following: List[State] = []
        for state in layers[-1]:
            edges[state] = _edges(mdp, state)
            for _, pairs in edges[state]:
                for target, _ in pairs:
                    if target not in seen:
                        seen.add(target)
                        following.append(target)
                        if len(seen) > max_nodes:
                            raise ResourceCapExceeded(len(seen), max_nodes)
        if not following:
            return layers, edges, True
        layers.append(following)

    return layers, edges, False


@traced("kleene_iterate")
def kleene_iterate(
    mdp: Mdp,
    rew: RewardFn,
    mode: BellmanMode,
    start: Iterable[State],
    steps: int,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> KleeneResult:
    """Exact iterates Φ^k(0) on ``start`` for k = 0..steps.

    The k-th iterate at a state at distance d is computed from iterate k-1 on
    states within distance d+1, so only states reachable in fewer than ``steps``
    steps are touched. When the reachable region closes within the budget the
    iteration runs over the whole region and a repeated iterate proves that the
    least fixed point was reached.
    """
    mode = BellmanMode(mode)
    if steps < 0:
        raise FixpointError(f"Step count must be non-negative, got {steps}")

    start_states = tuple(dict.fromkeys(start))
    result = KleeneResult(start=start_states, mode=mode)
    result.iterates.append(ValueFunction({s: ZERO for s in start_states}))
    if steps == 0:
        result.explored_states = len(start_states)
        return result

    layers, edges, closed = _explore(mdp, start_states, steps - 1, max_nodes)
    rewards: Dict[State, ExtValue] = {s: rew(s) for layer in layers for s in layer}
    result.explored_states = len(rewards)
    logger.debug(
        f"Kleene iteration ({mode.value}) over {len(rewards)} states, steps={steps}, closed={closed}"
    )

    if closed:
        _iterate_closed(result, mode, layers, edges, rewards, steps)
    else:
        _iterate_layered(result, mode, layers, edges, rewards, steps)
    return result


def _iterate_closed(
    result: KleeneResult,
    mode: BellmanMode,
    layers: List[List[State]],
    edges: Dict[State, Edges],
    rewards: Dict[State, ExtValue],
    steps: int,
) -> None:
    states = [s for layer in layers for s in layer]
    current: Dict[State, ExtValue] = {s: ZERO for s in states}

    for k in range(1, steps + 1):
        following = {s: _bellman_value(rewards[s], mode, edges[s], current) for s in states}
        result.iterates.append(ValueFunction({s: following[s] for s in result.start}))
        if following == current:
            result.verdict = Verdict.CONVERGED_EXACT
            result.converged_at = k - 1
            stable = result.iterates[-1]
            result.iterates.extend(stable for _ in range(k + 1, steps + 1))
            logger.debug(f"Kleene iteration stabilized after {k - 1} steps")
            return
        current = following


def _iterate_layered(
    result: KleeneResult,
    mode: BellmanMode,
    layers: List[List[State]],
    edges: Dict[State, Edges],
    rewards: Dict[State, ExtValue],
    steps: int,
) -> None:
    previous: Dict[State, ExtValue] = {}
    deepest = len(layers) - 1

    for k in range(1, steps + 1):
        limit = min(steps - k, deepest)
        current: Dict[State, ExtValue] = {}
        for depth in range(limit + 1):
            for state in layers[depth]:
                if k == 1:
                    current[state] = rewards[state]
                else:
                    current[state] = _bellman_value(rewards[state], mode, edges[state], previous)
        result.iterates.append(ValueFunction({s: current[s] for s in result.start}))
        previous = current


def ensure_successor_closed(mdp: Mdp, domain: Iterable[State]) -> List[State]:
    """Return ``domain`` as an ordered list, raising DomainNotClosedError on an escaping successor."""
    ordered = list(dict.fromkeys(domain))
    members = set(ordered)
    for state in ordered:
        for action in mdp.enabled_actions(state):
            for target, _ in mdp.successors(state, action):
                if target not in members:
                    raise DomainNotClosedError(target, state, action)
    return ordered


@dataclass(frozen=True)
class ParkResult:
    """Outcome of a Park-induction check: a certificate or a counterexample state."""

    certified: bool
    mode: BellmanMode
    domain_size: int
    counterexample: Optional[State] = None
    bellman_value: Optional[ExtValue] = None
    candidate_value: Optional[ExtValue] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "certified": self.certified,
            "mode": self.mode.value,
            "domain_size": self.domain_size,
        }
        if not self.certified:
            data["counterexample"] = str(self.counterexample)
            data["bellman_value"] = render_ext(self.bellman_value or ZERO)
            data["candidate_value"] = render_ext(self.candidate_value or ZERO)
        return data


@traced("park_check")
def park_check(
    mdp: Mdp,
    rew: RewardFn,
    mode: BellmanMode,
    candidate: ValueFunction,
    domain: Iterable[State],
) -> ParkResult:
    """Certify lfp ⪯ candidate on a successor-closed ``domain`` by checking Φ(candidate) ⪯ candidate."""
    mode = BellmanMode(mode)
    ordered = ensure_successor_closed(mdp, domain)
    lookup = _LookupView(candidate)

    for state in ordered:
        value = _bellman_value(rew(state), mode, _edges(mdp, state), lookup)
        if not value <= candidate[state]:
            logger.info(f"Park check failed at {state}: {value} > {candidate[state]}")
            return ParkResult(False, mode, len(ordered), state, value, candidate[state])

    logger.info(f"Park certificate accepted on {len(ordered)} states ({mode.value})")
    return ParkResult(True, mode, len(ordered))


def extract_min_scheduler(
    mdp: Mdp,
    rew: RewardFn,
    v: ValueFunction,
    domain: Iterable[State],
    action_order: Optional[Sequence[Action]] = None,
) -> MemorylessScheduler:
    """Memoryless scheduler choosing the first action, in ``action_order``, minimizing Σ P·v."""
    ordered = ensure_successor_closed(mdp, domain)
    rank = {a: i for i, a in enumerate(action_order or mdp.action_labels)}
    lookup = _LookupView(v)
    choices: Dict[State, Action] = {}

    for state in ordered:
        best_action: Optional[Action] = None
        best_value: Optional[ExtValue] = None
        # rew(state) is common to all actions and does not affect the argmin.
        for action in sorted(mdp.enabled_actions(state), key=lambda a: rank.get(a, len(rank))):
            value = _weighted_sum(mdp.successors(state, action), lookup)
            if best_value is None or value < best_value:
                best_action, best_value = action, value
        assert best_action is not None
        choices[state] = best_action

    return MemorylessScheduler(choices)


@dataclass(frozen=True)
class DivergenceVerdict:
    """One-sided witness: a Kleene lower bound passed the threshold, or no witness within the cap."""

    exceeds_threshold: bool
    threshold: ExtValue
    steps_examined: int
    step: Optional[int] = None
    value: ExtValue = ZERO

    @property
    def label(self) -> str:
        return "exceeds-threshold" if self.exceeds_threshold else "below-threshold-at-cap"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.label,
            "threshold": render_ext(self.threshold),
            "step": self.step,
            "value": render_ext(self.value),
            "steps_examined": self.steps_examined,
        }


def divergence_probe(
    mdp: Mdp,
    rew: RewardFn,
    mode: BellmanMode,
    state: State,
    threshold: ExtValue,
    step_cap: int,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> DivergenceVerdict:
    """Search for a Kleene iterate at ``state`` strictly above ``threshold`` within ``step_cap`` steps."""
    if threshold.is_infinite:
        raise FixpointError("Divergence threshold must be finite")
    if step_cap < 0:
        raise FixpointError(f"Step cap must be non-negative, got {step_cap}")

    horizon = min(16, step_cap)
    while True:
        result = kleene_iterate(mdp, rew, mode, [state], horizon, max_nodes)
        values = result.values_at(state)
        for k, value in enumerate(values):
            if value > threshold:
                logger.info(f"Iterate {k} at {state} is {value}, above threshold {threshold}")
                return DivergenceVerdict(True, threshold, horizon, k, value)
        if horizon >= step_cap or result.verdict is Verdict.CONVERGED_EXACT:
            return DivergenceVerdict(False, threshold, horizon, None, values[-1])
        horizon = min(2 * horizon, step_cap)


__all__ = [
    "BellmanMode",
    "DEFAULT_MAX_NODES",
    "DivergenceVerdict",
    "DomainNotClosedError",
    "FixpointError",
    "KleeneResult",
    "ParkResult",
    "ResourceCapExceeded",
    "ValueFunction",
    "Verdict",
    "bellman_apply",
    "divergence_probe",
    "ensure_successor_closed",
    "extract_min_scheduler",
    "kleene_iterate",
    "park_check",
]
