"""Markov decision processes, paths, schedulers and path-based expected rewards."""

import itertools
import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import (
    Any,
    Callable,
    Dict,
    Hashable,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from typing_extensions import Protocol, runtime_checkable

from expected_rewards.core.extreal import (
    ZERO,
    ExtValue,
    ext_add,
    ext_mul,
    ext_sum,
)

logger = logging.getLogger(__name__)

State = Hashable
Action = str

DEFAULT_MAX_SCHEDULERS = 1_000_000


class MdpError(Exception):
    """Raised for ill-formed MDPs, paths or schedulers."""

    pass


class EnumerationBoundExceeded(MdpError):
    """Raised when a brute-force oracle would exceed its scheduler cap."""

    def __init__(self, required: int, cap: int) -> None:
        super().__init__(f"Enumeration requires {required} schedulers, cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class Distribution:
    """Finite-support distribution with exact rational probabilities summing to 1."""

    support: Tuple[Tuple[State, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise MdpError("Distribution has empty support")

        total = Fraction(0)
        seen = set()
        for target, probability in self.support:
            if not isinstance(probability, Fraction):
                raise MdpError(f"Probability for {target!r} must be a Fraction")
            if probability <= 0 or probability > 1:
                raise MdpError(f"Probability {probability} for {target!r} outside (0, 1]")
            if target in seen:
                raise MdpError(f"Duplicate support state {target!r}")
            seen.add(target)
            total += probability

        if total != 1:
            raise MdpError(f"Probabilities sum to {total}, expected exactly 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[State, Union[int, Fraction]]]) -> "Distribution":
        """Merge duplicate targets and drop zero-probability entries, keeping first-seen order."""
        merged: Dict[State, Fraction] = {}
        for target, probability in pairs:
            probability = Fraction(probability)
            if probability == 0:
                continue
            merged[target] = merged.get(target, Fraction(0)) + probability
        return cls(tuple(merged.items()))

    @classmethod
    def dirac(cls, target: State) -> "Distribution":
        return cls(((target, Fraction(1)),))

    def probability(self, target: State) -> Fraction:
        for candidate, probability in self.support:
            if candidate == target:
                return probability
        return Fraction(0)

    def states(self) -> List[State]:
        return [target for target, _ in self.support]

    def __iter__(self) -> Iterator[Tuple[State, Fraction]]:
        return iter(self.support)

    def __len__(self) -> int:
        return len(self.support)


@runtime_checkable
class Mdp(Protocol):
    """Read-only view of a finitely branching MDP over opaque hashable states."""

    @property
    def action_labels(self) -> Sequence[Action]:
        """All action labels in declaration order."""
        ...

    def enabled_actions(self, state: State) -> Sequence[Action]:
        ...

    def successors(self, state: State, action: Action) -> Distribution:
        ...


class ExplicitMdp:
    """Finite MDP given by a transition table."""

    def __init__(
        self,
        states: Sequence[State],
        actions: Sequence[Action],
        transitions: Mapping[Tuple[State, Action], Distribution],
    ) -> None:
        self._states: Tuple[State, ...] = tuple(states)
        self._actions: Tuple[Action, ...] = tuple(actions)
        self._transitions: Dict[Tuple[State, Action], Distribution] = dict(transitions)
        self._enabled: Dict[State, Tuple[Action, ...]] = {}
        self._validate()

    def _validate(self) -> None:
        declared_states = set(self._states)
        declared_actions = set(self._actions)

        if len(declared_states) != len(self._states):
            raise MdpError("Duplicate state declaration")
        if len(declared_actions) != len(self._actions):
            raise MdpError("Duplicate action declaration")

        for (state, action), distribution in self._transitions.items():
            if state not in declared_states:
                raise MdpError(f"Transition from undeclared state {state!r}")
            if action not in declared_actions:
                raise MdpError(f"Transition uses undeclared action {action!r}")
            for target in distribution.states():
                if target not in declared_states:
                    raise MdpError(f"Transition {state!r} --{action}--> undeclared state {target!r}")

        for state in self._states:
            enabled = tuple(a for a in self._actions if (state, a) in self._transitions)
            if not enabled:
                raise MdpError(f"State {state!r} has no enabled action")
            self._enabled[state] = enabled

    @property
    def states(self) -> Tuple[State, ...]:
        return self._states

    @property
    def action_labels(self) -> Sequence[Action]:
        return self._actions

    def enabled_actions(self, state: State) -> Sequence[Action]:
        try:
            return self._enabled[state]
        except KeyError as e:
            raise MdpError(f"Unknown state {state!r}") from e

    def successors(self, state: State, action: Action) -> Distribution:
        try:
            return self._transitions[(state, action)]
        except KeyError as e:
            raise MdpError(f"Action {action!r} is not enabled at {state!r}") from e

    def transition_count(self) -> int:
        return len(self._transitions)


Expansion = Callable[[State], Mapping[Action, Distribution]]


class LazyMdp:
    """MDP whose states are materialized on first touch by an expansion function.

    Expansions are memoized; the memo is guarded so concurrent readers see one
    deterministic successor function.
    """

    def __init__(self, expand: Expansion, action_labels: Sequence[Action]) -> None:
        self._expand = expand
        self._actions: Tuple[Action, ...] = tuple(action_labels)
        self._memo: Dict[State, Dict[Action, Distribution]] = {}
        self._lock = threading.Lock()

    @property
    def action_labels(self) -> Sequence[Action]:
        return self._actions

    def _expansion(self, state: State) -> Dict[Action, Distribution]:
        cached = self._memo.get(state)
        if cached is not None:
            return cached

        raw = self._expand(state)
        if not raw:
            raise MdpError(f"State {state!r} has no enabled action")

        order = {label: index for index, label in enumerate(self._actions)}
        for action in raw:
            if action not in order:
                raise MdpError(f"Expansion of {state!r} uses undeclared action {action!r}")
        expansion = {a: raw[a] for a in sorted(raw, key=order.__getitem__)}

        with self._lock:
            return self._memo.setdefault(state, expansion)

    def enabled_actions(self, state: State) -> Sequence[Action]:
        return tuple(self._expansion(state))

    def successors(self, state: State, action: Action) -> Distribution:
        expansion = self._expansion(state)
        try:
            return expansion[action]
        except KeyError as e:
            raise MdpError(f"Action {action!r} is not enabled at {state!r}") from e

    @property
    def materialized_states(self) -> int:
        return len(self._memo)


@dataclass(frozen=True)
class Path:
    """Nonempty finite sequence of states."""

    states: Tuple[State, ...]

    def __post_init__(self) -> None:
        if not self.states:
            raise MdpError("Paths are nonempty")

    @property
    def last(self) -> State:
        return self.states[-1]

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    def extend(self, state: State) -> "Path":
        return Path(self.states + (state,))

    def prefixes(self) -> Iterator["Path"]:
        """Proper prefixes, shortest first."""
        for length in range(1, len(self.states)):
            yield Path(self.states[:length])

    def __len__(self) -> int:
        return len(self.states)

    def __str__(self) -> str:
        return " ".join(str(s) for s in self.states)


def validate_path(mdp: Mdp, path: Path) -> None:
    """Raise MdpError unless consecutive states are connected by some enabled action."""
    for source, target in zip(path.states, path.states[1:]):
        if not any(
            mdp.successors(source, a).probability(target) > 0 for a in mdp.enabled_actions(source)
        ):
            raise MdpError(f"No enabled action moves {source!r} to {target!r}")


class MemorylessScheduler:
    """Total state-to-action map, given as a mapping or as a rule for lazy state spaces."""

    def __init__(
        self,
        choices: Union[Mapping[State, Action], Callable[[State], Action]],
        fallback: Optional[Callable[[State], Action]] = None,
    ) -> None:
        if callable(choices) and not isinstance(choices, Mapping):
            self._mapping: Dict[State, Action] = {}
            self._rule: Optional[Callable[[State], Action]] = choices
        else:
            self._mapping = dict(choices)
            self._rule = fallback

    @classmethod
    def constant(cls, mdp: Mdp, action: Action) -> "MemorylessScheduler":
        """Choose ``action`` wherever enabled, otherwise the first enabled action."""

        def rule(state: State) -> Action:
            enabled = mdp.enabled_actions(state)
            return action if action in enabled else enabled[0]

        return cls(rule)

    def choose(self, state: State) -> Action:
        if state in self._mapping:
            return self._mapping[state]
        if self._rule is not None:
            return self._rule(state)
        raise MdpError(f"Scheduler undefined at {state!r}")

    def choose_for(self, path: Path) -> Action:
        return self.choose(path.last)

    @property
    def mapping(self) -> Dict[State, Action]:
        return dict(self._mapping)


class HorizonScheduler:
    """History-dependent deterministic scheduler defined on paths shorter than a horizon."""

    def __init__(self, decisions: Mapping[Tuple[State, ...], Action], horizon: int) -> None:
        self._decisions = dict(decisions)
        self.horizon = horizon

    def choose_for(self, path: Path) -> Action:
        try:
            return self._decisions[path.states]
        except KeyError as e:
            raise MdpError(f"Horizon scheduler undefined on path {path}") from e

    @property
    def decisions(self) -> Dict[Tuple[State, ...], Action]:
        return dict(self._decisions)


Scheduler = Union[MemorylessScheduler, HorizonScheduler]


class RewardFn:
    """Total reward function; states absent from the table collect 0."""

    def __init__(
        self,
        table: Optional[Mapping[State, ExtValue]] = None,
        rule: Optional[Callable[[State], ExtValue]] = None,
    ) -> None:
        self._table: Dict[State, ExtValue] = dict(table or {})
        self._rule = rule

    @classmethod
    def zero(cls) -> "RewardFn":
        return cls()

    def __call__(self, state: State) -> ExtValue:
        value = self._table.get(state)
        if value is not None:
            return value
        if self._rule is not None:
            return self._rule(state)
        return ZERO

    @property
    def table(self) -> Dict[State, ExtValue]:
        return dict(self._table)


class PathMode(str, Enum):
    EXACT = "exact-length"
    UP_TO = "up-to-length"


def enumerate_paths(mdp: Mdp, start: State, n: int, mode: PathMode = PathMode.EXACT) -> List[Path]:
    """All paths of exactly ``n`` steps (or at most ``n``) from ``start``, in discovery order."""
    if n < 0:
        raise MdpError(f"Path length must be non-negative, got {n}")

    layer: Dict[Tuple[State, ...], None] = {(start,): None}
    collected: List[Path] = [Path((start,))] if mode is PathMode.UP_TO or n == 0 else []

    for depth in range(1, n + 1):
        next_layer: Dict[Tuple[State, ...], None] = {}
        for states in layer:
            source = states[-1]
            for action in mdp.enabled_actions(source):
                for target, _ in mdp.successors(source, action):
                    next_layer.setdefault(states + (target,), None)
        layer = next_layer
        if mode is PathMode.UP_TO or depth == n:
            collected.extend(Path(states) for states in layer)

    return collected


def path_probability(mdp: Mdp, scheduler: Scheduler, path: Path) -> ExtValue:
    probability = Fraction(1)
    for prefix in path.prefixes():
        target = path.states[len(prefix)]
        action = scheduler.choose_for(prefix)
        if action not in mdp.enabled_actions(prefix.last):
            raise MdpError(f"Scheduler chose disabled action {action!r} at {prefix.last!r}")
        probability *= mdp.successors(prefix.last, action).probability(target)
        if probability == 0:
            return ZERO
    return ExtValue(probability)


def path_reward(rew: RewardFn, path: Path) -> ExtValue:
    return ext_sum(rew(s) for s in path.states)


def _scheduled_paths(
    mdp: Mdp, scheduler: Scheduler, start: State, n: int
) -> Iterator[Tuple[Path, Fraction]]:
    """Paths with positive probability under ``scheduler``, by length, with their probabilities."""
    layer: List[Tuple[Path, Fraction]] = [(Path((start,)), Fraction(1))]
    yield layer[0]
    for _ in range(n):
        next_layer: List[Tuple[Path, Fraction]] = []
        for path, probability in layer:
            action = scheduler.choose_for(path)
            if action not in mdp.enabled_actions(path.last):
                raise MdpError(f"Scheduler chose disabled action {action!r} at {path.last!r}")
            for target, step in mdp.successors(path.last, action):
                next_layer.append((path.extend(target), probability * step))
        layer = next_layer
        yield from layer


def expected_reward_step(
    mdp: Mdp, rew: RewardFn, scheduler: Scheduler, start: State, n: int
) -> ExtValue:
    """Sum over paths of exactly ``n`` steps of probability times path reward.

    Paths of probability 0 under the scheduler contribute 0 even when their
    reward is infinite, so only scheduled paths are visited.
    """
    if n < 0:
        raise MdpError(f"Step count must be non-negative, got {n}")
    return ext_sum(
        ext_mul(ExtValue(probability), path_reward(rew, path))
        for path, probability in _scheduled_paths(mdp, scheduler, start, n)
        if path.steps == n
    )


def expected_reward_last_state(
    mdp: Mdp, rew: RewardFn, scheduler: Scheduler, start: State, n: int
) -> ExtValue:
    """Sum over paths of at most ``n`` steps of probability times the reward of the last state."""
    if n < 0:
        raise MdpError(f"Step count must be non-negative, got {n}")
    return ext_sum(
        ext_mul(ExtValue(probability), rew(path.last))
        for path, probability in _scheduled_paths(mdp, scheduler, start, n)
    )


def expected_reward_memoryless(
    mdp: Mdp, rew: RewardFn, scheduler: MemorylessScheduler, start: State, n: int
) -> ExtValue:
    """Step-bounded expected reward under a memoryless scheduler, by forward state distributions.

    Agrees with expected_reward_step but aggregates paths ending in the same state.
    """
    if n < 0:
        raise MdpError(f"Step count must be non-negative, got {n}")

    distribution: Dict[State, Fraction] = {start: Fraction(1)}
    total = rew(start)
    for _ in range(n):
        following: Dict[State, Fraction] = {}
        for state, mass in distribution.items():
            for target, probability in mdp.successors(state, scheduler.choose(state)):
                following[target] = following.get(target, Fraction(0)) + mass * probability
        distribution = following
        total = ext_add(
            total, ext_sum(ext_mul(ExtValue(m), rew(s)) for s, m in distribution.items())
        )
    return total


def count_horizon_schedulers(mdp: Mdp, start: State, n: int) -> int:
    """Number of deterministic horizon-``n`` schedulers distinguishable on their reachable paths."""

    def count(state: State, remaining: int) -> int:
        if remaining == 0:
            return 1
        return sum(
            math.prod(count(t, remaining - 1) for t, _ in mdp.successors(state, a))
            for a in mdp.enabled_actions(state)
        )

    return count(start, n)


def enumerate_horizon_schedulers(
    mdp: Mdp, start: State, n: int, max_schedulers: int = DEFAULT_MAX_SCHEDULERS
) -> Iterator[HorizonScheduler]:
    """Every deterministic horizon-``n`` scheduler, each restricted to the paths it can reach.

    Two schedulers agreeing on their reachable paths induce identical path
    probabilities, so the optimum over this family is the optimum over all.
    """
    required = count_horizon_schedulers(mdp, start, n)
    if required > max_schedulers:
        raise EnumerationBoundExceeded(required, max_schedulers)

    def strategies(prefix: Tuple[State, ...], remaining: int) -> List[Dict[Tuple[State, ...], Action]]:
        if remaining == 0:
            return [{}]
        result: List[Dict[Tuple[State, ...], Action]] = []
        for action in mdp.enabled_actions(prefix[-1]):
            subtrees = [
                strategies(prefix + (target,), remaining - 1)
                for target, _ in mdp.successors(prefix[-1], action)
            ]
            for combination in itertools.product(*subtrees):
                decisions = {prefix: action}
                for subtree in combination:
                    decisions.update(subtree)
                result.append(decisions)
        return result

    for decisions in strategies((start,), n):
        yield HorizonScheduler(decisions, n)


def opt_expected_reward_step_bruteforce(
    mdp: Mdp,
    rew: RewardFn,
    start: State,
    n: int,
    mode: str,
    max_schedulers: int = DEFAULT_MAX_SCHEDULERS,
) -> ExtValue:
    """Exact min or max of the ``n``-step expected reward over all deterministic schedulers."""
    mode = str(getattr(mode, "value", mode))
    if mode not in ("min", "max"):
        raise MdpError(f"Unknown optimization mode {mode!r}")

    values = [
        expected_reward_step(mdp, rew, scheduler, start, n)
        for scheduler in enumerate_horizon_schedulers(mdp, start, n, max_schedulers)
    ]
    logger.debug(f"Brute force over {len(values)} schedulers at {start!r}, n={n}")
    return min(values) if mode == "min" else max(values)


class InducedChain:
    """The Markov chain an MDP induces under a memoryless scheduler."""

    def __init__(self, mdp: Mdp, scheduler: MemorylessScheduler) -> None:
        self._mdp = mdp
        self._scheduler = scheduler

    @property
    def action_labels(self) -> Sequence[Action]:
        return self._mdp.action_labels

    def enabled_actions(self, state: State) -> Sequence[Action]:
        action = self._scheduler.choose(state)
        if action not in self._mdp.enabled_actions(state):
            raise MdpError(f"Scheduler selects disabled action {action!r} at {state!r}")
        return (action,)

    def successors(self, state: State, action: Action) -> Distribution:
        if action != self._scheduler.choose(state):
            raise MdpError(f"Action {action!r} is not the scheduled action at {state!r}")
        return self._mdp.successors(state, action)


def induced_mc(mdp: Mdp, scheduler: MemorylessScheduler) -> InducedChain:
    return InducedChain(mdp, scheduler)


def reachable_states(mdp: Mdp, start: Iterable[State], max_states: Optional[int] = None) -> List[State]:
    """States reachable from ``start`` under any actions, breadth-first."""
    order: Dict[State, None] = {s: None for s in start}
    frontier = list(order)
    while frontier:
        next_frontier = []
        for state in frontier:
            for action in mdp.enabled_actions(state):
                for target, _ in mdp.successors(state, action):
                    if target not in order:
                        order[target] = None
                        next_frontier.append(target)
                        if max_states is not None and len(order) > max_states:
                            raise MdpError(f"More than {max_states} reachable states")
        frontier = next_frontier
    return list(order)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean and standard error of truncated path rewards."""

    mean: float
    standard_error: float
    trials: int
    horizon: int
    divergent_trials: int = 0

    @property
    def divergent(self) -> bool:
        return self.divergent_trials > 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "standard_error": self.standard_error,
            "trials": self.trials,
            "horizon": self.horizon,
            "divergent": self.divergent,
        }


def monte_carlo_estimate(
    mdp: Mdp,
    rew: RewardFn,
    scheduler: MemorylessScheduler,
    start: State,
    horizon: int,
    trials: int,
    seed: int,
) -> MonteCarloEstimate:
    """Simulate ``trials`` paths of ``horizon`` steps and average their rewards."""
    if horizon < 1 or trials < 1:
        raise MdpError("Horizon and trials must be positive")

    rng = np.random.default_rng(seed)
    samples = np.zeros(trials, dtype=float)
    divergent = 0
    # Per-state cumulative distributions keep repeated sampling cheap.
    tables: Dict[State, Tuple[List[State], np.ndarray]] = {}

    for trial in range(trials):
        state = start
        reward = float(rew(state))
        uniforms = rng.random(horizon)
        for step in range(horizon):
            table = tables.get(state)
            if table is None:
                distribution = mdp.successors(state, scheduler.choose(state))
                targets = distribution.states()
                cumulative = np.cumsum([float(p) for _, p in distribution])
                table = (targets, cumulative)
                tables[state] = table
            targets, cumulative = table
            index = int(np.searchsorted(cumulative, uniforms[step], side="right"))
            state = targets[min(index, len(targets) - 1)]
            reward += float(rew(state))
        if math.isinf(reward):
            divergent += 1
        samples[trial] = reward

    if divergent:
        logger.warning(f"{divergent} of {trials} simulated paths collected infinite reward")
        return MonteCarloEstimate(float("inf"), float("inf"), trials, horizon, divergent)

    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloEstimate(mean, stderr, trials, horizon)


__all__ = [
    "Action",
    "DEFAULT_MAX_SCHEDULERS",
    "Distribution",
    "EnumerationBoundExceeded",
    "ExplicitMdp",
    "HorizonScheduler",
    "InducedChain",
    "LazyMdp",
    "Mdp",
    "MdpError",
    "MemorylessScheduler",
    "MonteCarloEstimate",
    "Path",
    "PathMode",
    "RewardFn",
    "Scheduler",
    "State",
    "count_horizon_schedulers",
    "enumerate_horizon_schedulers",
    "enumerate_paths",
    "expected_reward_last_state",
    "expected_reward_memoryless",
    "expected_reward_step",
    "induced_mc",
    "monte_carlo_estimate",
    "opt_expected_reward_step_bruteforce",
    "path_probability",
    "path_reward",
    "reachable_states",
    "validate_path",
]
