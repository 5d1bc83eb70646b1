"""Built-in benchmark MDPs: the column-shaped running example and the no-optimal-scheduler chain.

Both exist lazily (countably infinite) and truncated to a finite number of
columns. Truncations make the boundary state absorbing with zero reward.
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Tuple, Union

from expected_rewards.core.extreal import ZERO, ExtValue
from expected_rewards.core.mdp import (
    Action,
    Distribution,
    ExplicitMdp,
    LazyMdp,
    Mdp,
    MdpError,
    MemorylessScheduler,
    RewardFn,
    State,
)

logger = logging.getLogger(__name__)

ACTIONS: Tuple[Action, ...] = ("N", "L", "R")
BOTTOM = "bot"

_RUNNING_STATE = re.compile(r"^s(\d+)(\^L|\^R)?$")
_CHAIN_STATE = re.compile(r"^s(\d+)(')?$")


@dataclass(frozen=True)
class BuiltinModel:
    """An MDP bundled with its reward function and initial state."""

    name: str
    mdp: Mdp
    reward: RewardFn
    initial: State


def column(i: int) -> str:
    return f"s{i}"


def left(i: int) -> str:
    return f"s{i}^L"


def right(i: int) -> str:
    return f"s{i}^R"


def primed(i: int) -> str:
    return f"s{i}'"


def _parse_running(state: State) -> Tuple[str, int]:
    if state == BOTTOM:
        return "bot", -1
    match = _RUNNING_STATE.match(str(state))
    if not match:
        raise MdpError(f"Not a running-example state: {state!r}")
    index, suffix = match.groups()
    return {None: "column", "^L": "left", "^R": "right"}[suffix], int(index)


def _running_expansion(state: State) -> Dict[Action, Distribution]:
    kind, i = _parse_running(state)
    if kind == "column":
        return {
            "L": Distribution.dirac(left(i)),
            "R": Distribution(((right(i), Fraction(1, 2)), (column(i + 1), Fraction(1, 2)))),
        }
    if kind == "left":
        return {"N": Distribution.dirac(column(i + 1))}
    return {"N": Distribution.dirac(BOTTOM)}


def _running_reward(r: ExtValue) -> RewardFn:
    def reward(state: State) -> ExtValue:
        kind, i = _parse_running(state)
        if kind == "left":
            return r
        if kind == "right":
            return ExtValue(Fraction(i + 1))
        return ZERO

    return RewardFn(rule=reward)


def running_example(r: Union[int, Fraction, ExtValue] = 1) -> BuiltinModel:
    """Infinite column MDP: at s_i, L collects ``r`` on the way to s_{i+1}; R stops with reward i+1 at rate 1/2."""
    reward = ExtValue.of(r)
    mdp = LazyMdp(_running_expansion, ACTIONS)
    return BuiltinModel("running-example", mdp, _running_reward(reward), column(0))


def running_example_truncated(columns: int, r: Union[int, Fraction, ExtValue] = 1) -> BuiltinModel:
    """The running example on columns 0..columns-1 with s_columns absorbing."""
    if columns < 1:
        raise MdpError(f"Truncation needs at least one column, got {columns}")

    states: List[State] = []
    transitions: Dict[Tuple[State, Action], Distribution] = {}
    for i in range(columns):
        states.extend([column(i), left(i), right(i)])
        for state in (column(i), left(i), right(i)):
            for action, distribution in _running_expansion(state).items():
                transitions[(state, action)] = distribution
    states.extend([column(columns), BOTTOM])
    transitions[(column(columns), "N")] = Distribution.dirac(column(columns))
    transitions[(BOTTOM, "N")] = Distribution.dirac(BOTTOM)

    reward = ExtValue.of(r)
    table = {left(i): reward for i in range(columns)}
    table.update({right(i): ExtValue(Fraction(i + 1)) for i in range(columns)})
    mdp = ExplicitMdp(states, ACTIONS, transitions)
    logger.debug(f"Truncated running example: {len(states)} states, {columns} columns")
    return BuiltinModel("running-example", mdp, RewardFn(table), column(0))


def _parse_chain(state: State) -> Tuple[str, int]:
    if state == BOTTOM:
        return "bot", -1
    match = _CHAIN_STATE.match(str(state))
    if not match:
        raise MdpError(f"Not a no-opt-sched state: {state!r}")
    index, prime = match.groups()
    return ("exit" if prime else "column"), int(index)


def _chain_expansion(state: State) -> Dict[Action, Distribution]:
    kind, i = _parse_chain(state)
    if kind == "column":
        return {"L": Distribution.dirac(column(i + 1)), "R": Distribution.dirac(primed(i))}
    return {"N": Distribution.dirac(BOTTOM)}


def no_opt_sched() -> BuiltinModel:
    """Infinite chain where exiting at s_i collects i; MaxER is infinite but never attained."""

    def reward(state: State) -> ExtValue:
        kind, i = _parse_chain(state)
        return ExtValue(Fraction(i)) if kind == "exit" else ZERO

    mdp = LazyMdp(_chain_expansion, ACTIONS)
    return BuiltinModel("no-opt-sched", mdp, RewardFn(rule=reward), column(0))


def no_opt_sched_truncated(columns: int) -> BuiltinModel:
    if columns < 1:
        raise MdpError(f"Truncation needs at least one column, got {columns}")

    states: List[State] = []
    transitions: Dict[Tuple[State, Action], Distribution] = {}
    for i in range(columns):
        states.extend([column(i), primed(i)])
        for state in (column(i), primed(i)):
            for action, distribution in _chain_expansion(state).items():
                transitions[(state, action)] = distribution
    states.extend([column(columns), BOTTOM])
    transitions[(column(columns), "N")] = Distribution.dirac(column(columns))
    transitions[(BOTTOM, "N")] = Distribution.dirac(BOTTOM)

    table = {primed(i): ExtValue(Fraction(i)) for i in range(columns)}
    mdp = ExplicitMdp(states, ACTIONS, transitions)
    return BuiltinModel("no-opt-sched", mdp, RewardFn(table), column(0))


def threshold_scheduler(mdp: Mdp, k: int) -> MemorylessScheduler:
    """Choose L at columns s_i with i < k and R at s_j with j ≥ k; N elsewhere."""

    def rule(state: State) -> Action:
        match = re.match(r"^s(\d+)$", str(state))
        enabled = mdp.enabled_actions(state)
        if match and "L" in enabled and "R" in enabled:
            return "L" if int(match.group(1)) < k else "R"
        return enabled[0]

    return MemorylessScheduler(rule)


_BUILTINS: Mapping[str, str] = {
    "running-example": "column MDP with parameter r",
    "no-opt-sched": "chain without a max-optimal scheduler",
}


def builtin_names() -> List[str]:
    return list(_BUILTINS)


def load_builtin(name: str, columns: int = 0, r: Union[int, Fraction, ExtValue] = 1) -> BuiltinModel:
    """Resolve a built-in model by name; ``columns`` > 0 selects the truncation."""
    if name == "running-example":
        return running_example_truncated(columns, r) if columns > 0 else running_example(r)
    if name == "no-opt-sched":
        return no_opt_sched_truncated(columns) if columns > 0 else no_opt_sched()
    raise MdpError(f"Unknown built-in model {name!r}; choose from {', '.join(_BUILTINS)}")


__all__ = [
    "ACTIONS",
    "BOTTOM",
    "BuiltinModel",
    "builtin_names",
    "column",
    "left",
    "load_builtin",
    "no_opt_sched",
    "no_opt_sched_truncated",
    "primed",
    "right",
    "running_example",
    "running_example_truncated",
    "threshold_scheduler",
]
