"""Text formats for explicit MDPs and value functions.

Model files are line oriented. ``#`` starts a comment. Four section headers
appear alone on a line (a trailing ``:`` is allowed)::

    states
      s0 s1 goal
    actions
      a b
    transitions
      s0 a 1/2 s1
      s0 a 1/2 goal
      s1 b 1 goal
      goal a 1 goal
    rewards
      s1 3
      goal 0

Names in ``states`` and ``actions`` may be spread over several lines.
Transition records are ``state action probability target``; records sharing
``state action`` form one distribution, which must sum to exactly 1. Reward
records are ``state value`` with value ``p/q`` or ``inf``; unlisted states
collect 0.

Value-function files hold one ``state value`` record per line.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from expected_rewards.core.extreal import ExtRealError, ExtValue, parse_ext, render_ext
from expected_rewards.core.fixpoint import ValueFunction
from expected_rewards.core.mdp import (
    Action,
    Distribution,
    ExplicitMdp,
    MdpError,
    RewardFn,
    State,
)
from expected_rewards.security.validation import (
    ValidationError,
    validate_state_name,
)

logger = logging.getLogger(__name__)

SECTIONS = ("states", "actions", "transitions", "rewards")


class ModelFormatError(Exception):
    """Malformed model or value-function text."""

    def __init__(self, reason: str, line: int = 0) -> None:
        super().__init__(f"line {line}: {reason}" if line > 0 else reason)
        self.reason = reason
        self.line = line


@dataclass
class ModelFile:
    """A parsed model: the MDP, its rewards and the declared state order."""

    mdp: ExplicitMdp
    reward: RewardFn
    states: Tuple[str, ...]
    actions: Tuple[str, ...]

    @property
    def initial(self) -> str:
        return self.states[0]


@dataclass
class _Draft:
    states: List[str] = field(default_factory=list)
    actions: List[str] = field(default_factory=list)
    transitions: Dict[Tuple[str, str], List[Tuple[str, Fraction]]] = field(default_factory=dict)
    first_line: Dict[Tuple[str, str], int] = field(default_factory=dict)
    rewards: Dict[str, ExtValue] = field(default_factory=dict)


def _records(text: str) -> Iterator[Tuple[int, List[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if content:
            yield number, content.split()


def _probability(token: str, line: int) -> Fraction:
    try:
        value = parse_ext(token)
    except ExtRealError as e:
        raise ModelFormatError(f"invalid probability {token!r}", line) from e
    if value.is_infinite or value.as_fraction() > 1:
        raise ModelFormatError(f"probability {token} outside [0, 1]", line)
    return value.as_fraction()


def _name(token: str, line: int) -> str:
    try:
        return validate_state_name(token)
    except ValidationError as e:
        raise ModelFormatError(str(e), line) from e


def parse_model(text: str) -> ModelFile:
    """Parse model text into an ExplicitMdp with its reward function."""
    draft = _Draft()
    section: Optional[str] = None

    for line, tokens in _records(text):
        header = tokens[0].rstrip(":")
        if len(tokens) == 1 and header in SECTIONS:
            section = header
            continue

        if section is None:
            raise ModelFormatError(f"record before any section header: {' '.join(tokens)}", line)

        if section in ("states", "actions"):
            target = draft.states if section == "states" else draft.actions
            for token in tokens:
                name = _name(token, line)
                if name in SECTIONS:
                    raise ModelFormatError(f"section keyword used as a name: {name}", line)
                if name in target:
                    raise ModelFormatError(f"duplicate {section[:-1]} {name}", line)
                target.append(name)

        elif section == "transitions":
            if len(tokens) != 4:
                raise ModelFormatError("transition needs 'state action probability target'", line)
            source, action, probability, target = tokens
            if source not in draft.states:
                raise ModelFormatError(f"undeclared state {source}", line)
            if action not in draft.actions:
                raise ModelFormatError(f"undeclared action {action}", line)
            if target not in draft.states:
                raise ModelFormatError(f"undeclared state {target}", line)
            key = (source, action)
            draft.first_line.setdefault(key, line)
            draft.transitions.setdefault(key, []).append((target, _probability(probability, line)))

        else:
            if len(tokens) != 2:
                raise ModelFormatError("reward needs 'state value'", line)
            state, value = tokens
            if state not in draft.states:
                raise ModelFormatError(f"undeclared state {state}", line)
            if state in draft.rewards:
                raise ModelFormatError(f"duplicate reward for {state}", line)
            try:
                draft.rewards[state] = parse_ext(value)
            except ExtRealError as e:
                raise ModelFormatError(f"invalid reward {value!r}", line) from e

    return _build(draft)


def _build(draft: _Draft) -> ModelFile:
    if not draft.states:
        raise ModelFormatError("model declares no states")
    if not draft.actions:
        raise ModelFormatError("model declares no actions")

    transitions: Dict[Tuple[State, Action], Distribution] = {}
    for key, pairs in draft.transitions.items():
        try:
            transitions[key] = Distribution.from_pairs(pairs)
        except MdpError as e:
            raise ModelFormatError(f"{key[0]} {key[1]}: {e}", draft.first_line[key]) from e

    try:
        mdp = ExplicitMdp(draft.states, draft.actions, transitions)
    except MdpError as e:
        raise ModelFormatError(str(e)) from e

    logger.debug(
        f"Parsed model with {len(draft.states)} states and {mdp.transition_count()} transitions"
    )
    return ModelFile(mdp, RewardFn(draft.rewards), tuple(draft.states), tuple(draft.actions))


def render_model(
    states: Sequence[str],
    actions: Sequence[str],
    mdp: ExplicitMdp,
    reward: RewardFn,
) -> str:
    """Inverse of parse_model for models whose state names are plain strings."""
    lines = ["states", *(f"  {s}" for s in states), "actions", f"  {' '.join(actions)}"]
    lines.append("transitions")
    for state in states:
        for action in mdp.enabled_actions(state):
            for target, probability in mdp.successors(state, action):
                lines.append(f"  {state} {action} {probability} {target}")
    lines.append("rewards")
    for state in states:
        value = reward(state)
        if value != 0:
            lines.append(f"  {state} {render_ext(value)}")
    return "\n".join(lines) + "\n"


def parse_value_function(text: str) -> ValueFunction:
    """Parse ``state value`` records; states may appear once."""
    values: Dict[State, ExtValue] = {}
    for line, tokens in _records(text):
        if len(tokens) != 2:
            raise ModelFormatError("value record needs 'state value'", line)
        state, value = tokens
        if state in values:
            raise ModelFormatError(f"duplicate value for {state}", line)
        try:
            values[_name(state, line)] = parse_ext(value)
        except ExtRealError as e:
            raise ModelFormatError(f"invalid value {value!r}", line) from e
    return ValueFunction(values)


def render_value_function(v: ValueFunction, order: Optional[Iterable[State]] = None) -> str:
    """One ``state value`` line per state, in ``order`` or the function's own order."""
    states = list(order) if order is not None else list(v)
    return "".join(f"{state} {render_ext(v[state])}\n" for state in states)


__all__ = [
    "ModelFile",
    "ModelFormatError",
    "parse_model",
    "parse_value_function",
    "render_model",
    "render_value_function",
]
