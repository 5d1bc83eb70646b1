"""Small-step semantics of pGCL and its lazily explored operational MDP."""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Deque, Dict, List, Optional, Sequence, Tuple, Union

from expected_rewards.core.extreal import ZERO, ExtValue
from expected_rewards.core.mdp import Distribution, LazyMdp, RewardFn
from expected_rewards.lang.expectations import Expectation
from expected_rewards.lang.syntax import (
    Assign,
    Ite,
    NondetChoice,
    PgclStmt,
    ProbChoice,
    ProgramState,
    Seq,
    Skip,
    SyntaxTreeError,
    Tick,
    While,
    eval_aexpr,
    eval_bexpr,
    head_label,
    program_variables,
)

logger = logging.getLogger(__name__)


class OpAction(str, Enum):
    N = "N"
    L = "L"
    R = "R"

    def __str__(self) -> str:
        return self.value


OP_ACTIONS: Tuple[OpAction, ...] = (OpAction.N, OpAction.L, OpAction.R)


@dataclass(frozen=True)
class Running:
    stmt: PgclStmt
    state: ProgramState


@dataclass(frozen=True)
class Terminated:
    state: ProgramState


class SinkConfig(Enum):
    SINK = "bot"

    def __str__(self) -> str:
        return self.value


SINK = SinkConfig.SINK

Configuration = Union[Running, Terminated, SinkConfig]


def _lift(successor: Configuration, continuation: PgclStmt) -> Configuration:
    if isinstance(successor, Terminated):
        return Running(continuation, successor.state)
    if isinstance(successor, Running):
        return Running(Seq(successor.stmt, continuation), successor.state)
    raise SyntaxTreeError("A running statement never steps to the sink")


def step(config: Configuration) -> Dict[OpAction, Distribution]:
    """Enabled actions of ``config`` with their successor distributions, in N, L, R order."""
    if config is SINK or isinstance(config, Terminated):
        return {OpAction.N: Distribution.dirac(SINK)}
    if not isinstance(config, Running):
        raise SyntaxTreeError(f"Not a configuration: {config!r}")

    stmt, state = config.stmt, config.state

    if isinstance(stmt, (Skip, Tick)):
        return {OpAction.N: Distribution.dirac(Terminated(state))}

    if isinstance(stmt, Assign):
        updated = state.update(stmt.var, eval_aexpr(stmt.expr, state))
        return {OpAction.N: Distribution.dirac(Terminated(updated))}

    if isinstance(stmt, Seq):
        return {
            action: Distribution.from_pairs((_lift(c, stmt.second), p) for c, p in distribution)
            for action, distribution in step(Running(stmt.first, state)).items()
        }

    if isinstance(stmt, ProbChoice):
        if stmt.left == stmt.right:
            return {OpAction.N: Distribution.dirac(Running(stmt.left, state))}
        return {
            OpAction.N: Distribution.from_pairs(
                [
                    (Running(stmt.left, state), stmt.prob),
                    (Running(stmt.right, state), Fraction(1) - stmt.prob),
                ]
            )
        }

    if isinstance(stmt, NondetChoice):
        return {
            OpAction.L: Distribution.dirac(Running(stmt.left, state)),
            OpAction.R: Distribution.dirac(Running(stmt.right, state)),
        }

    if isinstance(stmt, Ite):
        branch = stmt.then if eval_bexpr(stmt.guard, state) else stmt.orelse
        return {OpAction.N: Distribution.dirac(Running(branch, state))}

    if isinstance(stmt, While):
        if eval_bexpr(stmt.guard, state):
            return {OpAction.N: Distribution.dirac(Running(Seq(stmt.body, stmt), state))}
        return {OpAction.N: Distribution.dirac(Terminated(state))}

    raise SyntaxTreeError(f"Not a statement: {stmt!r}")


def operational_mdp() -> LazyMdp:
    """The operational MDP over configurations; equal configurations are one state."""
    return LazyMdp(step, OP_ACTIONS)


def head_statement(stmt: PgclStmt) -> PgclStmt:
    while isinstance(stmt, Seq):
        stmt = stmt.first
    return stmt


def rew_pgcl(config: Configuration) -> ExtValue:
    """Reward r for a configuration whose next statement is tick(r); 0 otherwise."""
    if isinstance(config, Running):
        head = head_statement(config.stmt)
        if isinstance(head, Tick):
            return head.reward
    return ZERO


def torew(post: Expectation) -> RewardFn:
    """Tick rewards while running, ``post`` on termination."""

    def reward(config: Configuration) -> ExtValue:
        if isinstance(config, Terminated):
            return post(config.state)
        return rew_pgcl(config)

    return RewardFn(rule=reward)


def config_label(config: Configuration, variables: Sequence[str] = ()) -> str:
    if isinstance(config, Running):
        return f"{head_label(config.stmt)} | {config.state.render(tuple(variables))}"
    if isinstance(config, Terminated):
        return f"term | {config.state.render(tuple(variables))}"
    return str(config)


@dataclass
class Fragment:
    """Breadth-first reachable configurations up to a depth, with the edges of expanded nodes."""

    depth: int
    variables: Tuple[str, ...]
    nodes: List[Tuple[Configuration, int]] = field(default_factory=list)
    edges: List[Tuple[int, OpAction, Fraction, int]] = field(default_factory=list)

    def index_of(self, config: Configuration) -> Optional[int]:
        for index, (candidate, _) in enumerate(self.nodes):
            if candidate == config:
                return index
        return None

    def labels(self) -> List[str]:
        return [config_label(c, self.variables) for c, _ in self.nodes]

    def render(self) -> str:
        lines = [f"# fragment depth={self.depth} nodes={len(self.nodes)} edges={len(self.edges)}"]
        for index, (config, depth) in enumerate(self.nodes):
            lines.append(f"n{index} d{depth} {config_label(config, self.variables)}")
        for source, action, probability, target in self.edges:
            lines.append(f"n{source} {action.value} {probability} n{target}")
        return "\n".join(lines) + "\n"


def dump_fragment(
    stmt: PgclStmt,
    state: ProgramState,
    depth: int,
    variables: Optional[Sequence[str]] = None,
) -> Fragment:
    """Explore from Running(stmt, state); nodes at ``depth`` are listed but not expanded."""
    if depth < 0:
        raise SyntaxTreeError(f"Depth must be non-negative, got {depth}")

    shown = tuple(sorted(variables if variables is not None else program_variables(stmt)))
    fragment = Fragment(depth, shown)
    mdp = operational_mdp()
    start: Configuration = Running(stmt, state)

    ids: Dict[Configuration, int] = {start: 0}
    fragment.nodes.append((start, 0))
    queue: Deque[Configuration] = deque([start])

    while queue:
        config = queue.popleft()
        source = ids[config]
        level = fragment.nodes[source][1]
        if level >= depth:
            continue
        for action in mdp.enabled_actions(config):
            for target, probability in mdp.successors(config, action):
                if target not in ids:
                    ids[target] = len(fragment.nodes)
                    fragment.nodes.append((target, level + 1))
                    queue.append(target)
                fragment.edges.append((source, OpAction(action), probability, ids[target]))

    logger.debug(f"Fragment to depth {depth}: {len(fragment.nodes)} nodes")
    return fragment


__all__ = [
    "Configuration",
    "Fragment",
    "OP_ACTIONS",
    "OpAction",
    "Running",
    "SINK",
    "SinkConfig",
    "Terminated",
    "config_label",
    "dump_fragment",
    "head_statement",
    "operational_mdp",
    "rew_pgcl",
    "step",
    "torew",
]
