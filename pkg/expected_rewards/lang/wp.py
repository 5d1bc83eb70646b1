"""Demonic and angelic weakest preexpectations, and their cross-checks against the operational MDP."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from expected_rewards.core.extreal import ZERO, ExtValue, ext_add, ext_sum, ext_mul, render_ext
from expected_rewards.core.fixpoint import (
    DEFAULT_MAX_NODES,
    BellmanMode,
    KleeneResult,
    Verdict,
    kleene_iterate,
)
from expected_rewards.core.mdp import MemorylessScheduler
from expected_rewards.lang.expectations import (
    ZERO_EXPECTATION,
    Const,
    Expectation,
    Iverson,
    Maximum,
    Minimum,
    Probe,
    Product,
    Subst,
    Sum,
    Table,
)
from expected_rewards.lang.opsem import (
    Configuration,
    OpAction,
    Running,
    Terminated,
    operational_mdp,
    rew_pgcl,
    step,
    torew,
)
from expected_rewards.lang.syntax import (
    Assign,
    Ite,
    NondetChoice,
    Not,
    PgclStmt,
    ProbChoice,
    ProgramState,
    Seq,
    Skip,
    SyntaxTreeError,
    Tick,
    While,
    is_loop_free,
    pretty,
)

logger = logging.getLogger(__name__)


class WpMode(str, Enum):
    DEMONIC = "demonic"
    ANGELIC = "angelic"

    @property
    def bellman(self) -> BellmanMode:
        return BellmanMode.MIN if self is WpMode.DEMONIC else BellmanMode.MAX


def wp(stmt: PgclStmt, post: Expectation, mode: WpMode, loop_budget: int) -> Expectation:
    """Weakest preexpectation of ``post``; every loop is unrolled ``loop_budget`` times from 0."""
    mode = WpMode(mode)
    if loop_budget < 0:
        raise SyntaxTreeError(f"Loop budget must be non-negative, got {loop_budget}")

    if isinstance(stmt, Skip):
        return post
    if isinstance(stmt, Assign):
        return Subst(post, stmt.var, stmt.expr)
    if isinstance(stmt, Tick):
        return Sum(Const(stmt.reward), post)
    if isinstance(stmt, Seq):
        return wp(stmt.first, wp(stmt.second, post, mode, loop_budget), mode, loop_budget)
    if isinstance(stmt, NondetChoice):
        combine = Minimum if mode is WpMode.DEMONIC else Maximum
        return combine(
            wp(stmt.left, post, mode, loop_budget), wp(stmt.right, post, mode, loop_budget)
        )
    if isinstance(stmt, ProbChoice):
        return Sum(
            Product(Const(ExtValue(stmt.prob)), wp(stmt.left, post, mode, loop_budget)),
            Product(Const(ExtValue(1 - stmt.prob)), wp(stmt.right, post, mode, loop_budget)),
        )
    if isinstance(stmt, Ite):
        return Sum(
            Product(Iverson(stmt.guard), wp(stmt.then, post, mode, loop_budget)),
            Product(Iverson(Not(stmt.guard)), wp(stmt.orelse, post, mode, loop_budget)),
        )
    if isinstance(stmt, While):
        return LoopApprox(stmt, post, mode, loop_budget)
    raise SyntaxTreeError(f"Not a statement: {stmt!r}")


def char_fn_apply(
    loop: While, post: Expectation, mode: WpMode, current: Expectation, loop_budget: int
) -> Expectation:
    """One application of the loop's characteristic function: [B]·wp(body, Y) + [¬B]·X."""
    return Sum(
        Product(Iverson(loop.guard), wp(loop.body, current, mode, loop_budget)),
        Product(Iverson(Not(loop.guard)), post),
    )


class LoopApprox(Expectation):
    """The ``budget``-th Kleene approximant of a loop's characteristic function from 0.

    Levels are tabulated bottom-up: a probe pass collects the states each level
    is queried at, then the levels are evaluated from 1 upwards.
    """

    def __init__(self, loop: While, post: Expectation, mode: WpMode, budget: int) -> None:
        super().__init__()
        self.loop = loop
        self.post = post
        self.mode = mode
        self.budget = budget
        self._levels: List[Dict[ProgramState, ExtValue]] = [{} for _ in range(budget + 1)]

    def _evaluate(self, state: ProgramState) -> ExtValue:
        if self.budget == 0:
            return ZERO

        with self._lock:
            levels = self._levels
            needed: List[List[ProgramState]] = [[] for _ in range(self.budget + 1)]
            if state not in levels[self.budget]:
                needed[self.budget] = [state]

            for k in range(self.budget, 1, -1):
                if not needed[k]:
                    break
                probe = Probe()
                body = wp(self.loop.body, probe, self.mode, self.budget)
                for s in needed[k]:
                    body(s)
                needed[k - 1] = sorted(
                    (s for s in probe.requested if s not in levels[k - 1]), key=lambda s: s.entries
                )

            for k in range(1, self.budget + 1):
                if not needed[k]:
                    continue
                current = Table(levels[k - 1]) if k > 1 else ZERO_EXPECTATION
                psi = char_fn_apply(self.loop, self.post, self.mode, current, self.budget)
                for s in needed[k]:
                    levels[k][s] = psi(s)

            return levels[self.budget][state]

    def __str__(self) -> str:
        return f"loop^{self.budget}({pretty(self.loop)})"


def op_wp_iterates(
    stmt: PgclStmt,
    post: Expectation,
    state: ProgramState,
    mode: WpMode,
    steps: int,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> KleeneResult:
    """Kleene iterates 0..steps of the operational MDP with reward torew(post) at (stmt, state)."""
    mode = WpMode(mode)
    start = Running(stmt, state)
    return kleene_iterate(operational_mdp(), torew(post), mode.bellman, [start], steps, max_nodes)


def op_wp(
    stmt: PgclStmt,
    post: Expectation,
    state: ProgramState,
    mode: WpMode,
    steps: int,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> ExtValue:
    """Lower bound on the operational preexpectation after ``steps`` Bellman iterations."""
    return op_wp_iterates(stmt, post, state, mode, steps, max_nodes).last[Running(stmt, state)]


class OperationalExpectation(Expectation):
    """τ ↦ op_wp(stmt, post, τ, mode, steps), for nesting one program's result inside another."""

    def __init__(self, stmt: PgclStmt, post: Expectation, mode: WpMode, steps: int) -> None:
        super().__init__()
        self.stmt = stmt
        self.post = post
        self.mode = mode
        self.steps = steps

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return op_wp(self.stmt, self.post, state, self.mode, self.steps)


def _successor_value(
    config: Configuration, post: Expectation, mode: WpMode, loop_budget: int
) -> ExtValue:
    if isinstance(config, Terminated):
        return post(config.state)
    if isinstance(config, Running):
        return wp(config.stmt, post, mode, loop_budget)(config.state)
    return ZERO


def one_step_unfolding(
    stmt: PgclStmt, post: Expectation, state: ProgramState, mode: WpMode, loop_budget: int = 0
) -> ExtValue:
    """rew(C, σ) plus the optimal expected wp of the successors under one small step."""
    mode = WpMode(mode)
    config = Running(stmt, state)
    values = [
        ext_sum(
            ext_mul(ExtValue(p), _successor_value(target, post, mode, loop_budget))
            for target, p in distribution
        )
        for distribution in step(config).values()
    ]
    best = min(values) if mode is WpMode.DEMONIC else max(values)
    return ext_add(rew_pgcl(config), best)


def wp_guided_scheduler(post: Expectation, mode: WpMode, loop_budget: int) -> MemorylessScheduler:
    """Resolve each nondeterministic choice by the better branch under wp at ``loop_budget``."""
    mode = WpMode(mode)

    def rule(config: Configuration) -> OpAction:
        options = step(config)
        if len(options) == 1:
            return next(iter(options))
        best_action: Optional[OpAction] = None
        best_value: Optional[ExtValue] = None
        for action, distribution in options.items():
            value = ext_sum(
                ext_mul(ExtValue(p), _successor_value(t, post, mode, loop_budget))
                for t, p in distribution
            )
            better = best_value is None or (
                value < best_value if mode is WpMode.DEMONIC else value > best_value
            )
            if better:
                best_action, best_value = action, value
        assert best_action is not None
        return best_action

    return MemorylessScheduler(rule)


def _is_monotone(values: Sequence[ExtValue]) -> bool:
    return all(a <= b for a, b in zip(values, values[1:]))


def _stabilized(values: Sequence[ExtValue]) -> bool:
    return len(values) >= 2 and values[-1] == values[-2]


@dataclass
class SoundnessEntry:
    """Both approximation sequences at one initial state, with their verdict flags.

    ``op_verdict`` comes from the Kleene iteration over the operational MDP and is
    converged-exact only when the reachable region closed and an iterate repeated.
    ``wp_exact`` holds for loop-free programs, whose wp does not depend on the budget.
    """

    state: ProgramState
    wp_values: List[Tuple[int, ExtValue]]
    op_values: List[Tuple[int, ExtValue]]
    op_verdict: Verdict = Verdict.LOWER_BOUND
    wp_exact: bool = False

    @property
    def wp_monotone(self) -> bool:
        return _is_monotone([v for _, v in self.wp_values])

    @property
    def op_monotone(self) -> bool:
        return _is_monotone([v for _, v in self.op_values])

    @property
    def wp_stabilized(self) -> bool:
        return _stabilized([v for _, v in self.wp_values])

    @property
    def op_exact(self) -> bool:
        return self.op_verdict is Verdict.CONVERGED_EXACT

    @property
    def agreement(self) -> Optional[bool]:
        """Whether the last values match, judged only when one side is exact.

        None while both sides are lower bounds, or while the exact side is still
        strictly above the other one.
        """
        last_wp, last_op = self.wp_values[-1][1], self.op_values[-1][1]
        if self.op_exact and self.wp_exact:
            return last_wp == last_op
        if self.op_exact or self.wp_exact:
            return True if last_wp == last_op else None
        return None

    @property
    def gap(self) -> Optional[ExtValue]:
        """Distance between the last values, when both are finite."""
        last_wp, last_op = self.wp_values[-1][1], self.op_values[-1][1]
        if last_wp.is_infinite or last_op.is_infinite:
            return None
        return ExtValue(abs(last_wp.as_fraction() - last_op.as_fraction()))

    @property
    def violations(self) -> List[str]:
        found = []
        if not self.wp_monotone:
            found.append("wp sequence decreased")
        if not self.op_monotone:
            found.append("operational sequence decreased")
        if self.op_exact and self.wp_exact and self.agreement is False:
            found.append("exact values differ")
        if self.op_exact and any(v > self.op_values[-1][1] for _, v in self.wp_values):
            found.append("wp approximant exceeds the exact operational value")
        if self.wp_exact and any(v > self.wp_values[-1][1] for _, v in self.op_values):
            found.append("operational iterate exceeds the exact wp value")
        return found

    def to_dict(self) -> Dict[str, Any]:
        gap = self.gap
        return {
            "state": str(self.state),
            "wp": [[b, render_ext(v)] for b, v in self.wp_values],
            "op": [[n, render_ext(v)] for n, v in self.op_values],
            "wp_exact": self.wp_exact,
            "wp_stabilized": self.wp_stabilized,
            "op_iteration": self.op_verdict.value,
            "agreement": self.agreement,
            "gap": None if gap is None else render_ext(gap),
            "violations": self.violations,
        }


@dataclass
class SoundnessReport:
    program: str
    mode: WpMode
    entries: List[SoundnessEntry] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return all(not entry.violations for entry in self.entries)

    @property
    def exact(self) -> bool:
        """True when every entry's operational value is the least fixed point."""
        return bool(self.entries) and all(entry.op_exact for entry in self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "program": self.program,
            "mode": self.mode.value,
            "sound": self.sound,
            "exact": self.exact,
            "entries": [entry.to_dict() for entry in self.entries],
        }


def soundness_check(
    stmt: PgclStmt,
    post: Expectation,
    states: Iterable[ProgramState],
    mode: WpMode,
    wp_budgets: Sequence[int],
    op_steps: Sequence[int],
    max_nodes: int = DEFAULT_MAX_NODES,
) -> SoundnessReport:
    """Sweep wp over loop budgets and op_wp over step counts at each state and compare."""
    mode = WpMode(mode)
    if not wp_budgets or not op_steps:
        raise SyntaxTreeError("Budget schedules must be nonempty")

    budgets = sorted(set(wp_budgets))
    step_counts = sorted(set(op_steps))
    transformers = {b: wp(stmt, post, mode, b) for b in budgets}
    loop_free = is_loop_free(stmt)
    report = SoundnessReport(pretty(stmt), mode)

    for state in states:
        iterates = op_wp_iterates(stmt, post, state, mode, step_counts[-1], max_nodes)
        start = Running(stmt, state)
        entry = SoundnessEntry(
            state,
            [(b, transformers[b](state)) for b in budgets],
            [(n, iterates[n][start]) for n in step_counts],
            op_verdict=iterates.verdict,
            wp_exact=loop_free,
        )
        for problem in entry.violations:
            logger.warning(f"Soundness check at {state}: {problem}")
        report.entries.append(entry)

    return report


@dataclass
class DecompositionEntry:
    state: ProgramState
    nested: ExtValue
    composed: ExtValue
    unfolding: List[Tuple[str, ExtValue, ExtValue]] = field(default_factory=list)

    @property
    def inequality_holds(self) -> bool:
        return self.nested <= self.composed

    @property
    def unfolding_holds(self) -> bool:
        return all(lhs == rhs for _, lhs, rhs in self.unfolding)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "state": str(self.state),
            "nested": render_ext(self.nested),
            "composed": render_ext(self.composed),
            "inequality_holds": self.inequality_holds,
            "unfolding": [[p, render_ext(l), render_ext(r)] for p, l, r in self.unfolding],
            "unfolding_holds": self.unfolding_holds,
        }


@dataclass
class DecompositionReport:
    steps: int
    entries: List[DecompositionEntry] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(e.inequality_holds and e.unfolding_holds for e in self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "holds": self.holds,
            "entries": [e.to_dict() for e in self.entries],
        }


def decomposition_checks(
    first: PgclStmt,
    second: PgclStmt,
    post: Expectation,
    states: Iterable[ProgramState],
    steps: int,
    mode: WpMode = WpMode.DEMONIC,
) -> DecompositionReport:
    """Check op_wp(C1, op_wp(C2, X)) ⪯ op_wp(C1; C2, X) and, for loop-free parts, the one-step identity.

    The nested side spends ``steps`` iterations on each program, so the composed
    side gets 2·steps.
    """
    mode = WpMode(mode)
    composed_program = Seq(first, second)
    inner = OperationalExpectation(second, post, mode, steps)
    report = DecompositionReport(steps)

    loop_free = [c for c in (first, second, composed_program) if is_loop_free(c)]

    for state in states:
        entry = DecompositionEntry(
            state,
            nested=op_wp(first, inner, state, mode, steps),
            composed=op_wp(composed_program, post, state, mode, 2 * steps),
        )
        for program in loop_free:
            lhs = wp(program, post, mode, 0)(state)
            rhs = one_step_unfolding(program, post, state, mode)
            entry.unfolding.append((pretty(program), lhs, rhs))
        if not entry.inequality_holds:
            logger.warning(f"Sequential decomposition fails at {state}: {entry.nested} > {entry.composed}")
        report.entries.append(entry)

    return report


__all__ = [
    "DecompositionEntry",
    "DecompositionReport",
    "LoopApprox",
    "OperationalExpectation",
    "SoundnessEntry",
    "SoundnessReport",
    "WpMode",
    "char_fn_apply",
    "decomposition_checks",
    "one_step_unfolding",
    "op_wp",
    "op_wp_iterates",
    "soundness_check",
    "wp",
    "wp_guided_scheduler",
]
