"""pGCL abstract syntax, program states and expression evaluation.

Statements and expressions are immutable, structurally compared values.
Subtraction is monus: it clamps at zero so every value stays non-negative.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Iterator, Mapping, Tuple, Union

from expected_rewards.core.extreal import ExtValue, render_ext


class SyntaxTreeError(Exception):
    """Raised for ill-formed syntax trees or program states."""

    pass


# Arithmetic expressions


@dataclass(frozen=True)
class Num:
    value: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        if self.value < 0:
            raise SyntaxTreeError(f"Literals are non-negative, got {self.value}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: "AExpr"
    right: "AExpr"


@dataclass(frozen=True)
class Monus:
    left: "AExpr"
    right: "AExpr"


@dataclass(frozen=True)
class Mul:
    left: "AExpr"
    right: "AExpr"


AExpr = Union[Num, Var, Add, Monus, Mul]


# Boolean expressions

COMPARISONS = ("=", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str
    left: AExpr
    right: AExpr

    def __post_init__(self) -> None:
        if self.op not in COMPARISONS:
            raise SyntaxTreeError(f"Unknown comparison {self.op!r}")


@dataclass(frozen=True)
class And:
    left: "BExpr"
    right: "BExpr"


@dataclass(frozen=True)
class Or:
    left: "BExpr"
    right: "BExpr"


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


BExpr = Union[BoolLit, Cmp, And, Or, Not]


# Statements


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: AExpr


@dataclass(frozen=True)
class Tick:
    reward: ExtValue

    def __post_init__(self) -> None:
        object.__setattr__(self, "reward", ExtValue.of(self.reward))


@dataclass(frozen=True)
class Seq:
    first: "PgclStmt"
    second: "PgclStmt"


@dataclass(frozen=True)
class ProbChoice:
    left: "PgclStmt"
    prob: Fraction
    right: "PgclStmt"

    def __post_init__(self) -> None:
        if not isinstance(self.prob, Fraction):
            object.__setattr__(self, "prob", Fraction(self.prob))
        if not 0 <= self.prob <= 1:
            raise SyntaxTreeError(f"Choice probability {self.prob} outside [0, 1]")


@dataclass(frozen=True)
class NondetChoice:
    left: "PgclStmt"
    right: "PgclStmt"


@dataclass(frozen=True)
class Ite:
    guard: BExpr
    then: "PgclStmt"
    orelse: "PgclStmt"


@dataclass(frozen=True)
class While:
    guard: BExpr
    body: "PgclStmt"


PgclStmt = Union[Skip, Assign, Tick, Seq, ProbChoice, NondetChoice, Ite, While]


@dataclass(frozen=True)
class ProgramState:
    """Finite-support valuation; absent variables read as 0 and zero entries are never stored."""

    entries: Tuple[Tuple[str, Fraction], ...] = ()

    def __post_init__(self) -> None:
        canonical = []
        for name, value in sorted(dict(self.entries).items()):
            value = Fraction(value)
            if value < 0:
                raise SyntaxTreeError(f"Variable {name} has negative value {value}")
            if value != 0:
                canonical.append((name, value))
        object.__setattr__(self, "entries", tuple(canonical))

    @classmethod
    def of(cls, values: Mapping[str, Union[int, Fraction]]) -> "ProgramState":
        return cls(tuple((k, Fraction(v)) for k, v in values.items()))

    def __getitem__(self, name: str) -> Fraction:
        for key, value in self.entries:
            if key == name:
                return value
        return Fraction(0)

    def update(self, name: str, value: Fraction) -> "ProgramState":
        values = dict(self.entries)
        values[name] = Fraction(value)
        return ProgramState(tuple(values.items()))

    def render(self, variables: Tuple[str, ...] = ()) -> str:
        """Comma-separated ``x=v`` list over the support plus ``variables``."""
        names = sorted(set(variables) | {k for k, _ in self.entries})
        if not names:
            return "{}"
        return ", ".join(f"{n}={self[n]}" for n in names)

    def __str__(self) -> str:
        return self.render()


def eval_aexpr(expr: AExpr, state: ProgramState) -> Fraction:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return state[expr.name]
    left = eval_aexpr(expr.left, state)
    right = eval_aexpr(expr.right, state)
    if isinstance(expr, Add):
        return left + right
    if isinstance(expr, Monus):
        return max(left - right, Fraction(0))
    if isinstance(expr, Mul):
        return left * right
    raise SyntaxTreeError(f"Not an arithmetic expression: {expr!r}")


_COMPARATORS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_bexpr(expr: BExpr, state: ProgramState) -> bool:
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, Cmp):
        return _COMPARATORS[expr.op](eval_aexpr(expr.left, state), eval_aexpr(expr.right, state))
    if isinstance(expr, And):
        return eval_bexpr(expr.left, state) and eval_bexpr(expr.right, state)
    if isinstance(expr, Or):
        return eval_bexpr(expr.left, state) or eval_bexpr(expr.right, state)
    if isinstance(expr, Not):
        return not eval_bexpr(expr.operand, state)
    raise SyntaxTreeError(f"Not a boolean expression: {expr!r}")


def is_loop_free(stmt: PgclStmt) -> bool:
    if isinstance(stmt, While):
        return False
    if isinstance(stmt, Seq):
        return is_loop_free(stmt.first) and is_loop_free(stmt.second)
    if isinstance(stmt, (ProbChoice, NondetChoice)):
        return is_loop_free(stmt.left) and is_loop_free(stmt.right)
    if isinstance(stmt, Ite):
        return is_loop_free(stmt.then) and is_loop_free(stmt.orelse)
    return True


def syntactic_step_bound(stmt: PgclStmt) -> int:
    """Upper bound on the small steps a loop-free statement takes before terminating."""
    if isinstance(stmt, (Skip, Assign, Tick)):
        return 1
    if isinstance(stmt, Seq):
        return syntactic_step_bound(stmt.first) + syntactic_step_bound(stmt.second)
    if isinstance(stmt, (ProbChoice, NondetChoice)):
        return 1 + max(syntactic_step_bound(stmt.left), syntactic_step_bound(stmt.right))
    if isinstance(stmt, Ite):
        return 1 + max(syntactic_step_bound(stmt.then), syntactic_step_bound(stmt.orelse))
    raise SyntaxTreeError("Loops have no syntactic step bound")


def _aexpr_variables(expr: AExpr) -> Iterator[str]:
    if isinstance(expr, Var):
        yield expr.name
    elif isinstance(expr, (Add, Monus, Mul)):
        yield from _aexpr_variables(expr.left)
        yield from _aexpr_variables(expr.right)


def _bexpr_variables(expr: BExpr) -> Iterator[str]:
    if isinstance(expr, Cmp):
        yield from _aexpr_variables(expr.left)
        yield from _aexpr_variables(expr.right)
    elif isinstance(expr, (And, Or)):
        yield from _bexpr_variables(expr.left)
        yield from _bexpr_variables(expr.right)
    elif isinstance(expr, Not):
        yield from _bexpr_variables(expr.operand)


def program_variables(stmt: PgclStmt) -> FrozenSet[str]:
    def walk(node: PgclStmt) -> Iterator[str]:
        if isinstance(node, Assign):
            yield node.var
            yield from _aexpr_variables(node.expr)
        elif isinstance(node, Seq):
            yield from walk(node.first)
            yield from walk(node.second)
        elif isinstance(node, (ProbChoice, NondetChoice)):
            yield from walk(node.left)
            yield from walk(node.right)
        elif isinstance(node, Ite):
            yield from _bexpr_variables(node.guard)
            yield from walk(node.then)
            yield from walk(node.orelse)
        elif isinstance(node, While):
            yield from _bexpr_variables(node.guard)
            yield from walk(node.body)

    return frozenset(walk(stmt))


# Pretty printing. Output parses back to the same tree.

_ADDITIVE = 1
_MULTIPLICATIVE = 2
_ATOMIC = 3


def _aexpr_precedence(expr: AExpr) -> int:
    if isinstance(expr, (Add, Monus)):
        return _ADDITIVE
    if isinstance(expr, Mul):
        return _MULTIPLICATIVE
    return _ATOMIC


def pretty_aexpr(expr: AExpr) -> str:
    if isinstance(expr, Num):
        return str(expr.value)
    if isinstance(expr, Var):
        return expr.name

    level = _aexpr_precedence(expr)
    symbol = {Add: "+", Monus: "-", Mul: "*"}[type(expr)]
    left = pretty_aexpr(expr.left)
    right = pretty_aexpr(expr.right)
    if _aexpr_precedence(expr.left) < level:
        left = f"({left})"
    # Operators are left-associative: an equal-precedence right operand needs parentheses.
    if _aexpr_precedence(expr.right) <= level:
        right = f"({right})"
    return f"{left} {symbol} {right}"


def _bexpr_precedence(expr: BExpr) -> int:
    if isinstance(expr, Or):
        return 1
    if isinstance(expr, And):
        return 2
    return 3


def pretty_bexpr(expr: BExpr) -> str:
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Cmp):
        return f"{pretty_aexpr(expr.left)} {expr.op} {pretty_aexpr(expr.right)}"
    if isinstance(expr, Not):
        inner = pretty_bexpr(expr.operand)
        return f"not {inner}" if isinstance(expr.operand, (BoolLit, Not)) else f"not ({inner})"

    level = _bexpr_precedence(expr)
    keyword = "and" if isinstance(expr, And) else "or"
    left = pretty_bexpr(expr.left)
    right = pretty_bexpr(expr.right)
    if _bexpr_precedence(expr.left) < level:
        left = f"({left})"
    if _bexpr_precedence(expr.right) <= level:
        right = f"({right})"
    return f"{left} {keyword} {right}"


def pretty(stmt: PgclStmt) -> str:
    """Concrete syntax on one line."""
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        return f"{stmt.var} := {pretty_aexpr(stmt.expr)}"
    if isinstance(stmt, Tick):
        return f"tick({render_ext(stmt.reward)})"
    if isinstance(stmt, Seq):
        first = pretty(stmt.first)
        if isinstance(stmt.first, Seq):
            first = f"{{{first}}}"
        return f"{first}; {pretty(stmt.second)}"
    if isinstance(stmt, ProbChoice):
        return f"{{{pretty(stmt.left)}}} [{stmt.prob}] {{{pretty(stmt.right)}}}"
    if isinstance(stmt, NondetChoice):
        return f"{{{pretty(stmt.left)}}} [] {{{pretty(stmt.right)}}}"
    if isinstance(stmt, Ite):
        return (
            f"if ({pretty_bexpr(stmt.guard)}) {{{pretty(stmt.then)}}} "
            f"else {{{pretty(stmt.orelse)}}}"
        )
    if isinstance(stmt, While):
        return f"while ({pretty_bexpr(stmt.guard)}) {{{pretty(stmt.body)}}}"
    raise SyntaxTreeError(f"Not a statement: {stmt!r}")


def head_label(stmt: PgclStmt) -> str:
    """Short label of the statement executed next, with nested blocks elided."""
    node = stmt
    while isinstance(node, Seq):
        node = node.first
    if isinstance(node, ProbChoice):
        label = f"{{...}} [{node.prob}] {{...}}"
    elif isinstance(node, NondetChoice):
        label = "{...} [] {...}"
    elif isinstance(node, Ite):
        label = f"if ({pretty_bexpr(node.guard)}) {{...}} else {{...}}"
    elif isinstance(node, While):
        label = f"while ({pretty_bexpr(node.guard)}) {{...}}"
    else:
        label = pretty(node)
    return f"{label}; ..." if isinstance(stmt, Seq) else label
