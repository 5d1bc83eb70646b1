"""Parsing of pGCL programs, postexpectations and initial states."""

import logging
from fractions import Fraction
from functools import lru_cache
from typing import Any, List

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput, VisitError

from expected_rewards.core.extreal import INFINITY, ExtValue
from expected_rewards.lang.expectations import (
    Const,
    Difference,
    Expectation,
    Iverson,
    Maximum,
    Minimum,
    Product,
    Sum,
    VarRead,
)
from expected_rewards.lang.syntax import (
    Add,
    And,
    Assign,
    BExpr,
    BoolLit,
    Cmp,
    Ite,
    Monus,
    Mul,
    NondetChoice,
    Not,
    Num,
    Or,
    PgclStmt,
    ProbChoice,
    ProgramState,
    Seq,
    Skip,
    SyntaxTreeError,
    Tick,
    Var,
    While,
)

logger = logging.getLogger(__name__)


class PgclSyntaxError(Exception):
    """Parse failure with a 1-based source location (0 when unknown)."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        location = f"line {line}, column {column}: " if line > 0 else ""
        super().__init__(f"{location}{message}")
        self.reason = message
        self.line = line
        self.column = column


def _rational(token: Token) -> Fraction:
    try:
        return Fraction(str(token))
    except ZeroDivisionError as e:
        raise PgclSyntaxError("zero denominator", token.line, token.column) from e


class _PgclTransformer(Transformer):
    """Builds syntax trees and expectation evaluators from parse trees."""

    def program(self, items: List[Any]) -> PgclStmt:
        return items[0]

    def block(self, items: List[Any]) -> PgclStmt:
        return items[0]

    def seq(self, items: List[Any]) -> PgclStmt:
        return Seq(items[0], items[1])

    def skip(self, items: List[Any]) -> PgclStmt:
        return Skip()

    def assign(self, items: List[Any]) -> PgclStmt:
        name, expr = items
        return Assign(str(name), expr)

    def tick(self, items: List[Any]) -> PgclStmt:
        (token,) = items
        if token.type == "INF":
            return Tick(INFINITY)
        return Tick(ExtValue(_rational(token)))

    def prob_choice(self, items: List[Any]) -> PgclStmt:
        left, token, right = items
        probability = _rational(token)
        if probability > 1:
            raise PgclSyntaxError(
                f"choice probability {probability} exceeds 1", token.line, token.column
            )
        return ProbChoice(left, probability, right)

    def nondet_choice(self, items: List[Any]) -> PgclStmt:
        return NondetChoice(items[0], items[1])

    def ite(self, items: List[Any]) -> PgclStmt:
        guard, then, orelse = items
        return Ite(guard, then, orelse)

    def while_loop(self, items: List[Any]) -> PgclStmt:
        guard, body = items
        return While(guard, body)

    def num(self, items: List[Any]) -> Num:
        return Num(_rational(items[0]))

    def var(self, items: List[Any]) -> Var:
        return Var(str(items[0]))

    def add(self, items: List[Any]) -> Add:
        return Add(items[0], items[1])

    def monus(self, items: List[Any]) -> Monus:
        return Monus(items[0], items[1])

    def mul(self, items: List[Any]) -> Mul:
        return Mul(items[0], items[1])

    def true(self, items: List[Any]) -> BExpr:
        return BoolLit(True)

    def false(self, items: List[Any]) -> BExpr:
        return BoolLit(False)

    def cmp(self, items: List[Any]) -> BExpr:
        left, op, right = items
        return Cmp(str(op), left, right)

    def or_(self, items: List[Any]) -> BExpr:
        return Or(items[0], items[1])

    def and_(self, items: List[Any]) -> BExpr:
        return And(items[0], items[1])

    def not_(self, items: List[Any]) -> BExpr:
        return Not(items[0])

    def expectation(self, items: List[Any]) -> Expectation:
        return items[0]

    def e_const(self, items: List[Any]) -> Expectation:
        (token,) = items
        if token.type == "INF":
            return Const(INFINITY)
        return Const(ExtValue(_rational(token)))

    def e_var(self, items: List[Any]) -> Expectation:
        return VarRead(str(items[0]))

    def e_iverson(self, items: List[Any]) -> Expectation:
        return Iverson(items[0])

    def e_add(self, items: List[Any]) -> Expectation:
        return Sum(items[0], items[1])

    def e_monus(self, items: List[Any]) -> Expectation:
        return Difference(items[0], items[1])

    def e_mul(self, items: List[Any]) -> Expectation:
        return Product(items[0], items[1])

    def e_min(self, items: List[Any]) -> Expectation:
        return Minimum(items[0], items[1])

    def e_max(self, items: List[Any]) -> Expectation:
        return Maximum(items[0], items[1])

    def state(self, items: List[Any]) -> ProgramState:
        names = [name for name, _ in items]
        duplicates = {n for n in names if names.count(n) > 1}
        if duplicates:
            raise PgclSyntaxError(f"variable assigned twice: {', '.join(sorted(duplicates))}")
        return ProgramState(tuple(items))

    def binding(self, items: List[Any]) -> Any:
        name, value = items
        return str(name), _rational(value)


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark.open(
        "pgcl.lark",
        rel_to=__file__,
        start=["program", "expectation", "state"],
        parser="earley",
    )


def _parse(text: str, start: str) -> Any:
    try:
        tree = _parser().parse(text, start=start)
    except UnexpectedInput as e:
        line = max(getattr(e, "line", 0) or 0, 0)
        column = max(getattr(e, "column", 0) or 0, 0)
        context = ""
        try:
            context = e.get_context(text).strip()
        except Exception:
            pass
        raise PgclSyntaxError(f"unexpected input near {context!r}", line, column) from e

    try:
        return _PgclTransformer().transform(tree)
    except VisitError as e:
        original = e.orig_exc
        if isinstance(original, PgclSyntaxError):
            raise original from e
        if isinstance(original, SyntaxTreeError):
            raise PgclSyntaxError(str(original)) from e
        raise


def parse_program(text: str) -> PgclStmt:
    """Parse program text; errors carry line and column."""
    program = _parse(text, "program")
    logger.debug(f"Parsed program of {len(text)} characters")
    return program


def parse_expectation(text: str) -> Expectation:
    """Parse a postexpectation such as ``y``, ``[x = 0] * (y + 2)`` or ``min(x, 3)``."""
    return _parse(text, "expectation")


def parse_state(text: str) -> ProgramState:
    """Parse an initial state ``x=3/2,y=0``; the empty string is the all-zero state."""
    return _parse(text, "state")


__all__ = ["PgclSyntaxError", "parse_expectation", "parse_program", "parse_state"]
