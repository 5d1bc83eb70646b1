"""Expectations: memoized evaluators from program states to extended values."""

import threading
from abc import ABC, abstractmethod
from typing import Dict, Set, Union

from expected_rewards.core.extreal import (
    ONE,
    ZERO,
    ExtValue,
    ext_add,
    ext_max,
    ext_min,
    ext_monus,
    ext_mul,
    render_ext,
)
from expected_rewards.lang.syntax import (
    AExpr,
    BExpr,
    ProgramState,
    eval_aexpr,
    eval_bexpr,
    pretty_aexpr,
    pretty_bexpr,
)


class Expectation(ABC):
    """Total function ProgramState → [0, ∞], evaluated pointwise with a per-node memo."""

    def __init__(self) -> None:
        self._memo: Dict[ProgramState, ExtValue] = {}
        self._lock = threading.RLock()

    def __call__(self, state: ProgramState) -> ExtValue:
        cached = self._memo.get(state)
        if cached is not None:
            return cached
        value = self._evaluate(state)
        with self._lock:
            return self._memo.setdefault(state, value)

    @abstractmethod
    def _evaluate(self, state: ProgramState) -> ExtValue:
        ...

    def __add__(self, other: "Expectation") -> "Expectation":
        return Sum(self, other)

    def __mul__(self, other: "Expectation") -> "Expectation":
        return Product(self, other)


class Const(Expectation):
    def __init__(self, value: Union[ExtValue, int]) -> None:
        super().__init__()
        self.value = ExtValue.of(value)

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return self.value

    def __str__(self) -> str:
        return render_ext(self.value)


class VarRead(Expectation):
    def __init__(self, name: str) -> None:
        super().__init__()
        self.name = name

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ExtValue(state[self.name])

    def __str__(self) -> str:
        return self.name


class Iverson(Expectation):
    """1 where the guard holds, 0 elsewhere."""

    def __init__(self, guard: BExpr) -> None:
        super().__init__()
        self.guard = guard

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ONE if eval_bexpr(self.guard, state) else ZERO

    def __str__(self) -> str:
        return f"[{pretty_bexpr(self.guard)}]"


class _Binary(Expectation):
    symbol = "?"

    def __init__(self, left: Expectation, right: Expectation) -> None:
        super().__init__()
        self.left = left
        self.right = right

    def __str__(self) -> str:
        return f"({self.left} {self.symbol} {self.right})"


class Sum(_Binary):
    symbol = "+"

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ext_add(self.left(state), self.right(state))


class Difference(_Binary):
    """Pointwise truncated subtraction."""

    symbol = "-"

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ext_monus(self.left(state), self.right(state))


class Product(_Binary):
    """Pointwise product; both factors are always evaluated and 0 · ∞ = 0."""

    symbol = "*"

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ext_mul(self.left(state), self.right(state))


class Minimum(_Binary):
    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ext_min(self.left(state), self.right(state))

    def __str__(self) -> str:
        return f"min({self.left}, {self.right})"


class Maximum(_Binary):
    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ext_max(self.left(state), self.right(state))

    def __str__(self) -> str:
        return f"max({self.left}, {self.right})"


class Subst(Expectation):
    """X[x/e]: evaluate X after assigning e to x."""

    def __init__(self, inner: Expectation, var: str, expr: AExpr) -> None:
        super().__init__()
        self.inner = inner
        self.var = var
        self.expr = expr

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return self.inner(state.update(self.var, eval_aexpr(self.expr, state)))

    def __str__(self) -> str:
        return f"{self.inner}[{self.var}/{pretty_aexpr(self.expr)}]"


class Table(Expectation):
    """Values precomputed on a finite set of states; lookups elsewhere are an error."""

    def __init__(self, values: Dict[ProgramState, ExtValue]) -> None:
        super().__init__()
        self.values = values

    def _evaluate(self, state: ProgramState) -> ExtValue:
        try:
            return self.values[state]
        except KeyError as e:
            raise KeyError(f"No tabulated value for state {state}") from e

    def __call__(self, state: ProgramState) -> ExtValue:
        return self._evaluate(state)


class Probe(Expectation):
    """Records the states it is queried at and answers 0."""

    def __init__(self) -> None:
        super().__init__()
        self.requested: Set[ProgramState] = set()

    def __call__(self, state: ProgramState) -> ExtValue:
        self.requested.add(state)
        return ZERO

    def _evaluate(self, state: ProgramState) -> ExtValue:
        return ZERO


def const(value: Union[ExtValue, int]) -> Expectation:
    return Const(value)


def var(name: str) -> Expectation:
    return VarRead(name)


def substitute(inner: Expectation, name: str, expr: AExpr) -> Expectation:
    return Subst(inner, name, expr)


ZERO_EXPECTATION = Const(ZERO)
