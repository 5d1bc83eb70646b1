"""Exact extended non-negative reals: rationals plus one point at infinity."""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator, Optional, Tuple, Union

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, "ExtValue"]

_RATIONAL_PATTERN = re.compile(r"^\s*(\d+)\s*(?:/\s*(\d+))?\s*$")
_INFINITY_TOKENS = frozenset({"inf", "infinity", "∞"})


class ExtRealError(Exception):
    """Raised for malformed or out-of-domain extended-real values."""

    pass


@total_ordering
@dataclass(frozen=True)
class ExtValue:
    """Value in [0, ∞]: a non-negative Fraction, or infinity when ``rational`` is None.

    Addition absorbs infinity; multiplication uses 0 · ∞ = 0.
    """

    rational: Optional[Fraction] = Fraction(0)

    def __post_init__(self) -> None:
        if self.rational is None:
            return
        if not isinstance(self.rational, Fraction):
            if isinstance(self.rational, bool) or not isinstance(self.rational, int):
                raise ExtRealError(f"Expected an exact rational, got {type(self.rational).__name__}")
            object.__setattr__(self, "rational", Fraction(self.rational))
        if self.rational < 0:
            raise ExtRealError(f"Extended values are non-negative, got {self.rational}")

    @classmethod
    def of(cls, value: Number) -> "ExtValue":
        """Coerce an int, Fraction or ExtValue."""
        if isinstance(value, ExtValue):
            return value
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return cls(Fraction(value))
        raise ExtRealError(f"Cannot interpret {value!r} as an extended value")

    @property
    def is_infinite(self) -> bool:
        return self.rational is None

    @property
    def is_finite(self) -> bool:
        return self.rational is not None

    def as_fraction(self) -> Fraction:
        if self.rational is None:
            raise ExtRealError("Infinity has no rational representation")
        return self.rational

    def __add__(self, other: Number) -> "ExtValue":
        return ext_add(self, ExtValue.of(other))

    __radd__ = __add__

    def __mul__(self, other: Number) -> "ExtValue":
        return ext_mul(self, ExtValue.of(other))

    __rmul__ = __mul__

    def __lt__(self, other: Number) -> bool:
        other = ExtValue.of(other)
        if self.rational is None:
            return False
        if other.rational is None:
            return True
        return self.rational < other.rational

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            other = ExtValue(Fraction(other))
        if not isinstance(other, ExtValue):
            return NotImplemented
        return self.rational == other.rational

    def __hash__(self) -> int:
        return hash(("ExtValue", self.rational))

    def __float__(self) -> float:
        if self.rational is None:
            return float("inf")
        return float(self.rational)

    def __str__(self) -> str:
        return render_ext(self)

    def __repr__(self) -> str:
        return f"ExtValue({render_ext(self)})"


ZERO = ExtValue(Fraction(0))
ONE = ExtValue(Fraction(1))
INFINITY = ExtValue(None)


def ext_add(left: ExtValue, right: ExtValue) -> ExtValue:
    if left.rational is None or right.rational is None:
        return INFINITY
    return ExtValue(left.rational + right.rational)


def ext_mul(left: ExtValue, right: ExtValue) -> ExtValue:
    """Product with the measure-theoretic convention 0 · ∞ = 0."""
    if left.rational == 0 or right.rational == 0:
        return ZERO
    if left.rational is None or right.rational is None:
        return INFINITY
    return ExtValue(left.rational * right.rational)


def ext_scale(probability: Fraction, value: ExtValue) -> ExtValue:
    """Weight ``value`` by a probability in [0, 1]."""
    if probability < 0 or probability > 1:
        raise ExtRealError(f"Probability {probability} outside [0, 1]")
    return ext_mul(ExtValue(Fraction(probability)), value)


def ext_sum(values: Iterable[ExtValue]) -> ExtValue:
    total = Fraction(0)
    for value in values:
        if value.rational is None:
            return INFINITY
        total += value.rational
    return ExtValue(total)


def ext_min(left: ExtValue, right: ExtValue) -> ExtValue:
    return left if left <= right else right


def ext_max(left: ExtValue, right: ExtValue) -> ExtValue:
    return left if left >= right else right


def ext_monus(left: ExtValue, right: ExtValue) -> ExtValue:
    """Truncated subtraction max(left - right, 0); ∞ minus a finite value stays ∞, anything minus ∞ is 0."""
    if right.rational is None:
        return ZERO
    if left.rational is None:
        return INFINITY
    return ExtValue(max(left.rational - right.rational, Fraction(0)))


def parse_ext(text: str) -> ExtValue:
    """Parse ``p/q``, an integer, or ``inf``."""
    token = text.strip()
    if token.lower() in _INFINITY_TOKENS:
        return INFINITY
    match = _RATIONAL_PATTERN.match(token)
    if not match:
        raise ExtRealError(f"Malformed extended value: {text!r}")
    numerator, denominator = match.groups()
    if denominator is not None and int(denominator) == 0:
        raise ExtRealError(f"Zero denominator in {text!r}")
    return ExtValue(Fraction(int(numerator), int(denominator or 1)))


def render_ext(value: ExtValue) -> str:
    if value.rational is None:
        return "inf"
    return str(value.rational)


def render_float(value: ExtValue) -> str:
    return repr(float(value))


class SupFlag(str, Enum):
    """How a supremum was obtained."""

    EXACT = "exact"
    LOWER_BOUND = "lower-bound"


def sup_of_sequence(
    terms: Iterable[ExtValue], budget: int
) -> Tuple[ExtValue, SupFlag]:
    """Supremum of a monotone non-decreasing sequence, consuming at most ``budget`` terms.

    Exact when an infinite term appears, the sequence ends, or two consecutive
    terms are equal. Otherwise the last term is returned as a lower bound.
    """
    if budget < 1:
        raise ExtRealError(f"Budget must be positive, got {budget}")

    iterator: Iterator[ExtValue] = iter(terms)
    previous: Optional[ExtValue] = None
    consumed = 0

    for term in iterator:
        consumed += 1
        if previous is not None and term < previous:
            raise ExtRealError(
                f"Sequence decreased at term {consumed - 1}: {previous} > {term}"
            )
        if term.is_infinite:
            return INFINITY, SupFlag.EXACT
        if previous is not None and term == previous:
            return term, SupFlag.EXACT
        previous = term
        if consumed >= budget:
            logger.debug(f"Supremum budget of {budget} terms exhausted at {term}")
            return term, SupFlag.LOWER_BOUND

    if previous is None:
        return ZERO, SupFlag.EXACT
    return previous, SupFlag.EXACT
