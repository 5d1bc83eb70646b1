from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from expected_rewards.core.extreal import (
    INFINITY,
    ONE,
    ZERO,
    ExtRealError,
    ExtValue,
    SupFlag,
    ext_add,
    ext_max,
    ext_min,
    ext_monus,
    ext_mul,
    ext_scale,
    ext_sum,
    parse_ext,
    render_ext,
    render_float,
    sup_of_sequence,
)

from tests.conftest import ext_values


class TestArithmetic:
    def test_zero_times_infinity_is_zero(self):
        assert ext_mul(ZERO, INFINITY) == ZERO
        assert ext_mul(INFINITY, ZERO) == ZERO

    def test_infinity_absorbs_addition(self):
        assert ext_add(ExtValue.of(5), INFINITY) == INFINITY
        assert ext_sum([ONE, INFINITY, ONE]) == INFINITY

    def test_scale_by_probability(self):
        assert ext_scale(Fraction(1, 2), ExtValue.of(3)) == ExtValue(Fraction(3, 2))
        assert ext_scale(Fraction(0), INFINITY) == ZERO
        with pytest.raises(ExtRealError):
            ext_scale(Fraction(3, 2), ONE)

    def test_negative_values_rejected(self):
        with pytest.raises(ExtRealError):
            ExtValue(Fraction(-1))

    def test_floats_rejected(self):
        with pytest.raises(ExtRealError):
            ExtValue.of(0.5)  # type: ignore[arg-type]

    def test_operators_accept_plain_numbers(self):
        assert ExtValue.of(2) + 1 == 3
        assert 2 * ExtValue(Fraction(1, 4)) == ExtValue(Fraction(1, 2))

    def test_monus_truncates_at_zero(self):
        assert ext_monus(ExtValue.of(5), ExtValue.of(2)) == ExtValue.of(3)
        assert ext_monus(ExtValue.of(2), ExtValue.of(5)) == ZERO

    def test_monus_with_infinity(self):
        assert ext_monus(INFINITY, ExtValue.of(7)) == INFINITY
        assert ext_monus(ExtValue.of(7), INFINITY) == ZERO
        assert ext_monus(INFINITY, INFINITY) == ZERO

    @given(ext_values, ext_values)
    def test_monus_then_add_covers_left(self, a, b):
        assert a <= ext_add(ext_monus(a, b), b)
        assert ext_monus(a, b) <= a

    @given(ext_values, ext_values)
    def test_order_is_total(self, a, b):
        assert (a <= b) or (b <= a)
        assert ext_min(a, b) <= ext_max(a, b)

    @given(ext_values, ext_values, ext_values)
    def test_addition_is_associative(self, a, b, c):
        assert ext_add(ext_add(a, b), c) == ext_add(a, ext_add(b, c))

    @given(ext_values)
    def test_infinity_is_top(self, a):
        assert a <= INFINITY
        assert ZERO <= a


class TestParsing:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("0", ZERO),
            ("3", ExtValue.of(3)),
            ("3/4", ExtValue(Fraction(3, 4))),
            (" 6/4 ", ExtValue(Fraction(3, 2))),
            ("inf", INFINITY),
            ("∞", INFINITY),
        ],
    )
    def test_parse(self, text, expected):
        assert parse_ext(text) == expected

    @pytest.mark.parametrize("text", ["", "-1", "1.5", "1/0", "abc", "1/2/3"])
    def test_malformed(self, text):
        with pytest.raises(ExtRealError):
            parse_ext(text)

    def test_render(self):
        assert render_ext(ExtValue(Fraction(3, 4))) == "3/4"
        assert render_ext(INFINITY) == "inf"
        assert render_float(ExtValue(Fraction(1, 4))) == "0.25"
        assert render_float(INFINITY) == "inf"

    @given(ext_values)
    def test_render_parses_back(self, value):
        assert parse_ext(render_ext(value)) == value


class TestSupremum:
    def test_stabilized_sequence_is_exact(self):
        terms = [ZERO, ONE, ExtValue.of(2), ExtValue.of(2), ExtValue.of(2)]
        assert sup_of_sequence(terms, 10) == (ExtValue.of(2), SupFlag.EXACT)

    def test_infinite_term_is_exact(self):
        assert sup_of_sequence([ONE, INFINITY], 10) == (INFINITY, SupFlag.EXACT)

    def test_budget_exhaustion_gives_lower_bound(self):
        def halves():
            total = Fraction(0)
            step = Fraction(1)
            while True:
                total += step
                step /= 2
                yield ExtValue(total)

        value, flag = sup_of_sequence(halves(), 20)
        assert flag is SupFlag.LOWER_BOUND
        assert Fraction(2) - value.as_fraction() < Fraction(1, 10**5)

    def test_finite_sequence_ends_exact(self):
        assert sup_of_sequence([ZERO, ONE], 10) == (ONE, SupFlag.EXACT)
        assert sup_of_sequence([], 10) == (ZERO, SupFlag.EXACT)

    def test_decreasing_sequence_rejected(self):
        with pytest.raises(ExtRealError):
            sup_of_sequence([ONE, ZERO], 10)

    def test_budget_must_be_positive(self):
        with pytest.raises(ExtRealError):
            sup_of_sequence([ONE], 0)

    @given(st.lists(st.integers(min_value=0, max_value=5), min_size=1, max_size=8))
    def test_never_exceeds_the_supremum(self, increments):
        terms = []
        total = 0
        for inc in increments:
            total += inc
            terms.append(ExtValue.of(total))
        value, _ = sup_of_sequence(terms, 100)
        assert value <= ExtValue.of(total)
