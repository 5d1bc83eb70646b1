from fractions import Fraction

import pytest

from expected_rewards.core.extreal import INFINITY, ExtValue
from expected_rewards.core.fixpoint import ValueFunction
from expected_rewards.core.models import running_example_truncated
from expected_rewards.infrastructure.model_io import (
    ModelFormatError,
    parse_model,
    parse_value_function,
    render_model,
    render_value_function,
)

COIN = """
# fair coin loop
states:
  s0 stop
  done
actions:
  a b
transitions
  s0 a 1 stop
  s0 b 1/2 s0
  s0 b 1/2 done   # merged with the record above
  stop a 1 done
  done a 1 done
rewards
  s0 1
  stop inf
"""


class TestParseModel:
    def test_coin(self):
        model = parse_model(COIN)
        assert model.states == ("s0", "stop", "done")
        assert model.initial == "s0"
        assert model.mdp.successors("s0", "b").probability("done") == Fraction(1, 2)
        assert model.reward("stop") == INFINITY
        assert model.reward("done") == 0

    def test_record_before_header(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model("s0 s1\nstates\n")
        assert info.value.line == 1

    @pytest.mark.parametrize(
        "text, line",
        [
            ("states\n s0\nactions\n a\ntransitions\n s0 a 1 s9\n", 6),
            ("states\n s0\nactions\n a\ntransitions\n s0 z 1 s0\n", 6),
            ("states\n s0\nactions\n a\ntransitions\n s0 a 3/2 s0\n", 6),
            ("states\n s0\nactions\n a\ntransitions\n s0 a 1\n", 6),
            ("states\n s0 s0\n", 2),
            ("states\n s0\nactions\n a\ntransitions\n s0 a 1 s0\nrewards\n s0 -1\n", 8),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(ModelFormatError) as info:
            parse_model(text)
        assert info.value.line == line

    def test_distribution_must_sum_to_one(self):
        text = "states\n s0 s1\nactions\n a\ntransitions\n s0 a 1/2 s1\n s1 a 1 s1\n"
        with pytest.raises(ModelFormatError) as info:
            parse_model(text)
        assert info.value.line == 6

    def test_state_without_actions(self):
        with pytest.raises(ModelFormatError):
            parse_model("states\n s0 s1\nactions\n a\ntransitions\n s0 a 1 s1\n")

    def test_sixty_column_file(self, models_dir):
        model = parse_model((models_dir / "running_example_60.mdp").read_text())
        reference = running_example_truncated(60, 1)
        assert len(model.states) == 182
        for state in ("s0", "s17^L", "s59^R", "s60", "bot"):
            assert model.reward(state) == reference.reward(state)
            for action in reference.mdp.enabled_actions(state):
                assert model.mdp.successors(state, action) == reference.mdp.successors(state, action)


class TestRenderModel:
    def test_render_then_parse(self):
        reference = running_example_truncated(3, Fraction(1, 2))
        text = render_model(
            [str(s) for s in reference.mdp.states], ["N", "L", "R"], reference.mdp, reference.reward
        )
        model = parse_model(text)
        assert model.states == tuple(reference.mdp.states)
        assert model.reward("s1^L") == ExtValue(Fraction(1, 2))
        assert model.mdp.successors("s2", "R") == reference.mdp.successors("s2", "R")


class TestValueFunctions:
    def test_parse(self):
        v = parse_value_function("# candidate\ns0 2\ns0^L 7/2\nbot inf\n")
        assert v["s0^L"] == ExtValue(Fraction(7, 2))
        assert v["bot"] == INFINITY
        assert v["unlisted"] == 0

    def test_duplicates_rejected(self):
        with pytest.raises(ModelFormatError) as info:
            parse_value_function("s0 1\ns0 2\n")
        assert info.value.line == 2

    def test_render_in_order(self):
        v = ValueFunction({"a": ExtValue.of(1), "b": INFINITY})
        assert render_value_function(v, ["b", "a"]) == "b inf\na 1\n"
        assert parse_value_function(render_value_function(v)) == v
