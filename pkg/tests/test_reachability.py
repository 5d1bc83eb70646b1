from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from expected_rewards.core.extreal import ONE, ZERO, ExtValue
from expected_rewards.core.fixpoint import BellmanMode, ValueFunction
from expected_rewards.core.mdp import MdpError, opt_expected_reward_step_bruteforce
from expected_rewards.core.models import running_example, running_example_truncated
from expected_rewards.core.reachability import (
    REACH_SINK,
    TargetSet,
    reach_certificate,
    reach_probability,
    reach_transform,
)
from expected_rewards.infrastructure.model_io import parse_value_function

from tests.conftest import explicit_mdps


class TestTargetSet:
    def test_patterns(self):
        targets = TargetSet.from_patterns(["s*^R"])
        assert "s3^R" in targets
        assert "s3^L" not in targets
        assert REACH_SINK not in targets

    def test_explicit_members(self):
        targets = TargetSet.of(["stop"])
        assert "stop" in targets
        assert "s0" not in targets


class TestTransform:
    def test_targets_redirect_to_sink(self, coin_mdp):
        mdp, _ = coin_mdp
        reach_mdp, reward = reach_transform(mdp, TargetSet.of(["stop"]))
        assert tuple(reach_mdp.enabled_actions("stop")) == ("a", "b")
        assert reach_mdp.successors("stop", "b").states() == [REACH_SINK]
        assert reach_mdp.successors(REACH_SINK, "a").states() == [REACH_SINK]
        assert reward("stop") == ONE
        assert reward(REACH_SINK) == ZERO
        assert str(REACH_SINK) == "reach-sink"

    def test_unknown_action_at_sink(self, coin_mdp):
        mdp, _ = coin_mdp
        reach_mdp, _ = reach_transform(mdp, TargetSet.of(["stop"]))
        with pytest.raises(MdpError):
            reach_mdp.successors(REACH_SINK, "z")


class TestReachProbability:
    def test_running_example_max_reaches_right_states(self):
        model = running_example(1)
        result = reach_probability(
            model.mdp, TargetSet.from_patterns(["s*^R"]), "s0", BellmanMode.MAX, 40
        )
        assert ExtValue(1 - Fraction(1, 10**6)) <= result.last["s0"] <= ONE

    def test_running_example_min_avoids_targets(self):
        model = running_example(1)
        result = reach_probability(
            model.mdp, TargetSet.from_patterns(["s*^R"]), "s0", BellmanMode.MIN, 40
        )
        assert result.last["s0"] == ZERO

    @pytest.mark.parametrize("mode", list(BellmanMode))
    def test_initial_target_is_reached_immediately(self, mode):
        model = running_example(1)
        result = reach_probability(model.mdp, TargetSet.of(["s0"]), "s0", mode, 1)
        assert result.values_at("s0") == [ZERO, ONE]

    def test_probabilities_never_exceed_one(self, coin_mdp):
        mdp, _ = coin_mdp
        result = reach_probability(mdp, TargetSet.of(["done"]), "s0", BellmanMode.MAX, 30)
        assert all(v["s0"] <= ONE for v in result.iterates)
        assert result.last["s0"] == ONE

    @given(explicit_mdps(), st.integers(min_value=0, max_value=3))
    def test_matches_bruteforce_on_transformed_model(self, drawn, n):
        mdp, _, states = drawn
        targets = TargetSet.of(states[-1:])
        reach_mdp, reward = reach_transform(mdp, targets)
        for mode in (BellmanMode.MIN, BellmanMode.MAX):
            result = reach_probability(mdp, targets, states[0], mode, n + 1)
            oracle = opt_expected_reward_step_bruteforce(reach_mdp, reward, states[0], n, mode)
            assert result.last[states[0]] == oracle
            assert result.last[states[0]] <= ONE


class TestReachCertificate:
    def test_min_certificate_on_truncated_model(self, models_dir):
        model = running_example_truncated(60, 1)
        candidate = parse_value_function((models_dir / "reach_min_60.val").read_text())
        result = reach_certificate(
            model.mdp, TargetSet.from_patterns(["s*^R"]), BellmanMode.MIN, candidate, list(candidate)
        )
        assert result.certified
        assert result.domain_size == 183

    def test_zero_is_not_a_max_certificate(self):
        model = running_example_truncated(5, 1)
        domain = list(model.mdp.states)
        result = reach_certificate(
            model.mdp,
            TargetSet.from_patterns(["s*^R"]),
            BellmanMode.MAX,
            ValueFunction.constant(domain, ZERO),
            domain,
        )
        assert not result.certified
