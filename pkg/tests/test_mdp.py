from fractions import Fraction

import pytest
from hypothesis import given

from expected_rewards.core.extreal import INFINITY, ZERO, ExtValue
from expected_rewards.core.mdp import (
    Distribution,
    EnumerationBoundExceeded,
    ExplicitMdp,
    HorizonScheduler,
    LazyMdp,
    Mdp,
    MdpError,
    MemorylessScheduler,
    Path,
    PathMode,
    RewardFn,
    count_horizon_schedulers,
    enumerate_horizon_schedulers,
    enumerate_paths,
    expected_reward_last_state,
    expected_reward_memoryless,
    expected_reward_step,
    induced_mc,
    monte_carlo_estimate,
    opt_expected_reward_step_bruteforce,
    path_probability,
    path_reward,
    reachable_states,
    validate_path,
)
from expected_rewards.core.models import running_example

from tests.conftest import explicit_mdps

HALF = Fraction(1, 2)


class TestDistribution:
    def test_must_sum_to_one(self):
        with pytest.raises(MdpError):
            Distribution((("a", HALF), ("b", Fraction(1, 3))))

    def test_rejects_zero_and_duplicates(self):
        with pytest.raises(MdpError):
            Distribution((("a", Fraction(0)), ("b", Fraction(1))))
        with pytest.raises(MdpError):
            Distribution((("a", HALF), ("a", HALF)))

    def test_from_pairs_merges_and_drops_zero(self):
        d = Distribution.from_pairs([("a", HALF), ("b", 0), ("a", HALF)])
        assert d.support == (("a", Fraction(1)),)

    def test_probability_lookup(self):
        d = Distribution((("a", HALF), ("b", HALF)))
        assert d.probability("a") == HALF
        assert d.probability("c") == 0


class TestExplicitMdp:
    def test_every_state_needs_an_action(self):
        with pytest.raises(MdpError):
            ExplicitMdp(["s", "t"], ["a"], {("s", "a"): Distribution.dirac("s")})

    def test_undeclared_target_rejected(self):
        with pytest.raises(MdpError):
            ExplicitMdp(["s"], ["a"], {("s", "a"): Distribution.dirac("t")})

    def test_enabled_actions_follow_declaration_order(self, coin_mdp):
        mdp, _ = coin_mdp
        assert tuple(mdp.enabled_actions("s0")) == ("a", "b")
        assert tuple(mdp.enabled_actions("done")) == ("a",)
        assert isinstance(mdp, Mdp)

    def test_disabled_action(self, coin_mdp):
        mdp, _ = coin_mdp
        with pytest.raises(MdpError):
            mdp.successors("done", "b")


class TestLazyMdp:
    def test_expansion_is_memoized(self):
        calls = []

        def expand(n):
            calls.append(n)
            return {"a": Distribution.dirac(n + 1)}

        mdp = LazyMdp(expand, ["a"])
        mdp.successors(0, "a")
        mdp.enabled_actions(0)
        assert calls == [0]
        assert mdp.materialized_states == 1

    def test_undeclared_action_rejected(self):
        mdp = LazyMdp(lambda n: {"z": Distribution.dirac(n)}, ["a"])
        with pytest.raises(MdpError):
            mdp.enabled_actions(0)


class TestPaths:
    def test_enumerate_exact_and_up_to(self, coin_mdp):
        mdp, _ = coin_mdp
        exact = enumerate_paths(mdp, "s0", 1)
        assert {str(p) for p in exact} == {"s0 stop", "s0 s0", "s0 done"}
        up_to = enumerate_paths(mdp, "s0", 1, PathMode.UP_TO)
        assert len(up_to) == 4

    def test_validate_path(self, coin_mdp):
        mdp, _ = coin_mdp
        validate_path(mdp, Path(("s0", "s0", "stop", "done")))
        with pytest.raises(MdpError):
            validate_path(mdp, Path(("stop", "s0")))

    def test_empty_path_rejected(self):
        with pytest.raises(MdpError):
            Path(())

    @given(explicit_mdps(allow_infinite=True))
    def test_path_probabilities_sum_to_one(self, drawn):
        mdp, _, states = drawn
        scheduler = MemorylessScheduler(lambda s: mdp.enabled_actions(s)[0])
        for n in range(4):
            paths = enumerate_paths(mdp, states[0], n)
            total = sum((path_probability(mdp, scheduler, p).as_fraction() for p in paths), Fraction(0))
            assert total == 1

    def test_probability_and_reward(self, coin_mdp):
        mdp, reward = coin_mdp
        scheduler = MemorylessScheduler({"s0": "b", "stop": "a", "done": "a"})
        path = Path(("s0", "s0", "done"))
        assert path_probability(mdp, scheduler, path) == ExtValue(Fraction(1, 4))
        assert path_reward(reward, path) == ExtValue.of(2)
        assert path_probability(mdp, scheduler, Path(("s0", "stop"))) == ZERO


class TestExpectedRewards:
    def test_step_reward_of_coin_loop(self, coin_mdp):
        mdp, reward = coin_mdp
        loop = MemorylessScheduler({"s0": "b", "stop": "a", "done": "a"})
        # 1 + 1/2 + 1/4 after two steps
        assert expected_reward_step(mdp, reward, loop, "s0", 2) == ExtValue(Fraction(7, 4))
        assert expected_reward_last_state(mdp, reward, loop, "s0", 2) == ExtValue(Fraction(7, 4))

    def test_zero_probability_paths_do_not_count(self):
        mdp = ExplicitMdp(
            ["s", "bad", "ok"],
            ["a", "b"],
            {
                ("s", "a"): Distribution.dirac("ok"),
                ("s", "b"): Distribution.dirac("bad"),
                ("bad", "a"): Distribution.dirac("bad"),
                ("ok", "a"): Distribution.dirac("ok"),
            },
        )
        reward = RewardFn({"bad": INFINITY})
        safe = MemorylessScheduler({"s": "a", "ok": "a", "bad": "a"})
        assert expected_reward_step(mdp, reward, safe, "s", 3) == ZERO

    @given(explicit_mdps(allow_infinite=True))
    def test_memoryless_forms_agree(self, drawn):
        mdp, reward, states = drawn
        scheduler = MemorylessScheduler(lambda s: mdp.enabled_actions(s)[-1])
        for n in range(3):
            by_paths = expected_reward_step(mdp, reward, scheduler, states[0], n)
            assert expected_reward_last_state(mdp, reward, scheduler, states[0], n) == by_paths
            assert expected_reward_memoryless(mdp, reward, scheduler, states[0], n) == by_paths

    def test_negative_step_count(self, coin_mdp):
        mdp, reward = coin_mdp
        with pytest.raises(MdpError):
            expected_reward_step(mdp, reward, MemorylessScheduler({}), "s0", -1)


class TestBruteForce:
    def test_counts_schedulers(self, coin_mdp):
        mdp, _ = coin_mdp
        # s0 -a-> stop (1 way) or s0 -b-> {s0, done}: 2 choices at the next s0
        assert count_horizon_schedulers(mdp, "s0", 2) == 1 + 2
        assert len(list(enumerate_horizon_schedulers(mdp, "s0", 2))) == 3

    def test_cap(self, coin_mdp):
        mdp, _ = coin_mdp
        with pytest.raises(EnumerationBoundExceeded) as info:
            list(enumerate_horizon_schedulers(mdp, "s0", 6, max_schedulers=4))
        assert info.value.cap == 4

    def test_min_and_max(self, coin_mdp):
        mdp, reward = coin_mdp
        # stop: 1 + 3; loop twice: 1 + 1/2 + 1/4
        assert opt_expected_reward_step_bruteforce(mdp, reward, "s0", 2, "max") == ExtValue.of(4)
        assert opt_expected_reward_step_bruteforce(mdp, reward, "s0", 2, "min") == ExtValue(
            Fraction(7, 4)
        )

    def test_unknown_mode(self, coin_mdp):
        mdp, reward = coin_mdp
        with pytest.raises(MdpError):
            opt_expected_reward_step_bruteforce(mdp, reward, "s0", 1, "avg")

    @given(explicit_mdps(max_states=3))
    def test_history_never_beats_memoryless_on_step_bound(self, drawn):
        mdp, reward, states = drawn
        best = opt_expected_reward_step_bruteforce(mdp, reward, states[0], 2, "max")
        for action in ("a", "b"):
            memoryless = MemorylessScheduler.constant(mdp, action)
            assert expected_reward_step(mdp, reward, memoryless, states[0], 2) <= best


class TestSchedulers:
    def test_horizon_scheduler_undefined_path(self):
        scheduler = HorizonScheduler({("s0",): "a"}, 1)
        with pytest.raises(MdpError):
            scheduler.choose_for(Path(("s1",)))

    def test_induced_chain_has_one_action(self, coin_mdp):
        mdp, _ = coin_mdp
        chain = induced_mc(mdp, MemorylessScheduler({"s0": "b", "stop": "a", "done": "a"}))
        assert tuple(chain.enabled_actions("s0")) == ("b",)
        with pytest.raises(MdpError):
            chain.successors("s0", "a")

    def test_reachable_states(self, coin_mdp):
        mdp, _ = coin_mdp
        assert reachable_states(mdp, ["stop"]) == ["stop", "done"]
        with pytest.raises(MdpError):
            reachable_states(running_example().mdp, ["s0"], max_states=50)


class TestMonteCarlo:
    def test_coin_loop_estimate(self, coin_mdp):
        mdp, reward = coin_mdp
        loop = MemorylessScheduler({"s0": "b", "stop": "a", "done": "a"})
        estimate = monte_carlo_estimate(mdp, reward, loop, "s0", 60, 4000, seed=7)
        assert abs(estimate.mean - 2.0) < 5 * estimate.standard_error + 0.05
        assert not estimate.divergent

    def test_seed_is_reproducible(self, coin_mdp):
        mdp, reward = coin_mdp
        loop = MemorylessScheduler({"s0": "b", "stop": "a", "done": "a"})
        first = monte_carlo_estimate(mdp, reward, loop, "s0", 20, 200, seed=3)
        second = monte_carlo_estimate(mdp, reward, loop, "s0", 20, 200, seed=3)
        assert first == second

    def test_rejects_empty_runs(self, coin_mdp):
        mdp, reward = coin_mdp
        with pytest.raises(MdpError):
            monte_carlo_estimate(mdp, reward, MemorylessScheduler({}), "s0", 0, 10, seed=1)
