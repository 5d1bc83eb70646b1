from fractions import Fraction

import pytest

from expected_rewards.core.extreal import INFINITY, ZERO, ExtValue
from expected_rewards.core.mdp import Distribution
from expected_rewards.lang.expectations import var
from expected_rewards.lang.opsem import (
    SINK,
    OpAction,
    Running,
    Terminated,
    config_label,
    dump_fragment,
    operational_mdp,
    rew_pgcl,
    step,
    torew,
)
from expected_rewards.lang.parser import parse_program, parse_state
from expected_rewards.lang.syntax import (
    Assign,
    BoolLit,
    Ite,
    NondetChoice,
    Num,
    ProbChoice,
    ProgramState,
    Seq,
    Skip,
    SyntaxTreeError,
    Tick,
    Var,
    While,
)

EMPTY = ProgramState()


class TestStep:
    def test_terminal_configurations_go_to_sink(self):
        assert step(Terminated(EMPTY)) == {OpAction.N: Distribution.dirac(SINK)}
        assert step(SINK) == {OpAction.N: Distribution.dirac(SINK)}

    def test_assignment(self):
        result = step(Running(Assign("x", Num(3)), EMPTY))
        assert result[OpAction.N].states() == [Terminated(ProgramState.of({"x": 3}))]

    def test_sequence_lifts_continuation(self):
        program = Seq(Skip(), Tick(2))
        assert step(Running(program, EMPTY))[OpAction.N].states() == [Running(Tick(2), EMPTY)]

    def test_probabilistic_choice(self):
        program = ProbChoice(Skip(), Fraction(1, 3), Assign("x", Num(1)))
        distribution = step(Running(program, EMPTY))[OpAction.N]
        assert distribution.probability(Running(Skip(), EMPTY)) == Fraction(1, 3)
        assert distribution.probability(Running(Assign("x", Num(1)), EMPTY)) == Fraction(2, 3)

    def test_equal_branches_merge(self):
        program = ProbChoice(Skip(), Fraction(1, 3), Skip())
        assert step(Running(program, EMPTY))[OpAction.N] == Distribution.dirac(Running(Skip(), EMPTY))

    def test_degenerate_probability_drops_branch(self):
        program = ProbChoice(Skip(), Fraction(1), Tick(1))
        assert step(Running(program, EMPTY))[OpAction.N].states() == [Running(Skip(), EMPTY)]

    def test_nondeterministic_choice(self):
        result = step(Running(NondetChoice(Skip(), Tick(1)), EMPTY))
        assert list(result) == [OpAction.L, OpAction.R]
        assert result[OpAction.R].states() == [Running(Tick(1), EMPTY)]

    def test_conditional_and_loop(self):
        ite = Ite(BoolLit(False), Skip(), Tick(1))
        assert step(Running(ite, EMPTY))[OpAction.N].states() == [Running(Tick(1), EMPTY)]
        loop = While(BoolLit(True), Skip())
        assert step(Running(loop, EMPTY))[OpAction.N].states() == [Running(Seq(Skip(), loop), EMPTY)]
        done = While(BoolLit(False), Skip())
        assert step(Running(done, EMPTY))[OpAction.N].states() == [Terminated(EMPTY)]

    def test_not_a_configuration(self):
        with pytest.raises(SyntaxTreeError):
            step("s0")  # type: ignore[arg-type]


class TestRewards:
    def test_tick_reward_at_head(self):
        assert rew_pgcl(Running(Seq(Tick(3), Skip()), EMPTY)) == ExtValue.of(3)
        assert rew_pgcl(Running(Skip(), EMPTY)) == ZERO
        assert rew_pgcl(SINK) == ZERO

    def test_torew_reads_post_on_termination(self):
        reward = torew(var("y"))
        assert reward(Terminated(ProgramState.of({"y": 4}))) == ExtValue.of(4)
        assert reward(Running(Tick(INFINITY), EMPTY)) == INFINITY
        assert reward(SINK) == ZERO


class TestOperationalMdp:
    def test_equal_configurations_are_one_state(self, models_dir):
        program = parse_program((models_dir / "tick_or_flip.pgcl").read_text())
        mdp = operational_mdp()
        start = Running(program, EMPTY)
        mdp.enabled_actions(start)
        mdp.enabled_actions(Running(parse_program((models_dir / "tick_or_flip.pgcl").read_text()), EMPTY))
        assert mdp.materialized_states == 1

    def test_labels(self):
        assert config_label(Terminated(ProgramState.of({"x": 1})), ("y",)) == "term | x=1, y=0"
        assert config_label(SINK) == "bot"


class TestFragment:
    def test_golden_fragment(self, models_dir, golden_dir):
        program = parse_program((models_dir / "tick_or_flip.pgcl").read_text())
        fragment = dump_fragment(program, parse_state("x=0,y=0"), 6)
        expected = (golden_dir / "running_example_fragment.txt").read_text()
        assert fragment.render() == expected

    def test_depth_zero(self, models_dir):
        program = parse_program((models_dir / "tick_or_flip.pgcl").read_text())
        fragment = dump_fragment(program, EMPTY, 0)
        assert len(fragment.nodes) == 1
        assert fragment.edges == []

    def test_selected_variables(self):
        program = Assign("x", Var("y"))
        fragment = dump_fragment(program, EMPTY, 1, variables=["y"])
        assert fragment.labels() == ["x := y | y=0", "term | y=0"]
        assert fragment.index_of(Terminated(EMPTY)) == 1

    def test_negative_depth(self):
        with pytest.raises(SyntaxTreeError):
            dump_fragment(Skip(), EMPTY, -1)
