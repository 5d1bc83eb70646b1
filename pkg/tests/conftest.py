"""Shared fixtures and hypothesis strategies."""

import os
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Tuple

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from expected_rewards.core.extreal import INFINITY, ExtValue
from expected_rewards.core.mdp import Distribution, ExplicitMdp, RewardFn
from expected_rewards.infrastructure.config import AppConfig, EngineConfig, InputConfig, LoggingConfig
from expected_rewards.lang.syntax import (
    Add,
    Assign,
    Cmp,
    Ite,
    Monus,
    NondetChoice,
    Num,
    ProbChoice,
    ProgramState,
    Seq,
    Skip,
    Tick,
    Var,
)

settings.register_profile("ci", max_examples=500, deadline=None)
settings.register_profile(
    "dev", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

REPO_ROOT = Path(__file__).resolve().parent.parent
MODELS = REPO_ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"

ACTIONS = ("a", "b")
VARIABLES = ("x", "y")


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture
def test_config(tmp_path: Path) -> AppConfig:
    return AppConfig(
        engine=EngineConfig(max_nodes=200_000, max_schedulers=100_000, default_steps=40),
        logging=LoggingConfig(level="DEBUG", log_directory=tmp_path / "logs"),
        input=InputConfig(max_input_length=1_000_000, max_file_size_mb=5),
    )


@pytest.fixture
def coin_mdp() -> Tuple[ExplicitMdp, RewardFn]:
    """s0 either stops with reward 3 (a) or loops on a fair coin collecting 1 per round (b)."""
    half = Fraction(1, 2)
    mdp = ExplicitMdp(
        ["s0", "stop", "done"],
        ["a", "b"],
        {
            ("s0", "a"): Distribution.dirac("stop"),
            ("s0", "b"): Distribution((("s0", half), ("done", half))),
            ("stop", "a"): Distribution.dirac("done"),
            ("done", "a"): Distribution.dirac("done"),
        },
    )
    reward = RewardFn({"s0": ExtValue.of(1), "stop": ExtValue.of(3)})
    return mdp, reward


# Strategies

small_rationals = st.builds(
    Fraction, st.integers(min_value=0, max_value=6), st.integers(min_value=1, max_value=4)
)

ext_values = st.one_of(small_rationals.map(ExtValue), st.just(INFINITY))

finite_ext_values = small_rationals.map(ExtValue)

probabilities = st.sampled_from(
    [Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1)]
)


@st.composite
def explicit_mdps(draw, max_states: int = 4, allow_infinite: bool = False):
    """Random ExplicitMdp with at most two actions and supports of size one or two."""
    count = draw(st.integers(min_value=1, max_value=max_states))
    states = [f"s{i}" for i in range(count)]
    transitions: Dict[Tuple[str, str], Distribution] = {}
    for state in states:
        enabled = draw(st.lists(st.sampled_from(ACTIONS), min_size=1, max_size=2, unique=True))
        for action in enabled:
            first = draw(st.sampled_from(states))
            second = draw(st.sampled_from(states))
            p = draw(st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 3)]))
            transitions[(state, action)] = Distribution.from_pairs([(first, p), (second, 1 - p)])
    values = ext_values if allow_infinite else finite_ext_values
    rewards = {s: draw(values) for s in states}
    return ExplicitMdp(states, ACTIONS, transitions), RewardFn(rewards), states


program_states = st.builds(
    lambda x, y: ProgramState.of({"x": x, "y": y}),
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=0, max_value=3),
)

_aexprs = st.one_of(
    st.sampled_from(VARIABLES).map(Var),
    st.integers(min_value=0, max_value=3).map(Num),
)
aexprs = st.recursive(
    _aexprs,
    lambda inner: st.one_of(st.builds(Add, inner, inner), st.builds(Monus, inner, inner)),
    max_leaves=4,
)

guards = st.builds(Cmp, st.sampled_from(["=", "<", ">="]), aexprs, aexprs)

_atomic_statements = st.one_of(
    st.just(Skip()),
    st.builds(Assign, st.sampled_from(VARIABLES), aexprs),
    st.integers(min_value=0, max_value=3).map(lambda n: Tick(ExtValue.of(n))),
)


def _compound(inner):
    return st.one_of(
        st.builds(Seq, inner, inner),
        st.builds(ProbChoice, inner, probabilities, inner),
        st.builds(NondetChoice, inner, inner),
        st.builds(Ite, guards, inner, inner),
    )


loop_free_programs = st.recursive(_atomic_statements, _compound, max_leaves=6)


def state_list(*pairs: Tuple[int, int]) -> List[ProgramState]:
    return [ProgramState.of({"x": x, "y": y}) for x, y in pairs]
