"""pGCL: syntax, parser, operational semantics and weakest preexpectations."""

from expected_rewards.lang.parser import (
    PgclSyntaxError,
    parse_expectation,
    parse_program,
    parse_state,
)
from expected_rewards.lang.syntax import PgclStmt, ProgramState
from expected_rewards.lang.wp import WpMode, op_wp, soundness_check, wp

__all__ = [
    "PgclStmt",
    "PgclSyntaxError",
    "ProgramState",
    "WpMode",
    "op_wp",
    "parse_expectation",
    "parse_program",
    "parse_state",
    "soundness_check",
    "wp",
]
