"""Input validation."""

from expected_rewards.security.validation import ValidationError, sanitize_file_path

__all__ = ["ValidationError", "sanitize_file_path"]
