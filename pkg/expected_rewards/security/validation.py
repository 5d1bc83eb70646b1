"""Input validation for file paths, sizes and command-line values."""

import logging
import re
from pathlib import Path
from typing import Iterable, Tuple, Union

logger = logging.getLogger(__name__)

MODEL_EXTENSIONS: Tuple[str, ...] = (".mdp", ".txt")
PROGRAM_EXTENSIONS: Tuple[str, ...] = (".pgcl", ".txt")
VALUE_EXTENSIONS: Tuple[str, ...] = (".val", ".txt")
REPORT_EXTENSIONS: Tuple[str, ...] = (".txt", ".json", ".report")
CONFIG_EXTENSIONS: Tuple[str, ...] = (".json",)

_FORBIDDEN_PREFIXES = ("/etc", "/proc", "/sys", "/dev", "C:\\Windows")
_IDENTIFIER = re.compile(r"^[a-zA-Z_][a-zA-Z0-9_]*$")
_STATE_NAME = re.compile(r"^[^\s#]+$")


class ValidationError(Exception):
    """Malformed user input."""

    pass


def sanitize_file_path(file_path: str) -> str:
    """Normalize a path and reject traversal segments and system directories."""
    if not file_path or not isinstance(file_path, str):
        raise ValidationError("File path must be a non-empty string")

    path = Path(file_path)
    if ".." in path.parts:
        raise ValidationError(f"File path contains directory traversal: {file_path}")

    try:
        normalized = str(path.resolve()) if path.is_absolute() else str(Path(path.as_posix()))
    except (OSError, ValueError) as e:
        raise ValidationError(f"Invalid file path: {e}") from e

    if Path(normalized).is_absolute():
        for prefix in _FORBIDDEN_PREFIXES:
            if normalized == prefix or normalized.startswith(prefix.rstrip("/") + "/"):
                raise ValidationError(f"Access to system directory not allowed: {prefix}")

    return normalized


def validate_file_extension(file_path: str, allowed_extensions: Iterable[str]) -> None:
    allowed = tuple(allowed_extensions)
    extension = Path(file_path).suffix.lower()
    if extension not in allowed:
        raise ValidationError(f"File extension '{extension}' not allowed. Allowed: {allowed}")


def validate_file_size(file_path: Union[str, Path], max_size_mb: int = 50) -> None:
    """Reject missing files and files larger than ``max_size_mb``."""
    try:
        path = Path(file_path)
        if not path.is_file():
            raise ValidationError(f"File does not exist: {file_path}")
        size_mb = path.stat().st_size / (1024 * 1024)
    except OSError as e:
        raise ValidationError(f"Error checking file size: {e}") from e

    if size_mb > max_size_mb:
        raise ValidationError(f"File size ({size_mb:.2f} MB) exceeds maximum ({max_size_mb} MB)")


def validate_input_length(text: str, max_length: int, what: str = "Input") -> str:
    if not isinstance(text, str):
        raise ValidationError(f"{what} must be a string")
    if len(text) > max_length:
        raise ValidationError(f"{what} cannot exceed {max_length} characters")
    return text


def validate_identifier(name: str) -> str:
    """Program variable names: ``[a-zA-Z_][a-zA-Z0-9_]*``."""
    if not isinstance(name, str) or not _IDENTIFIER.match(name):
        raise ValidationError(f"Invalid variable name: {name!r}")
    return name


def validate_state_name(name: str) -> str:
    """Model state names: non-empty, no whitespace, no comment marker."""
    if not isinstance(name, str) or not _STATE_NAME.match(name):
        raise ValidationError(f"Invalid state name: {name!r}")
    return name


def validate_step_count(value: int, what: str = "steps", minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{what} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{what} must be at least {minimum}, got {value}")
    return value
