"""Configuration management with validation."""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from expected_rewards.security.validation import ValidationError, sanitize_file_path

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def load_environment_file(env_file: Optional[Path] = None) -> Optional[Path]:
    """Load a .env file from the current or parent directory; returns the file used."""
    candidates = [env_file] if env_file is not None else [Path(".env"), Path("../.env")]
    for candidate in candidates:
        if candidate.exists():
            load_dotenv(candidate)
            logger.info(f"Loaded environment variables from {candidate.absolute()}")
            return candidate
    logger.debug("No .env file found")
    return None


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw.replace("_", ""))
    except ValueError as e:
        raise ValidationError(f"{name} must be an integer, got {raw!r}") from e


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class EngineConfig:
    """Resource limits and defaults of the fixed-point engine."""

    max_nodes: int = 2_000_000
    max_schedulers: int = 1_000_000
    default_steps: int = 200
    divergence_threshold: int = 1000

    def __post_init__(self) -> None:
        if self.max_nodes <= 0:
            raise ValidationError("max_nodes must be positive")
        if self.max_schedulers <= 0:
            raise ValidationError("max_schedulers must be positive")
        if self.default_steps < 0:
            raise ValidationError("default_steps must be non-negative")
        if self.divergence_threshold < 0:
            raise ValidationError("divergence_threshold must be non-negative")


@dataclass(frozen=True)
class LoggingConfig:
    """Logging configuration with file path validation."""

    level: str = "WARNING"
    log_directory: Path = field(default_factory=lambda: Path("logs"))
    file_prefix: str = "expected_rewards"
    max_file_size_mb: int = 10
    backup_count: int = 5
    file_logging: bool = False

    def __post_init__(self) -> None:
        level = str(self.level).upper()
        if level not in LOG_LEVELS:
            raise ValidationError(f"Invalid log level: {self.level}")
        object.__setattr__(self, "level", level)

        sanitized_path = sanitize_file_path(str(self.log_directory))
        object.__setattr__(self, "log_directory", Path(sanitized_path))

        if self.max_file_size_mb <= 0:
            raise ValidationError("max_file_size_mb must be positive")
        if self.backup_count < 0:
            raise ValidationError("backup_count must be non-negative")


@dataclass(frozen=True)
class InputConfig:
    """Limits on user-supplied files and strings."""

    max_input_length: int = 100_000
    max_file_size_mb: int = 50
    enable_tracing: bool = False

    def __post_init__(self) -> None:
        if self.max_input_length <= 0:
            raise ValidationError("max_input_length must be positive")
        if self.max_file_size_mb <= 0:
            raise ValidationError("max_file_size_mb must be positive")


@dataclass(frozen=True)
class AppConfig:
    """Application configuration."""

    engine: EngineConfig = field(default_factory=EngineConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    input: InputConfig = field(default_factory=InputConfig)

    @classmethod
    def from_environment(cls, env_file: Optional[Path] = None) -> "AppConfig":
        """Build a configuration from a .env file and environment variables."""
        load_environment_file(env_file)
        try:
            engine = EngineConfig(
                max_nodes=_env_int("EXPECTED_REWARDS_MAX_NODES", 2_000_000),
                max_schedulers=_env_int("EXPECTED_REWARDS_MAX_SCHEDULERS", 1_000_000),
                default_steps=_env_int("EXPECTED_REWARDS_DEFAULT_STEPS", 200),
                divergence_threshold=_env_int("EXPECTED_REWARDS_DIVERGENCE_THRESHOLD", 1000),
            )
            logging_config = LoggingConfig(
                level=os.getenv("LOG_LEVEL", "WARNING"),
                log_directory=Path(os.getenv("LOG_DIRECTORY", "logs")),
                max_file_size_mb=_env_int("MAX_LOG_FILE_SIZE_MB", 10),
                backup_count=_env_int("LOG_BACKUP_COUNT", 5),
                file_logging=_env_bool("LOG_TO_FILE", False),
            )
            input_config = InputConfig(
                max_input_length=_env_int("MAX_INPUT_LENGTH", 100_000),
                max_file_size_mb=_env_int("MAX_FILE_SIZE_MB", 50),
                enable_tracing=_env_bool("ENABLE_TRACING", False),
            )
        except ValidationError as e:
            logger.error(f"Configuration error: {e}")
            raise
        return cls(engine=engine, logging=logging_config, input=input_config)

    @classmethod
    def from_file(cls, config_path: Path) -> "AppConfig":
        """Load configuration sections from a JSON object; missing sections use defaults."""
        config_file = Path(sanitize_file_path(str(config_path)))
        if not config_file.is_file():
            raise ValidationError(f"Configuration file not found: {config_file}")

        try:
            with open(config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Failed to load configuration from {config_path}: {e}")
            raise ValidationError(f"Invalid configuration JSON: {e}") from e

        if not isinstance(data, dict):
            raise ValidationError("Configuration file must contain a JSON object")
        unknown = set(data) - {"engine", "logging", "input"}
        if unknown:
            raise ValidationError(f"Unknown configuration sections: {sorted(unknown)}")

        try:
            logging_data = dict(data.get("logging", {}))
            if "log_directory" in logging_data:
                logging_data["log_directory"] = Path(logging_data["log_directory"])
            return cls(
                engine=EngineConfig(**data.get("engine", {})),
                logging=LoggingConfig(**logging_data),
                input=InputConfig(**data.get("input", {})),
            )
        except TypeError as e:
            logger.error(f"Failed to load configuration from {config_path}: {e}")
            raise ValidationError(f"Invalid configuration field: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "engine": {
                "max_nodes": self.engine.max_nodes,
                "max_schedulers": self.engine.max_schedulers,
                "default_steps": self.engine.default_steps,
                "divergence_threshold": self.engine.divergence_threshold,
            },
            "logging": {
                "level": self.logging.level,
                "log_directory": str(self.logging.log_directory),
                "file_prefix": self.logging.file_prefix,
                "max_file_size_mb": self.logging.max_file_size_mb,
                "backup_count": self.logging.backup_count,
                "file_logging": self.logging.file_logging,
            },
            "input": {
                "max_input_length": self.input.max_input_length,
                "max_file_size_mb": self.input.max_file_size_mb,
                "enable_tracing": self.input.enable_tracing,
            },
        }

    def validate(self) -> None:
        """Cross-section checks; per-field checks run in ``__post_init__``."""
        directory = self.logging.log_directory
        if directory.exists() and not directory.is_dir():
            raise ValidationError(f"Log directory is not a directory: {directory}")
        logger.debug("Configuration validation passed")


def get_default_config() -> AppConfig:
    """Configuration from the environment."""
    return AppConfig.from_environment()
