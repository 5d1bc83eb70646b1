"""Configuration, file access and model file formats."""

from expected_rewards.infrastructure.config import AppConfig, get_default_config
from expected_rewards.infrastructure.file_system import FileSystemError, SecureFileHandler
from expected_rewards.infrastructure.model_io import ModelFormatError, parse_model

__all__ = [
    "AppConfig",
    "FileSystemError",
    "ModelFormatError",
    "SecureFileHandler",
    "get_default_config",
    "parse_model",
]
