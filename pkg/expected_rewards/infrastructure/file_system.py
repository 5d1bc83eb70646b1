"""File operations with validation: bounded reads of inputs, atomic report writes."""

import json
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from expected_rewards.security.validation import (
    ValidationError,
    sanitize_file_path,
    validate_file_extension,
    validate_file_size,
)

logger = logging.getLogger(__name__)


class FileSystemError(Exception):
    """Custom exception for file system operations."""

    pass


class SecureFileHandler:
    """Validated file access, optionally confined to a base directory."""

    def __init__(
        self,
        base_directory: Optional[Union[str, Path]] = None,
        allowed_extensions: Iterable[str] = (".txt", ".json"),
        max_file_size_mb: int = 50,
    ) -> None:
        self.base_directory = (
            Path(sanitize_file_path(str(base_directory))).resolve()
            if base_directory is not None
            else None
        )
        self.allowed_extensions = tuple(allowed_extensions)
        self.max_file_size_mb = max_file_size_mb

    def _validate_file_path(self, file_path: Union[str, Path]) -> Path:
        try:
            path = Path(sanitize_file_path(str(file_path)))
            if self.base_directory is not None:
                if not path.is_absolute():
                    path = self.base_directory / path
                try:
                    path.resolve().relative_to(self.base_directory)
                except ValueError as e:
                    raise ValidationError(f"File path outside base directory: {path}") from e
            validate_file_extension(str(path), self.allowed_extensions)
            return path
        except ValidationError as e:
            logger.error(f"File path validation failed for {file_path}: {e}")
            raise FileSystemError(f"Invalid file path: {e}") from e

    def read_text(self, file_path: Union[str, Path], encoding: str = "utf-8") -> str:
        """Read a UTF-8 input file after path, extension and size checks."""
        path = self._validate_file_path(file_path)
        try:
            validate_file_size(path, self.max_file_size_mb)
            content = path.read_text(encoding=encoding)
        except ValidationError as e:
            raise FileSystemError(str(e)) from e
        except (OSError, UnicodeDecodeError) as e:
            logger.error(f"Failed to read {file_path}: {e}")
            raise FileSystemError(f"Failed to read {file_path}: {e}") from e
        logger.debug(f"Read {len(content)} characters from {path}")
        return content

    def write_text(self, file_path: Union[str, Path], content: str, encoding: str = "utf-8") -> Path:
        """Write through a temporary file in the target directory, then move into place."""
        path = self._validate_file_path(file_path)
        temp_file: Optional[Path] = None
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile(
                mode="w",
                encoding=encoding,
                dir=path.parent,
                prefix=f".tmp_{path.stem}_",
                suffix=path.suffix,
                delete=False,
            ) as tf:
                tf.write(content)
                tf.flush()
                temp_file = Path(tf.name)
            shutil.move(str(temp_file), str(path))
        except OSError as e:
            if temp_file is not None and temp_file.exists():
                try:
                    temp_file.unlink()
                except OSError:
                    pass
            logger.error(f"Failed to write text to {file_path}: {e}")
            raise FileSystemError(f"Failed to write {file_path}: {e}") from e

        logger.info(f"Wrote {path}")
        return path

    def write_json(self, file_path: Union[str, Path], data: Dict[str, Any]) -> Path:
        if not isinstance(data, dict):
            raise FileSystemError("JSON payload must be an object")
        return self.write_text(file_path, json.dumps(data, indent=2, ensure_ascii=False) + "\n")


def create_secure_file_handler(
    base_directory: Optional[Union[str, Path]] = None,
    allowed_extensions: Iterable[str] = (".txt", ".json"),
    max_file_size_mb: int = 50,
) -> SecureFileHandler:
    return SecureFileHandler(base_directory, allowed_extensions, max_file_size_mb)
