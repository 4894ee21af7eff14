"""
Process-level configuration read from environment variables, and the helper that turns
pydantic validation failures into ``ConfigError``.
"""

import logging
import os
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from .errors import ConfigError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

# Largest L accepted by the exact engine (the convolution is O(L^2))
MAX_LEVELS = 100_000

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_int(name: str, default: int) -> int:
    """Get an integer environment variable or raise ConfigError."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        message = f"environment variable must be an integer, got {raw!r}"
        raise ConfigError(message, field=name) from None


def max_workers() -> int:
    """Worker-thread cap for sweeps and simulation replications (``DAMCTL_THREADS``)."""
    limit = _env_int("DAMCTL_THREADS", os.cpu_count() or 1)
    if limit < 1:
        raise ConfigError(f"must be at least 1, got {limit}", field="DAMCTL_THREADS")
    return limit


def log_scaling_enabled() -> bool:
    """Whether busy-count tables rescale instead of overflowing (``DAMCTL_LOG_SCALING``)."""
    return _env_int("DAMCTL_LOG_SCALING", 1) != 0


def log_level() -> str:
    """Root logging level for the CLI (``DAMCTL_LOG_LEVEL``)."""
    return os.getenv("DAMCTL_LOG_LEVEL", "WARNING").upper()


def validated(model_cls: type[ModelT], data: dict[str, Any]) -> ModelT:
    """Validate ``data`` into ``model_cls``, reporting the first failing field as ConfigError.

    Args:
        model_cls: Pydantic model class to build.
        data: Raw field values.

    Returns:
        The validated model instance.

    Raises:
        ConfigError: If validation fails.
    """
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or model_cls.__name__
        logger.debug(f"Validation of {model_cls.__name__} failed: {e}")
        raise ConfigError(first["msg"], field=field) from e
