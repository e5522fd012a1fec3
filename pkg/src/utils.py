"""Utility functions for treeirs: logging, canonical JSON, seeded randomness."""

import hashlib
import json
import logging
import sys
from fractions import Fraction
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


def setup_logging(log_dir: Path | None = None, debug: bool = False, level: str | None = None) -> logging.Logger:
    """
    Configure logging for the command line tool.

    Records always go to stderr so that reports on stdout stay byte-identical.

    Args:
        log_dir: Optional directory for a rotating log file
        debug: Enable debug level logging
        level: Explicit level name, overrides debug

    Returns:
        Configured root logger
    """
    if level:
        resolved = getattr(logging, level.upper(), logging.WARNING)
    else:
        resolved = logging.DEBUG if debug else logging.WARNING

    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATEFMT)

    root_logger = logging.getLogger()
    root_logger.setLevel(resolved)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(resolved)
    root_logger.addHandler(console_handler)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        # File handler with rotation (5MB max, keep 3 backups)
        file_handler = RotatingFileHandler(
            log_dir / "treeirs.log",
            maxBytes=5 * 1024 * 1024,
            backupCount=3,
            encoding="utf-8",
        )
        file_handler.setFormatter(formatter)
        file_handler.setLevel(logging.DEBUG if debug else logging.INFO)
        root_logger.addHandler(file_handler)

    return root_logger


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, np.integer):
        return int(value)
    if hasattr(value, "to_json"):
        return value.to_json()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def canonical_json(value: Any, indent: int | None = None) -> str:
    """JSON with sorted keys and fixed separators; identical input gives identical text."""
    separators = (",", ": ") if indent else (",", ":")
    return json.dumps(value, sort_keys=True, indent=indent, separators=separators, default=_default)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def stable_key(name: str) -> int:
    """A 32-bit integer derived from a name, independent of PYTHONHASHSEED."""
    return int(sha256_hex(name)[:8], 16)


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for (seed, keys...), e.g. a check name or a task index."""
    spawn_key = tuple(stable_key(k) if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn_key))


def parse_fraction(value: Any) -> Fraction:
    """Exact rational from an int, a "p/q" string or a decimal string."""
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ValueError(f"{value!r} is not a rational number") from e
