"""Experiment config files: flat `key = value` lines mirroring the long flag names.

    family = superellipsoid
    m = 4
    eps-sweep = 0.004 0.0001 6

Keys accept `-` or `_`; flags given on the command line override the file.
"""

import logging
import re
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic import ValidationError

from cli.schemas.experiment import ExperimentConfig
from physics.errors import ConfigError

logger = logging.getLogger(__name__)

TUPLE_KEYS = {"axes", "eps_sweep", "delta_sweep"}
FLAG_KEYS = {"oracle"}


def _normalize_key(key: str) -> str:
    return key.strip().lower().lstrip("-").replace("-", "_")


def _parse_value(key: str, raw: str | None) -> Any:
    if raw is None:
        return True if key in FLAG_KEYS else None
    raw = raw.strip()
    if key in TUPLE_KEYS:
        return tuple(part for part in re.split(r"[\s,]+", raw) if part)
    return raw


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a config file into a mapping keyed like `ExperimentConfig` fields.

    Raises:
        ConfigError: if the file is missing.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for key, raw in dotenv_values(path).items():
        name = _normalize_key(key)
        values[name] = _parse_value(name, raw)
    logger.info("Loaded %d settings from %s", len(values), path)
    return values


def merge_config(file_values: dict[str, Any], flag_values: dict[str, Any]) -> ExperimentConfig:
    """Validate the file values overlaid with every flag that was actually given.

    Raises:
        ConfigError: on unknown keys or invalid values.
    """
    merged = dict(file_values)
    merged.update({key: value for key, value in flag_values.items() if value is not None})
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as err:
        raise ConfigError(f"invalid experiment config:\n{err}") from err
