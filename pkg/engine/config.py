"""
NucleiGrind — Configuration layering and atomic JSON persistence.
Defaults live here; a user JSON file is deep-merged over them and each
section is turned into its frozen config dataclass.
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from typing import Any, Dict, Optional

from content.models import (
    BACKGROUND_NORM_GLOBAL_MAX,
    EncodingConfig,
    FixtureSpec,
    LossConfig,
    PostprocConfig,
)
from engine.errors import ConfigError

logger = logging.getLogger(__name__)


def _default_config() -> Dict[str, Any]:
    return {
        "encoding": {
            "dir_class_count": 8,
            "background_norm_cap": BACKGROUND_NORM_GLOBAL_MAX,
        },
        "loss": {
            "lambda1": 1.0,
            "lambda2": 1.0,
            "epsilon_ce": 1e-12,
            "epsilon_dice": 1e-6,
            "scale_blocks": [2, 3, 4],
        },
        "postproc": {
            "t_p": 0.05,
            "t_n": -0.05,
            "connectivity": 4,
            "min_instance_area": 0,
        },
        "fixtures": {
            "height": 64,
            "width": 64,
            "count": 5,
            "shape": "disk",
            "radius_min": 3,
            "radius_max": 8,
            "min_gap": 2,
            "seed": 0,
        },
    }


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deep merge 'override' into 'base'.
    For dicts: recurse. For everything else: override wins.
    Returns the merged dict (mutates base).
    """
    for key, value in override.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def _load_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config file is not a JSON object")
    return data


def _atomic_write_json(path: str, data: Dict[str, Any]) -> None:
    """Write JSON through a temp file in the target directory, then rename over path."""
    dir_path = os.path.dirname(os.path.abspath(path))
    fd, temp_path = tempfile.mkstemp(prefix=".nucleigrind_", suffix=".json", dir=dir_path)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
            f.write("\n")
            f.flush()
            try:
                os.fsync(f.fileno())
            except OSError:
                pass
        os.replace(temp_path, path)
    except (OSError, TypeError, ValueError):
        try:
            if os.path.exists(temp_path):
                os.remove(temp_path)
        except OSError:
            pass
        raise


class Settings:
    """Merged configuration with typed accessors for each section."""

    def __init__(self, data: Optional[Dict[str, Any]] = None):
        self.data = _default_config()
        if data:
            _deep_merge(self.data, data)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "Settings":
        if path is None:
            return cls()
        try:
            data = _load_json(path)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        logger.debug("Loaded config overrides from %s: %s", path, sorted(data))
        unknown = set(data) - set(_default_config())
        if unknown:
            logger.warning("Ignoring unknown config sections: %s", ", ".join(sorted(unknown)))
        return cls(data)

    def override(self, section: str, **values: Any) -> None:
        """Apply CLI flag values; None means 'flag not given'."""
        given = {k: v for k, v in values.items() if v is not None}
        if given:
            _deep_merge(self.data[section], given)

    def _build(self, cls, section):
        try:
            return cls(**self.data[section])
        except TypeError as e:
            raise ConfigError(f"config section '{section}': {e}") from e

    @property
    def encoding(self) -> EncodingConfig:
        return self._build(EncodingConfig, "encoding")

    @property
    def loss(self) -> LossConfig:
        section = dict(self.data["loss"])
        section["scale_blocks"] = tuple(section.get("scale_blocks", ()))
        try:
            return LossConfig(**section)
        except TypeError as e:
            raise ConfigError(f"config section 'loss': {e}") from e

    @property
    def postproc(self) -> PostprocConfig:
        return self._build(PostprocConfig, "postproc")

    @property
    def fixtures(self) -> FixtureSpec:
        return self._build(FixtureSpec, "fixtures")


def write_json_report(path: str, data: Dict[str, Any]) -> None:
    _atomic_write_json(path, data)
    logger.info("Report written to %s", path)
