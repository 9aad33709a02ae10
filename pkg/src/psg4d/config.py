"""Layered runtime configuration: defaults < file < environment < flags.

Environment variables use the PSG4D_ prefix with section and key joined
by underscores (PSG4D_BACKEND_ENDPOINT, PSG4D_MATCHING_VIOU). Unknown
keys in a config file are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

__all__ = ["ConfigError", "DEFAULTS", "load_config", "Config"]

ENV_PREFIX = "PSG4D_"

DEFAULTS: dict[str, dict] = {
    "backend": {
        "endpoint": "",
        "token": "",
        "timeout": 30.0,
        "retries": 3,
        "backoff": 0.5,
        "max_tokens": 1024,
        "temperature": 0.0,
        "examples": 1,
    },
    "matching": {
        "viou": 0.5,
        "temporal_iou": 0.0,
        "ks": [20, 50, 100],
        "grounded": True,
    },
    "training": {
        "seed": 0,
    },
    "synthesis": {
        "seed": 0,
        "videos": 4,
        "label_noise": 0.0,
        "mask_jitter": 0.0,
        "span_jitter": 0.0,
        "spurious_rate": 0.0,
    },
}


class ConfigError(ValueError):
    """Unknown key, unreadable file, or unparseable value."""


def _coerce(example, raw: str):
    if isinstance(example, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(example, int) and not isinstance(example, bool):
        return int(raw)
    if isinstance(example, float):
        return float(raw)
    if isinstance(example, list):
        return [int(part) for part in raw.split(",") if part.strip()]
    return raw


class Config:
    """Resolved settings; see DEFAULTS for the full key space."""

    def __init__(self, values: dict[str, dict]):
        self._values = values

    def get(self, section: str, key: str):
        try:
            return self._values[section][key]
        except KeyError as exc:
            raise ConfigError(f"unknown setting {section}.{key}") from exc

    def section(self, name: str) -> dict:
        if name not in self._values:
            raise ConfigError(f"unknown section {name!r}")
        return dict(self._values[name])


def load_config(path: str | Path | None = None,
                environ: dict[str, str] | None = None) -> Config:
    """Resolve defaults, then the optional file, then the environment."""
    values = {section: dict(entries) for section, entries in DEFAULTS.items()}

    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold an object")
        for section, entries in raw.items():
            if section not in values:
                raise ConfigError(f"config file {path}: unknown section {section!r}")
            if not isinstance(entries, dict):
                raise ConfigError(f"config file {path}: section {section!r} must be an object")
            for key, value in entries.items():
                if key not in values[section]:
                    raise ConfigError(f"config file {path}: unknown key {section}.{key}")
                values[section][key] = value

    environ = os.environ if environ is None else environ
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        remainder = name[len(ENV_PREFIX):].lower()
        for section, entries in values.items():
            prefix = section + "_"
            if remainder.startswith(prefix) and remainder[len(prefix):] in entries:
                key = remainder[len(prefix):]
                try:
                    entries[key] = _coerce(DEFAULTS[section][key], raw)
                except (ValueError, ConfigError) as exc:
                    raise ConfigError(f"environment variable {name}: {exc}") from exc
                break

    return Config(values)
