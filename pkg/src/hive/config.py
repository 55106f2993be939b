"""Layered configuration: flags > environment > YAML file > defaults.

Keys are dotted names (``provider.url``). Paths may use the ``bundled:``
prefix to refer to data shipped inside the package, which keeps echoed
configurations identical across machines.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import HiveError

DATA_DIR = Path(__file__).resolve().parent / "data"
BUNDLED = "bundled:"

DEFAULTS: dict[str, Any] = {
    "provider.url": None,
    "provider.token": None,
    "provider.offline": None,  # resolved: offline unless a url is configured
    "provider.fixtures": "bundled:provider",
    "provider.fallback": True,
    "provider.timeout": 60.0,
    "provider.max_tokens": 512,
    "ckg.path": "bundled:ckg/muse.jsonl",
    "domains.path": "bundled:domains",
    "registry.path": "bundled:registry.json",
    "planner.max_width": 2,
    "planner.max_expansions": 1_000_000,
    "ground.max_actions": 100_000,
    "eval.err_as_zero": False,
    "eval.couple_fot": True,
}

ENV_KEYS = {
    "HIVE_PROVIDER_URL": "provider.url",
    "HIVE_PROVIDER_TOKEN": "provider.token",
    "HIVE_OFFLINE": "provider.offline",
}

_BOOL_KEYS = {"provider.offline", "provider.fallback", "eval.err_as_zero", "eval.couple_fot"}
_INT_KEYS = {"planner.max_width", "planner.max_expansions", "ground.max_actions", "provider.max_tokens"}
_FLOAT_KEYS = {"provider.timeout"}


class ConfigError(HiveError):
    pass


def resolve_path(value: str | Path) -> Path:
    s = str(value)
    if s.startswith(BUNDLED):
        return DATA_DIR / s[len(BUNDLED):]
    return Path(s).expanduser()


def _to_bool(key: str, v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {v!r}")


def _coerce(key: str, v):
    if v is None:
        return None
    try:
        if key in _BOOL_KEYS:
            return _to_bool(key, v)
        if key in _INT_KEYS:
            if isinstance(v, bool):
                raise ValueError
            return int(v)
        if key in _FLOAT_KEYS:
            return float(v)
    except ValueError:
        raise ConfigError(f"{key}: bad value {v!r}") from None
    return str(v)


def _flatten(data: Mapping, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in data.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def read_config_file(path: str | Path) -> dict[str, Any]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must be a mapping")
    flat = _flatten(data)
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return flat


@dataclass(frozen=True)
class Config:
    values: Mapping[str, Any]

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def offline(self) -> bool:
        return bool(self.values["provider.offline"])

    def path(self, key: str) -> Path:
        return resolve_path(self.values[key])

    def to_record(self) -> dict[str, Any]:
        """Effective configuration with secrets redacted."""
        rec = dict(sorted(self.values.items()))
        if rec.get("provider.token"):
            rec["provider.token"] = "***"
        return rec


def load_config(
    file: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    flags: Mapping[str, Any] | None = None,
) -> Config:
    env = os.environ if env is None else env
    values = dict(DEFAULTS)
    if file is not None:
        values.update(read_config_file(file))
    for var, key in ENV_KEYS.items():
        if env.get(var) not in (None, ""):
            values[key] = env[var]
    for key, v in (flags or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if v is not None:
            values[key] = v
    values = {k: _coerce(k, v) for k, v in values.items()}
    if values["provider.offline"] is None:
        values["provider.offline"] = values["provider.url"] is None
    if not values["provider.offline"] and not values["provider.url"]:
        raise ConfigError("online mode needs provider.url (or HIVE_PROVIDER_URL)")
    if values["planner.max_width"] not in (1, 2):
        raise ConfigError("planner.max_width must be 1 or 2")
    return Config(values)
