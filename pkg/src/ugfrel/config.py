from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib  # Python 3.11+
except Exception:  # pragma: no cover
    import tomli as tomllib  # type: ignore[no-redef]

DEFAULT_CONFIG_PATH = Path("~/.config/ugfrel/config.toml").expanduser()


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    v = os.getenv(name)
    if v is None or v == "":
        return default
    try:
        return int(float(v)) if "e" in v.lower() else int(v)
    except ValueError:
        return default


def _env_float(name: str, default: Optional[float]) -> Optional[float]:
    v = os.getenv(name)
    if v is None or v == "":
        return default
    try:
        return float(v)
    except ValueError:
        return default


def _env_str(name: str, default: Optional[str]) -> Optional[str]:
    v = os.getenv(name)
    if v is None or v == "":
        return default
    return v


DEFAULTS: Dict[str, Any] = {
    "algebra": {
        # like terms within rel_tol * max(1, value span) are merged
        "collect_rel_tol": 1e-9,
        # printed tables may sum this far from 1 before being rejected
        "table_mass_tolerance": 0.01,
    },
    "oracle": {
        "max_states": 100_000_000,
        "rel_tolerance": 1e-9,
        "workers": 1,
    },
    "monte_carlo": {
        "seed": 20240101,
        "batch_size": 200_000,
    },
    "output": {
        "format": "text",
    },
    "logging": {
        # empty: log to stderr
        "file": "",
    },
}

_ENV_KEYS = [
    ("UGFREL_COLLECT_REL_TOL", "algebra", "collect_rel_tol", _env_float),
    ("UGFREL_TABLE_MASS_TOLERANCE", "algebra", "table_mass_tolerance", _env_float),
    ("UGFREL_ORACLE_MAX_STATES", "oracle", "max_states", _env_int),
    ("UGFREL_ORACLE_REL_TOLERANCE", "oracle", "rel_tolerance", _env_float),
    ("UGFREL_WORKERS", "oracle", "workers", _env_int),
    ("UGFREL_MC_SEED", "monte_carlo", "seed", _env_int),
    ("UGFREL_FORMAT", "output", "format", _env_str),
    ("UGFREL_LOG_FILE", "logging", "file", _env_str),
]


def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    p = (path or DEFAULT_CONFIG_PATH).expanduser()
    if not p.exists():
        return {}
    with p.open("rb") as f:
        return tomllib.load(f)


def merge_dicts(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            out[k] = merge_dicts(base[k], v)  # type: ignore[index]
        else:
            out[k] = v
    return out


def apply_env(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in cfg.items()}
    for env, section, key, reader in _ENV_KEYS:
        v = reader(env, None)
        if v is not None:
            out.setdefault(section, {})[key] = v
    return out


def effective_config(config_path: Optional[Path]) -> Dict[str, Any]:
    cfg = merge_dicts(DEFAULTS, load_config_file(config_path))
    return apply_env(cfg)
