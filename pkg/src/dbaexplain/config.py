"""Run configuration: layered defaults checked against a JSON schema.

A run configuration is a plain JSON object.  Resolution order is defaults,
then a config file, then command-line overrides; the fully resolved object
is what gets validated and echoed into every output.
"""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

CONFIG_SCHEMA_VERSION = "1.0"

DEFAULTS: dict[str, Any] = {
    "schema_version": CONFIG_SCHEMA_VERSION,
    "methods": ["dba-tab"],
    "seed": 0,
    "jobs": 1,
    "output_dir": None,
    "standardize": True,
    "dataset": {"kind": "airis-tab"},
    "classifier": {"kind": "ground-truth"},
    "codec": {"kind": "identity"},
    "annotators": {"kind": "coordinate"},
    "dba": {"k": 1000, "m": 500, "r_grid": "default", "tol": 1e-4, "max_iter": 60, "gamma_offset": 0.1},
    "lime": {"m": 500, "sigma": None},
    "evaluation": {
        "points": 50,
        "indices": None,
        "max_factor": 8.0,
        "label_stable_only": False,
        "curve_step": 0.05,
    },
}

# defaults that only make sense for one ``kind`` of a tagged section
KIND_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "dataset": {
        "airis-tab": {"n_train": 4000, "n_test": 2000},
        "moons": {"n": 1000, "noise": 0.15, "n_train": 600},
        "csv": {"test": None, "label_column": "label"},
    },
    "classifier": {
        "kernel-smoother": {"bandwidth": 0.3},
        "knn": {"k": 5},
        "linear": {"b": 0.0},
        "scored-csv": {"column": "p"},
    },
    "codec": {"affine": {"n_components": None}},
    "annotators": {"coordinate": {"scale": 1.0}, "trained": {"lambda": 0.1}},
}


class ConfigError(ValueError):
    pass


def load_schema(name: str = "run_config") -> dict[str, Any]:
    path = resources.files("dbaexplain").joinpath("schemas").joinpath(f"{name}.schema.json")
    return json.loads(path.read_text(encoding="utf-8"))


def validate_config(config: dict[str, Any]) -> None:
    """Raise :class:`ConfigError` naming the offending key if ``config`` is invalid."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid run config at {where}: {err.message}")


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in KIND_DEFAULTS and isinstance(value, dict):
            # a tagged section with a new kind replaces the old one wholesale
            prev = out.get(key) or {}
            if value.get("kind", prev.get("kind")) != prev.get("kind"):
                out[key] = copy.deepcopy(value)
            else:
                out[key] = {**prev, **copy.deepcopy(value)}
        elif isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _fill_kind_defaults(config: dict[str, Any]) -> dict[str, Any]:
    for section, table in KIND_DEFAULTS.items():
        value = config.get(section)
        if isinstance(value, dict):
            config[section] = {**table.get(value.get("kind"), {}), **value}
    return config


def resolve_config(*layers: dict[str, Any] | None) -> dict[str, Any]:
    """Merge ``layers`` (later wins) over :data:`DEFAULTS` and validate.

    Unknown keys in any layer are rejected by the schema.
    """
    config = copy.deepcopy(DEFAULTS)
    for layer in layers:
        if layer:
            config = _merge(config, layer)
    config = _fill_kind_defaults(config)
    validate_config(config)
    return config


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        with Path(path).open(encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: a run config must be a JSON object")
    return data
