"""Run configuration: a versioned JSON document with documented defaults.

Layout (every section optional, unknown keys rejected)::

    {
      "schema_version": 1,
      "model": {"name": "gauss_gauss", "params": {"a": 1.0}},
      "mode": "auto",
      "seed": 20240601,
      "quadrature": {"abs_tol": 1e-10, "rel_tol": 1e-8, "max_subdivisions": 2000, "gauss_nodes": 64},
      "foed_curve": {"times": [0.5, 1.0], "points": [-1.0, 0.0, 1.0]},
      "fdd": {"grid": [1.0, 2.0], "initial": {"name": "constant"},
              "functions": [{"name": "indicator", "params": {"c": 0.0}}, ...],
              "method": "backward_bivariate", "mc_samples": 1000000},
      "conditional": {"grid": [1.0], "s": 1.0, "w": 2.0, "initial": {...}, "functions": [...],
                      "method": "bridge"},
      "kolmogorov": {"t": 1.0, "grid_points": 4096, "csv": null},
      "verify": {"models": [{"name": ..., "params": {...}}], "groups": [...], "mc_samples": 1000000}
    }

Functions are named entries of the closed catalog in :mod:`foed_lab.functions`.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .functions import TestFunction, make_function
from .quadrature import QuadratureConfig

SCHEMA_VERSION = 1

FDD_METHODS = {
    "backward_nested": "backward_nested", "nested": "backward_nested",
    "backward_bivariate": "backward_bivariate", "bivariate": "backward_bivariate",
    "degenerate_xindi": "degenerate_xindi", "xindi": "degenerate_xindi",
    "forward": "forward", "monte_carlo": "monte_carlo", "mc": "monte_carlo",
}
CONDITIONAL_METHODS = ("bridge", "increment_form", "lemma52_form")

_F = {"name": "constant", "params": {}}

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "model": {"name": "gauss_gauss", "params": {"a": 1.0}},
    "mode": "auto",
    "seed": 20240601,
    "quadrature": {"abs_tol": 1e-10, "rel_tol": 1e-8, "max_subdivisions": 2000, "gauss_nodes": 64},
    "foed_curve": {"times": [0.5, 1.0], "points": [-1.0, 0.0, 1.0]},
    "fdd": {
        "grid": [1.0, 2.0],
        "initial": _F,
        "functions": [{"name": "indicator", "params": {"c": 0.0}}, {"name": "indicator", "params": {"c": 0.0}}],
        "method": "backward_bivariate",
        "mc_samples": 1_000_000,
    },
    "conditional": {
        "grid": [1.0],
        "s": 1.0,
        "w": 2.0,
        "initial": _F,
        "functions": [{"name": "linear", "params": {}}],
        "method": "bridge",
    },
    "kolmogorov": {"t": 1.0, "grid_points": 4096, "csv": None},
    "verify": {
        "models": [
            {"name": "gauss_gauss", "params": {"a": 1.0}},
            {"name": "ou_shift", "params": {"a": 1.0, "lambda": 0.5, "y0": 0.0}},
        ],
        "groups": None,
        "mc_samples": 1_000_000,
    },
}


def _merge(base: dict, update: Mapping) -> dict:
    # top-level sections are merged key by key; values inside a section
    # (parameter maps, function entries, lists) are replaced whole
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown key {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"{key!r} must be an object")
            for sub, v in value.items():
                if sub not in base[key]:
                    raise ConfigError(f"unknown key {key + '.' + sub!r}")
                out[key][sub] = copy.deepcopy(v)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_document(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: the top level must be an object")
    return doc


def resolve(document: Mapping | None = None) -> dict:
    """Defaults overlaid with ``document``; rejects unknown keys and other schema versions."""
    document = dict(document or {})
    version = document.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    model = document.get("model")
    if isinstance(model, Mapping) and "name" in model and "params" not in model:
        # another model does not inherit the default parameters
        document["model"] = {**model, "params": {}}
    return _merge(DEFAULTS, document)


def quadrature_config(cfg: Mapping) -> QuadratureConfig:
    q = cfg["quadrature"]
    try:
        return QuadratureConfig(abs_tol=float(q["abs_tol"]), rel_tol=float(q["rel_tol"]),
                                max_subdivisions=int(q["max_subdivisions"]), gauss_nodes=int(q["gauss_nodes"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature settings: {exc}") from None


def function_from(entry: Any, where: str) -> TestFunction:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, Mapping) or "name" not in entry:
        raise ConfigError(f"{where}: a function is an object with a 'name' and optional 'params'")
    extra = set(entry) - {"name", "params"}
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    params = entry.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError(f"{where}.params must be an object")
    return make_function(str(entry["name"]), params)


def functions_from(section: Mapping, where: str) -> tuple[TestFunction, list[TestFunction]]:
    """(f_0, [f_1, ..., f_n]) of a query section."""
    entries = section["functions"]
    if not isinstance(entries, list):
        raise ConfigError(f"{where}.functions must be a list")
    f0 = function_from(section["initial"], f"{where}.initial")
    return f0, [function_from(e, f"{where}.functions[{i}]") for i, e in enumerate(entries)]


__all__ = [
    "CONDITIONAL_METHODS", "DEFAULTS", "FDD_METHODS", "SCHEMA_VERSION", "function_from", "functions_from",
    "load_document", "quadrature_config", "resolve",
]
