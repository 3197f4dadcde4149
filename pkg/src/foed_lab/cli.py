"""The ``foed-lab`` command line.

Every subcommand reads the resolved run configuration (defaults, then
``--config``, then the global flags) and writes one document to ``--out``
or standard output: CSV for ``foed-curve``, JSON for the rest.  Each JSON
document starts with ``schema_version`` and embeds the resolved config.
Exit codes: 0 on success, 1 when ``verify`` records a failing or erroring
row, 2 for configuration and domain errors.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import config as rc
from .bridge import FddResult, fdd_backward_nested, fdd_bivariate, fdd_degenerate_xindi
from .conditional import ConditionalQuery, conditional_product, conditional_psi
from .errors import ConfigError, FoedLabError
from .foed import foed_exponent, foed_rate, marginal_density
from .functions import is_constant_one
from .kolmogorov import kolmogorov_distance_foed, psi_fn
from .models import TimeGrid, build_model
from .oracle import fdd_forward, fdd_monte_carlo, gaussian_conditional_expectation
from .verify import VerifySettings, run_verification

CSV_HEADER = ("t", "x", "exponent", "rate", "marginal_density")
GAUSSIAN_MODELS = ("gauss_gauss", "ou_shift")


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

def sanitize(obj: Any) -> Any:
    """Plain JSON types; numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(sanitize(doc), indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _document(cfg: dict, command: str, result: dict) -> str:
    return dumps({"schema_version": rc.SCHEMA_VERSION, "command": command, "config": cfg, "result": result})


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _parse_param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise ConfigError(f"--param {key}: {value!r} is not a number") from None


def build_config(config_path, model, params, seed, tol_abs, tol_rel) -> dict:
    """Defaults, overlaid by the config file, overlaid by the flags."""
    doc = rc.load_document(config_path) if config_path else {}
    cfg = rc.resolve(doc)
    if model is not None and model != cfg["model"]["name"]:
        cfg["model"] = {"name": model, "params": {}}
    if params:
        cfg["model"]["params"] = {**cfg["model"]["params"], **dict(_parse_param(p) for p in params)}
    if seed is not None:
        cfg["seed"] = int(seed)
    if tol_abs is not None:
        cfg["quadrature"]["abs_tol"] = float(tol_abs)
    if tol_rel is not None:
        cfg["quadrature"]["rel_tol"] = float(tol_rel)
    return cfg


def _model(cfg):
    m = cfg["model"]
    return build_model(str(m["name"]), dict(m["params"]))


def _grid(values, where: str) -> TimeGrid:
    try:
        return TimeGrid([float(t) for t in values])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


# --------------------------------------------------------------------------
# runners (importable, used by the subcommands)
# --------------------------------------------------------------------------

def run_foed_curve(cfg: dict) -> str:
    """CSV with one row per (t, x) of the configured grid, t-major."""
    model, q, mode = _model(cfg), rc.quadrature_config(cfg), cfg["mode"]
    times = [float(t) for t in cfg["foed_curve"]["times"]]
    xs = [float(x) for x in cfg["foed_curve"]["points"]]
    if any(t < 0 for t in times):
        raise ConfigError("foed_curve.times must be nonnegative")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    if times and xs:
        x = np.asarray(xs)
        for t in times:
            e = np.atleast_1d(foed_exponent(model, t, x, q, mode))
            r = np.atleast_1d(foed_rate(model, t, x, q, mode))
            d = np.atleast_1d(marginal_density(model, t, x, q, mode))
            for row in zip(x, e, r, d):
                writer.writerow([repr(t)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def run_fdd(cfg: dict, method: str) -> dict:
    """The chosen route plus the forward chain rule and the gap between them."""
    sec = cfg["fdd"]
    model, q, mode = _model(cfg), rc.quadrature_config(cfg), cfg["mode"]
    grid = _grid(sec["grid"], "fdd.grid")
    f0, fs = rc.functions_from(sec, "fdd")
    if len(fs) != len(grid):
        raise ConfigError(f"fdd: {len(grid)} epochs need {len(grid)} functions, got {len(fs)}")
    method = rc.FDD_METHODS.get(method)
    if method is None:
        raise ConfigError(f"unknown fdd method; choose from {sorted(rc.FDD_METHODS)}")
    if method in ("backward_bivariate", "degenerate_xindi") and not is_constant_one(f0):
        raise ConfigError(f"the {method} formula has no initial factor; fdd.initial must be constant 1")
    full = [f0] + fs
    mc = None
    if method == "backward_nested":
        res = fdd_backward_nested(model, full, grid, q, mode)
    elif method == "backward_bivariate":
        res = fdd_bivariate(model, fs, grid, q, mode)
    elif method == "degenerate_xindi":
        res = fdd_degenerate_xindi(model, fs, grid, q, mode, opt_in=True, compare=False)
    elif method == "forward":
        res = FddResult(fdd_forward(model, full, grid, q), "forward", q.abs_tol)
    else:
        mc = fdd_monte_carlo(model, full, grid, int(sec["mc_samples"]), int(cfg["seed"]))
        res = FddResult(mc.mean, "monte_carlo", mc.std_error)
    out = res.to_dict()
    if method != "forward":
        forward = fdd_forward(model, full, grid, q)
        out["comparisons"]["forward"] = forward
        out["comparisons"]["gap"] = abs(res.value - forward)
    if mc is not None:
        out["monte_carlo"] = mc.to_dict()
    return out


def run_conditional(cfg: dict, method: str) -> dict:
    """Conditional expectation given X_T = w; Gaussian models get the oracle value."""
    sec = cfg["conditional"]
    if method not in rc.CONDITIONAL_METHODS:
        raise ConfigError(f"unknown conditional method; choose from {list(rc.CONDITIONAL_METHODS)}")
    model, q, mode = _model(cfg), rc.quadrature_config(cfg), cfg["mode"]
    grid = _grid(sec["grid"], "conditional.grid")
    f0, fs = rc.functions_from(sec, "conditional")
    if len(fs) != len(grid):
        raise ConfigError(f"conditional: {len(grid)} epochs need {len(grid)} functions, got {len(fs)}")
    try:
        query = ConditionalQuery(grid, float(sec["s"]), float(sec["w"]), [f0] + fs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"conditional: {exc}") from None
    if method == "bridge":
        value = conditional_product(model, query, q, mode)
    else:
        value = conditional_psi(model, query, method, q, mode)
    out = {"value": value, "variant": method, "horizon": query.horizon, "comparisons": {}}
    if model.name in GAUSSIAN_MODELS:
        oracle = gaussian_conditional_expectation(model, [f0] + fs, grid, query.s, query.w, q)
        out["comparisons"] = {"gaussian_oracle": oracle, "gap": abs(value - oracle)}
    return out


def run_kolmogorov(cfg: dict) -> tuple[dict, str | None]:
    """The distance report and, when ``kolmogorov.csv`` is set, the (x, psi) curve."""
    sec = cfg["kolmogorov"]
    model, q, mode = _model(cfg), rc.quadrature_config(cfg), cfg["mode"]
    t = float(sec["t"])
    rep = kolmogorov_distance_foed(model, t, q, mode, grid_points=int(sec["grid_points"]))
    curve = None
    if sec["csv"]:
        lo, hi = rep.bracket
        xs = np.linspace(lo, hi, int(sec["grid_points"]))
        psi = np.asarray(psi_fn(model, t, xs, q, mode))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("x", "psi"))
        writer.writerows((repr(float(x)), repr(float(p))) for x, p in zip(xs, psi))
        curve = buf.getvalue()
    return rep.to_dict(), curve


def verify_settings(cfg: dict) -> VerifySettings:
    sec = cfg["verify"]
    try:
        models = tuple((str(m["name"]), tuple(sorted(dict(m.get("params") or {}).items()))) for m in sec["models"])
    except (TypeError, KeyError, AttributeError):
        raise ConfigError("verify.models must be a list of {name, params} objects") from None
    for name, params in models:
        build_model(name, dict(params))  # reject bad models before the run
    kw = {}
    if sec["groups"] is not None:
        kw["groups"] = tuple(sec["groups"])
    try:
        return VerifySettings(models=models, mc_samples=int(sec["mc_samples"]), seed=int(cfg["seed"]),
                              cfg=rc.quadrature_config(cfg), **kw)
    except ValueError as exc:
        raise ConfigError(f"verify: {exc}") from None


def run_verify(cfg: dict) -> tuple[dict, bool]:
    """(ledger document body, failed)."""
    ledger = run_verification(verify_settings(cfg))
    return {"summary": ledger.summary(), "rows": ledger.rows}, ledger.failed


# --------------------------------------------------------------------------
# click front end
# --------------------------------------------------------------------------

def _guard(fn):
    try:
        return fn()
    except (FoedLabError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@click.group()
@click.option("--model", default=None, help="Model name (gauss_gauss, ou_shift, besq_shift).")
@click.option("--param", "params", multiple=True, metavar="K=V", help="Model parameter; repeatable.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON run configuration.")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Output file (default: stdout).")
@click.option("--seed", default=None, type=int, help="Monte Carlo seed.")
@click.option("--tol-abs", default=None, type=float, help="Absolute quadrature tolerance.")
@click.option("--tol-rel", default=None, type=float, help="Relative quadrature tolerance.")
@click.pass_context
def cli(ctx, model, params, config_path, out, seed, tol_abs, tol_rel):
    """Exponents of marginal evolution and the backward formulas built on them."""
    ctx.obj = {"out": out, "cfg": _guard(lambda: build_config(config_path, model, params, seed, tol_abs, tol_rel))}


@cli.command("foed-curve")
@click.pass_obj
def foed_curve_cmd(obj):
    """CSV of exponent, rate and marginal density over foed_curve.times x foed_curve.points."""
    _emit(_guard(lambda: run_foed_curve(obj["cfg"])), obj["out"])


@cli.command("fdd")
@click.option("--method", default=None, help="nested, bivariate, xindi, forward or mc (default: fdd.method).")
@click.pass_obj
def fdd_cmd(obj, method):
    """E f_0(X_0) f_1(X_t1) ... f_n(X_tn) for the query in the fdd section."""
    cfg = obj["cfg"]
    if method is not None:
        cfg["fdd"]["method"] = method
    result = _guard(lambda: run_fdd(cfg, cfg["fdd"]["method"]))
    _emit(_document(cfg, "fdd", result), obj["out"])


@cli.command("conditional")
@click.option("--method", default=None, type=click.Choice(rc.CONDITIONAL_METHODS),
              help="Evaluation route (default: conditional.method).")
@click.pass_obj
def conditional_cmd(obj, method):
    """E[f_0(X_0) f_1(X_t1) ... | X_T = w] for the query in the conditional section."""
    cfg = obj["cfg"]
    if method is not None:
        cfg["conditional"]["method"] = method
    result = _guard(lambda: run_conditional(cfg, cfg["conditional"]["method"]))
    _emit(_document(cfg, "conditional", result), obj["out"])


@cli.command("kolmogorov")
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False),
              help="Also write the (x, psi) curve here (overrides kolmogorov.csv).")
@click.pass_obj
def kolmogorov_cmd(obj, csv_path):
    """Kolmogorov distance between the law at time t and its Brownian comparator."""
    cfg = obj["cfg"]
    if csv_path is not None:
        cfg["kolmogorov"]["csv"] = csv_path
    result, curve = _guard(lambda: run_kolmogorov(cfg))
    if curve is not None:
        _guard(lambda: Path(cfg["kolmogorov"]["csv"]).write_text(curve))
    _emit(_document(cfg, "kolmogorov", result), obj["out"])


@cli.command("verify")
@click.option("--group", "groups", multiple=True, help="Restrict to these groups; repeatable.")
@click.pass_obj
def verify_cmd(obj, groups):
    """Run the identity battery and write the ledger; exit 1 if any row fails."""
    cfg = obj["cfg"]
    if groups:
        cfg["verify"]["groups"] = list(groups)
    body, failed = _guard(lambda: run_verify(cfg))
    _emit(_document(cfg, "verify", body), obj["out"])
    if failed:
        sys.exit(1)


def main(argv=None):
    cli.main(args=argv, prog_name="foed-lab")


__all__ = [
    "CSV_HEADER", "build_config", "cli", "dumps", "main", "run_conditional", "run_fdd", "run_foed_curve",
    "run_kolmogorov", "run_verify", "sanitize", "verify_settings",
]
