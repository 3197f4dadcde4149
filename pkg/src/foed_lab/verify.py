"""The identity battery behind ``foed-lab verify``.

Every row compares two independent evaluations of one identity and goes
into a :class:`VerificationLedger` in a fixed order.  Rows for identities
that are known not to hold as stated carry ``expect_gap`` and are reported
with status ``flag``; a failing computation becomes an ``error`` row and the
run continues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bridge import bridge_apply, fdd_backward_nested, fdd_bivariate, fdd_degenerate_xindi, kernel_triviality_probe
from .conditional import ConditionalQuery, check_lemma_rela, conditional_product, conditional_psi, tower_check
from .foed import (
    check_an_identity, check_generator_identity, check_semiflow, foed_rate, gauss_gauss_rate,
    gauss_gauss_rate_alternative, ln_f, log_foed_exponent, marginal_density, marginal_mass,
)
from .functions import constant, exp_neg_sq, indicator, linear
from .kolmogorov import kolmogorov_distance_foed
from .models import ProcessModel, build_model, make_gauss_gauss
from .oracle import (
    bivariate_orthant, correlation, fdd_forward, fdd_monte_carlo, gaussian_condition,
    gaussian_conditional_expectation, gaussian_joint,
)
from .quadrature import QuadratureConfig, derivative_fd
from .report import IdentityReport, VerificationLedger

GROUPS = (
    "construction", "normalization", "semiflow", "generator", "ladder", "rate_erratum", "bridge",
    "fdd", "degenerate", "conditional", "transition_ratio", "kolmogorov",
)

DEFAULT_MODELS = (
    ("gauss_gauss", {"a": 1.0}),
    ("ou_shift", {"a": 1.0, "lambda": 0.5, "y0": 0.0}),
)


# (model, parameters, functions, grid); the reductions need E(t, .) g to be
# integrable against the test functions, hence a = 2 for the indicators
FDD_BATTERY = (
    ("gauss_gauss", {"a": 2.0}, "indicator", (1.0, 2.0)),
    ("gauss_gauss", {"a": 2.0}, "indicator", (1.0, 2.0, 3.0)),
    ("gauss_gauss", {"a": 1.0}, "exp_neg_sq", (1.0, 2.0)),
    ("gauss_gauss", {"a": 1.0}, "exp_neg_sq", (1.0, 2.0, 3.0)),
    ("ou_shift", {"a": 1.0, "lambda": 0.5, "y0": 0.0}, "indicator", (1.0, 2.0)),
    ("ou_shift", {"a": 1.0, "lambda": 0.5, "y0": 0.0}, "indicator", (1.0, 2.0, 3.0)),
    ("ou_shift", {"a": 1.0, "lambda": 0.5, "y0": 0.0}, "exp_neg_sq", (1.0, 2.0)),
    ("ou_shift", {"a": 1.0, "lambda": 0.5, "y0": 0.0}, "exp_neg_sq", (1.0, 2.0, 3.0)),
)



@dataclass(frozen=True)
class VerifySettings:
    models: tuple = DEFAULT_MODELS
    groups: tuple[str, ...] = GROUPS
    fdd_battery: tuple = FDD_BATTERY
    mc_samples: int = 1_000_000
    seed: int = 20240601
    cfg: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        unknown = set(self.groups) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown verification groups: {sorted(unknown)}")


def _worst(name, anchor, lhs, rhs, tolerance, meta=None, relative=False) -> IdentityReport:
    lhs, rhs = np.ravel(lhs), np.ravel(rhs)
    gap = np.abs(lhs - rhs)
    if relative:
        gap = gap / np.maximum(np.abs(rhs), 1e-300)
    i = int(np.argmax(gap))
    meta = dict(meta or {})
    meta["points"] = int(lhs.size)
    if relative:
        meta["max_rel_err"] = float(gap[i])
        tolerance = tolerance * abs(float(rhs[i]))
    return IdentityReport(name, float(lhs[i]), float(rhs[i]), tolerance, anchor, meta=meta)


def _run(ledger: VerificationLedger, name: str, anchor: str, fn: Callable[[], Iterable[IdentityReport]]):
    try:
        for row in fn():
            ledger.add(row)
    except Exception as exc:  # recorded per row, the battery goes on
        ledger.add_error(name, anchor, f"{type(exc).__name__}: {exc}")


def _label(model: ProcessModel) -> str:
    return model.name + "(" + ", ".join(f"{k}={v:g}" for k, v in sorted(model.params.items())) + ")"


def _x_grid(model: ProcessModel, count: int, width: float = 2.0) -> np.ndarray:
    c, sd = model.marginal_moments(0.0)
    lo = c - width * sd
    if math.isfinite(model.domain.lower):
        lo = max(lo, model.domain.lower + 0.1 * sd)
    return np.linspace(lo, c + width * sd, count)


# --------------------------------------------------------------------------
# row groups
# --------------------------------------------------------------------------

def rows_construction(model, cfg):
    if not model.has_closed_form:
        return []
    ts = np.linspace(0.1, 3.0, 10)
    t, x = np.meshgrid(ts, _x_grid(model, 10), indexing="ij")
    quad = np.exp(log_foed_exponent(model, t, x, cfg, "quadrature"))
    closed = np.exp(log_foed_exponent(model, t, x, cfg, "closed_form"))
    return [_worst("exponent by quadrature vs closed form", "rate definition (eq:F)", quad, closed, 1e-7,
                   {"model": _label(model)}, relative=True)]


def rows_normalization(model, cfg):
    out = []
    for t in (0.1, 1.0, 10.0):
        out.append(IdentityReport("marginal mass", marginal_mass(model, t, cfg), 1.0, 1e-8, "consequence (cons)",
                                  meta={"model": _label(model), "t": t}))
    return out


def rows_semiflow(model, cfg):
    x = _x_grid(model, 21)
    out = []
    for s, t in ((0.5, 1.0), (1.0, 2.0)):
        r = check_semiflow(model, s, t, x, cfg)
        out.append(IdentityReport(r.name, r.lhs, r.rhs, r.tolerance, "semiflow (abscon)", meta=r.meta))
    return out


def rows_generator(model, cfg):
    if model.generator is None:
        return []
    f = exp_neg_sq()
    r = check_generator_identity(model, f, 1.0, cfg)
    out = [IdentityReport(r.name, r.lhs, r.rhs, 1e-5, "generator identity (AF)", meta=r.meta)]
    for n in (1, 2):
        r = check_an_identity(model, n, f, 1.0, cfg)
        out.append(IdentityReport(r.name, r.lhs, r.rhs, 1e-5, "ladder identity (AnLn)", meta=r.meta))
    return out


def ladder_gap(model: ProcessModel, ts: Sequence[float], xs: Sequence[float], cfg=None) -> IdentityReport:
    """L^1 F against half the relative curvature of the time-t density, on a grid."""
    lhs, rhs = [], []
    for t in ts:
        for x in xs:
            lhs.append(ln_f(model, 1, t, x, cfg))
            dens = float(marginal_density(model, t, x, cfg))
            curv = derivative_fd(lambda y: marginal_density(model, t, y, cfg), x, 2, h=1e-2, richardson=True)
            rhs.append(0.5 * float(curv) / dens)
    return _worst("L^1 F vs g''/(2g)", "Gauss-Gauss ladder (GGex)", lhs, rhs, 1e-5,
                  {"model": _label(model), "grid": f"{len(ts)}x{len(xs)}"})


def rows_ladder(model, cfg):
    if model.name != "gauss_gauss":
        return []
    return [ladder_gap(model, np.linspace(0.5, 2.5, 5), np.linspace(-2.0, 2.0, 5), cfg)]


def rows_rate_erratum(model, cfg):
    if model.name != "gauss_gauss":
        return []
    a = model.params["a"]
    t, z = np.meshgrid(np.linspace(0.5, 2.5, 5), np.linspace(-2.0, 2.0, 5), indexing="ij")
    fd = np.array([foed_rate(model, tv, zv, cfg) for tv, zv in zip(t.ravel(), z.ravel())])
    derived = gauss_gauss_rate(a, t, z).ravel()
    alt = gauss_gauss_rate_alternative(a, t, z).ravel()
    i = int(np.argmax(np.abs(alt - derived)))
    return [
        _worst("rate by differentiation vs closed form", "Gauss-Gauss rate (GG)", fd, derived, 1e-6,
               {"model": _label(model)}),
        IdentityReport("rate with extra z^2/(2a) term", float(alt[i]), float(derived[i]), anchor="erratum (GFtz)",
                       expect_gap=True, meta={"model": _label(model), "t": float(t.ravel()[i]),
                                              "z": float(z.ravel()[i]),
                                              "expected_gap": float(z.ravel()[i] ** 2 / (2 * a))}),
    ]


def rows_bridge(model, cfg):
    if not model.gaussian:
        return []
    lin = linear()

    def square(x):
        return x * x

    lhs_l, rhs_l, lhs_q, rhs_q = [], [], [], []
    for t in (0.5, 1.0, 2.0, 4.0):
        zs = np.linspace(-2.0, 2.0, 5)
        lhs_l.extend(np.atleast_1d(bridge_apply(model, t, lin, zs, cfg)))
        lhs_q.extend(np.atleast_1d(bridge_apply(model, t, square, zs, cfg)))
        joint = gaussian_joint(model, (0.0, t))
        for z in zs:
            cond = gaussian_condition(joint, [1], [z])
            rhs_l.append(cond.mean[0])
            rhs_q.append(cond.mean[0] ** 2 + cond.covariance[0, 0])
    meta = {"model": _label(model)}
    rows = [
        _worst("bridge on x", "bridge operator (Lmt)", lhs_l, rhs_l, 1e-7, meta),
        _worst("bridge on x^2", "bridge operator (Lmt)", lhs_q, rhs_q, 1e-7, meta),
    ]
    if model.name == "gauss_gauss":
        for r in kernel_triviality_probe(model, 1.0, [lin, exp_neg_sq()], cfg):
            rows.append(IdentityReport("kernel probe sup|bridge h|", r.lhs, r.rhs, anchor="kernel triviality",
                                       expect_gap=True, meta={"model": _label(model), **r.meta}))
    return rows


def _battery_functions(kind: str, n: int):
    return [indicator() if kind == "indicator" else exp_neg_sq() for _ in range(n)]


def fdd_rows(model: ProcessModel, kind: str, grid, cfg, mc_samples: int, seed: int) -> list[IdentityReport]:
    """Backward formulas against the forward chain rule and Monte Carlo for one case.

    For n >= 3 the bivariate reduction is reported as a flagged row.
    """
    n = len(grid)
    fs = _battery_functions(kind, n)
    meta = {"model": _label(model), "functions": kind, "grid": list(grid)}
    forward = fdd_forward(model, [constant()] + fs, grid, cfg)
    biv = fdd_bivariate(model, fs, grid, cfg).value
    mc = fdd_monte_carlo(model, [constant()] + fs, grid, mc_samples, seed)
    mc_meta = {**meta, "std_error": mc.std_error, "n_samples": mc.n_samples, "seed": mc.seed}
    rows = []
    if n == 2:
        nested = fdd_backward_nested(model, [constant()] + fs, grid, cfg).value
        rows.append(IdentityReport("nested bridges vs forward", nested, forward, 1e-4,
                                   "backward fdd (findist)", meta=meta))
    erratum = n >= 3
    rows.append(IdentityReport("bivariate reduction vs forward", biv, forward, 1e-4, "reduction (redu)",
                               expect_gap=erratum, meta=meta))
    rows.append(IdentityReport("bivariate reduction vs Monte Carlo", biv, mc.mean, 3 * mc.std_error,
                               "reduction (redu)", expect_gap=erratum, meta=mc_meta))
    rows.append(IdentityReport("forward vs Monte Carlo", forward, mc.mean, 3 * mc.std_error,
                               "chain rule", meta=mc_meta))
    return rows


def orthant_row(cfg=None) -> IdentityReport:
    """Bivariate reduction for two indicators against the arcsine formula."""
    model = make_gauss_gauss(1.0)
    biv = fdd_bivariate(model, [indicator(), indicator()], (1.0, 2.0), cfg).value
    cov = gaussian_joint(model, (1.0, 2.0)).covariance
    return IdentityReport("orthant probability", biv, bivariate_orthant(correlation(cov)[0, 1]), 1e-4,
                          "reduction (redu)", meta={"model": _label(model), "grid": [1.0, 2.0]})


def xindi_row(a: float = 2.0, grid=(1.0, 2.0), cfg=None) -> IdentityReport:
    """Single-integral formula for f = 1 against the exact value 1."""
    model = make_gauss_gauss(a)
    res = fdd_degenerate_xindi(model, [constant(), constant()], grid, cfg, opt_in=True, compare=False)
    t1, t2 = grid
    closed = a / math.sqrt(a * a - t1 * (t2 - t1))
    return IdentityReport("single-integral formula with f = 1", res.value, 1.0, anchor="degenerate formula (xindi)",
                          expect_gap=True, meta={"model": _label(model), "grid": list(grid),
                                                 "closed_form_value": closed, "closed_form_gap": closed - 1.0})


def rows_degenerate(model, cfg):
    if model.name != "gauss_gauss":
        return []
    return [xindi_row(2.0, (1.0, 2.0), cfg)]


CONDITIONAL_BATTERY = (
    ((1.0,), 1.0, 2.0, ("constant", "linear")),
    ((1.0,), 0.5, -0.7, ("indicator", "indicator")),
    ((1.0, 2.0), 0.5, 0.4, ("indicator", "indicator", "indicator")),
    ((0.5, 1.5), 1.0, -0.5, ("exp_neg_sq", "constant", "exp_neg_sq")),
)

_NAMED = {"constant": constant, "linear": linear, "indicator": indicator, "exp_neg_sq": exp_neg_sq}


def rows_conditional(model, cfg):
    if not model.gaussian:
        return []
    rows = []
    for grid, s, w, names in CONDITIONAL_BATTERY:
        fs = [_NAMED[k]() for k in names]
        q = ConditionalQuery(grid, s, w, fs)
        meta = {"model": _label(model), "grid": list(grid), "s": s, "w": w, "functions": list(names)}
        value = conditional_product(model, q, cfg)
        oracle = gaussian_conditional_expectation(model, fs, grid, s, w, cfg)
        rows.append(IdentityReport("bridge conditioning vs Gaussian", value, oracle, 1e-5,
                                   "conditional structure (csfd)", meta=meta))
        rows.append(IdentityReport("increment form vs bridge conditioning", conditional_psi(model, q, cfg=cfg),
                                   value, 1e-6, "conditional structure (Psiforsym)", meta=meta))
        if s > 0 or len(grid) > 1:
            rows.append(IdentityReport("epoch-ratio form vs bridge conditioning",
                                       conditional_psi(model, q, "lemma52_form", cfg), value,
                                       anchor="conditional structure (Psiforsym)", expect_gap=True, meta=meta))
        r = tower_check(model, fs, grid, s, cfg)
        rows.append(IdentityReport(r.name, r.lhs, r.rhs, 1e-4, "conditional structure (csfd)",
                                   meta={**meta, **r.meta}))
    return rows


def rows_transition_ratio(model, cfg):
    if model.name != "gauss_gauss":
        return []
    r = check_lemma_rela(model, 1.0, 1.0, 0.0, 1.0, cfg)
    return [IdentityReport(r.name, r.lhs, r.rhs, anchor=r.anchor, expect_gap=True,
                           meta={"model": _label(model), **r.meta})]


def rows_kolmogorov(model, cfg):
    if not model.gaussian:
        return []
    rep = kolmogorov_distance_foed(model, 1.0, cfg)
    meta = {"model": _label(model), "t": 1.0, "status": rep.status, "critical_points": rep.critical_points}
    rows = [IdentityReport("distance at critical points vs grid scan", rep.distance_foed, rep.distance_grid, 1e-6,
                           "Kolmogorov distance (expkol)", meta=meta)]
    if rep.critical_points:
        worst = max(abs(d) for d in rep.psi_prime_at_critical)
        rows.append(IdentityReport("psi' at critical points", worst, 0.0, 1e-5, "critical set (xocon)", meta=meta))
        rows.append(IdentityReport("split form vs psi", rep.split_form_gap, 0.0, 1e-9, "Kolmogorov distance (expkol)",
                                   meta=meta))
    if model.name == "gauss_gauss":
        rows.append(IdentityReport("identical laws", rep.distance, 0.0, 1e-8, "Kolmogorov distance (expkol)",
                                   meta=meta))
    return rows


def run_verification(settings: VerifySettings | None = None) -> VerificationLedger:
    """Run the selected groups on every configured model, in a fixed order."""
    st = settings or VerifySettings()
    ledger = VerificationLedger()
    cfg = st.cfg
    models = [build_model(name, dict(params)) for name, params in st.models]
    simple = {
        "construction": rows_construction, "normalization": rows_normalization, "semiflow": rows_semiflow,
        "generator": rows_generator, "ladder": rows_ladder, "rate_erratum": rows_rate_erratum,
        "bridge": rows_bridge, "degenerate": rows_degenerate, "conditional": rows_conditional,
        "transition_ratio": rows_transition_ratio, "kolmogorov": rows_kolmogorov,
    }
    for group in GROUPS:
        if group not in st.groups:
            continue
        if group == "fdd":
            for name, params, kind, grid in st.fdd_battery:
                _run(ledger, f"fdd {name} {kind} n={len(grid)}", "backward fdd (findist)",
                     lambda name=name, params=params, kind=kind, grid=grid: fdd_rows(
                         build_model(name, dict(params)), kind, grid, cfg, st.mc_samples, st.seed))
            _run(ledger, "orthant probability", "reduction (redu)", lambda: [orthant_row(cfg)])
            continue
        for model in models:
            _run(ledger, f"{group} {_label(model)}", group, lambda m=model, fn=simple[group]: fn(m, cfg))
    return ledger


__all__ = ["FDD_BATTERY", "GROUPS", "VerifySettings", "fdd_rows", "ladder_gap", "orthant_row", "run_verification",
           "xindi_row"]
