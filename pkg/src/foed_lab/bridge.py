"""Bridge operators and backward formulas for finite-dimensional laws.

The bridge operator is the backward conditional expectation

    (Lambda_t f)(z) = int f(v) p_t(v, z) g(v) dv / mu_t(z) = E[f(X_0) | X_t = z].

Three backward routes to E f_0(X_0) f_1(X_{t_1}) ... f_n(X_{t_n}) are offered:

* :func:`fdd_backward_nested` chains bridge operators,
  H_0 = f_0, H_k = f_k E(t_k - t_{k-1}, .) Lambda_{t_k - t_{k-1}} H_{k-1},
  and integrates H_n against g;
* :func:`fdd_bivariate` collapses the chain to one double integral
  int int f_n(x) Xi(v) p_{t_n - t_{n-1}}(v, x) g(v) dv dx, where Xi is the
  single-state product of :func:`xi` over the first n-1 increments;
* :func:`fdd_degenerate_xindi` integrates Xi over all n increments against g.

The last two are exact only for n = 2 and n = 1 respectively; they are kept
so that their disagreement with the forward chain rule can be measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedOperation
from .foed import expect_marginal, log_foed_exponent, log_marginal_density
from .functions import as_function, is_constant_one
from .models import ProcessModel, TimeGrid
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate_1d, integrate_2d, integrate_batch
from .report import IdentityReport

# log(1e-300): below this the marginal density is treated as zero
LOG_DENSITY_FLOOR = math.log(1e-300)

METHODS = ("backward_nested", "backward_bivariate", "degenerate_xindi", "forward", "monte_carlo")


@dataclass(frozen=True)
class FddResult:
    value: float
    method: str
    error_estimate: float
    comparisons: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "error_estimate": self.error_estimate,
                "comparisons": dict(self.comparisons)}


def _as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def _error_bound(value: float, cfg: QuadratureConfig | None) -> float:
    cfg = cfg or DEFAULT_CONFIG
    return max(cfg.abs_tol, cfg.rel_tol * abs(value))


def _log_mu_checked(model, t, z, cfg, mode) -> np.ndarray:
    log_mu = np.asarray(log_marginal_density(model, t, z, cfg, mode), dtype=float)
    if np.any(log_mu < LOG_DENSITY_FLOOR):
        bad = np.asarray(z, dtype=float)[log_mu < LOG_DENSITY_FLOOR] if log_mu.shape else z
        raise DomainError(f"marginal density at time {t} underflows at z = {np.ravel(bad)[:3]}")
    return log_mu


def _bridge_batch(model: ProcessModel, t: float, h: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
                  cfg: QuadratureConfig | None, mode: str, points: Sequence[float] = (),
                  drop_negligible: bool = False) -> np.ndarray:
    # Lambda_t h at every z; h is evaluated once per quadrature node.  With
    # drop_negligible, points where mu_t underflows get 0 instead of an error:
    # inside a chain they are weighted by mu_t(z) and contribute nothing.
    zs = np.asarray(z, dtype=float).ravel()
    if drop_negligible:
        log_mu = np.asarray(log_marginal_density(model, t, zs, cfg, mode), dtype=float)
        live = log_mu >= LOG_DENSITY_FLOOR
    else:
        log_mu = _log_mu_checked(model, t, zs, cfg, mode)
        live = np.ones(zs.shape, dtype=bool)
    out = np.zeros(zs.shape)
    if live.any():
        zl, lm = zs[live], log_mu[live]
        center, scale = model.marginal_moments(0.0)

        def integrand(v):
            w = model.log_transition_density(t, v[None, :], zl[:, None]) + model.log_initial_density(v)[None, :]
            hv = h(v)
            if isinstance(hv, tuple):  # (a, b) standing for a * exp(b)
                a, b = hv
                return np.asarray(a, dtype=float)[None, :] * np.exp(w + np.asarray(b)[None, :] - lm[:, None])
            return np.asarray(hv, dtype=float)[None, :] * np.exp(w - lm[:, None])

        out[live] = integrate_batch(integrand, model.domain, cfg, points=points, center=center, scale=scale)
    return out.reshape(np.shape(z))


def bridge_apply(model: ProcessModel, t: float, f, z, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """(Lambda_t f)(z) = E[f(X_0) | X_t = z]; vectorised over z."""
    t = float(t)
    if not t > 0:
        raise DomainError("the bridge operator needs t > 0")
    f = as_function(f)
    out = _bridge_batch(model, t, f, np.asarray(z, dtype=float), cfg, mode, f.breakpoints)
    return out if out.shape else float(out)


def orthogonal_component(model: ProcessModel, t: float, f, cfg: QuadratureConfig | None = None,
                         mode: str = "auto") -> Callable:
    """z -> f(z) - (Lambda_t f)(z), evaluated lazily (pointwise difference)."""
    f = as_function(f)

    def component(z):
        return f(z) - bridge_apply(model, t, f, z, cfg, mode)

    return component


def _log_exponent_sum(model, increments, z, cfg, mode):
    z = np.asarray(z, dtype=float)
    total = np.zeros(z.shape)
    for dt in increments:
        total = total + log_foed_exponent(model, dt, z, cfg, mode)
    return total


def xi(model: ProcessModel, f_list: Sequence, grid, z, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """Single-state product prod_i f_i(z) E(t_i - t_{i-1}, z) over f_1..f_n."""
    grid = _as_grid(grid)
    fs = [as_function(f) for f in f_list]
    if len(fs) != len(grid):
        raise ValueError("need one function per epoch")
    z = np.asarray(z, dtype=float)
    prod = np.ones(z.shape)
    for f in fs:
        prod = prod * f(z)
    out = prod * np.exp(_log_exponent_sum(model, grid.increments, z, cfg, mode))
    return out if out.shape else float(out)


def backward_chain(model: ProcessModel, fs: Sequence, increments: Sequence[float],
                   cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """The top of the chain H_0 = f_0, H_k = f_k E(dt_k, .) Lambda_{dt_k} H_{k-1}.

    Returns ``(h, points)`` where ``h(v)`` gives a pair ``(a, b)`` standing
    for a * exp(b), so that E can be merged with density weights in log
    space, and ``points`` are the break points of the top function.
    """
    fs = [as_function(f) for f in fs]

    def make_level(k: int):
        if k == 0:
            return (lambda v: (fs[0](v), np.zeros(np.shape(v)))), fs[0].breakpoints, is_constant_one(fs[0])
        prev, prev_points, prev_one = make_level(k - 1)
        fk, dt = fs[k], increments[k - 1]

        def h(v):
            v = np.asarray(v, dtype=float)
            lam = np.ones(v.shape) if prev_one else _bridge_batch(model, dt, prev, v, cfg, mode, prev_points, True)
            return fk(v) * lam, log_foed_exponent(model, dt, v, cfg, mode)

        return h, fk.breakpoints, False

    top, points, _ = make_level(len(increments))
    return top, points


def fdd_backward_nested(model: ProcessModel, f_list: Sequence, grid, cfg: QuadratureConfig | None = None,
                        mode: str = "auto") -> FddResult:
    """E f_0(X_0) prod f_i(X_{t_i}) by chaining bridge operators (n <= 2).

    ``f_list`` holds f_0, ..., f_n.
    """
    grid = _as_grid(grid)
    fs = [as_function(f) for f in f_list]
    n = len(grid)
    if len(fs) != n + 1:
        raise ValueError("need n + 1 functions f_0..f_n")
    if n > 2:
        raise UnsupportedOperation("nested evaluation is limited to n <= 2; use fdd_bivariate or the forward oracle")
    top, top_points = backward_chain(model, fs, grid.increments, cfg, mode)
    center, scale = model.marginal_moments(0.0)

    def integrand(v):
        a, b = top(v)
        return a * np.exp(b + model.log_initial_density(v))

    value = integrate_1d(integrand, model.domain, cfg, points=top_points, center=center, scale=scale)
    return FddResult(value, "backward_nested", _error_bound(value, cfg))


def fdd_bivariate(model: ProcessModel, f_list: Sequence, grid, cfg: QuadratureConfig | None = None,
                  mode: str = "auto") -> FddResult:
    """Double-integral reduction over (v, x) for f_1..f_n, n >= 2.

    Computes int int f_n(x) Xi(t_1..t_{n-1}; v) p_{t_n - t_{n-1}}(v, x) g(v) dv dx.
    Exact for n = 2; for n >= 3 it does not reproduce the chain rule.
    """
    grid = _as_grid(grid)
    fs = [as_function(f) for f in f_list]
    n = len(grid)
    if n < 2:
        raise DomainError("the bivariate reduction needs n >= 2")
    if len(fs) != n:
        raise ValueError("need n functions f_1..f_n")
    incs = grid.increments
    head, last, dt = fs[:-1], fs[-1], incs[-1]

    def integrand(v, x):
        prod = np.ones(np.shape(v))
        for f in head:
            prod = prod * f(v)
        logw = (_log_exponent_sum(model, incs[:-1], v, cfg, mode) + model.log_initial_density(v)
                + model.log_transition_density(dt, v, x))
        return last(x) * prod * np.exp(logw)

    c0, s0 = model.marginal_moments(0.0)
    c1, s1 = model.marginal_moments(grid.epochs[-1])
    v_points = sorted({p for f in head for p in f.breakpoints})
    value = integrate_2d(integrand, model.domain, model.domain, cfg,
                         points=[v_points, list(last.breakpoints)], centers=[c0, c1], scales=[s0, s1])
    return FddResult(value, "backward_bivariate", _error_bound(value, cfg))


def check_xindi_integrable(model: ProcessModel, f_list: Sequence, grid, cfg: QuadratureConfig | None = None,
                           mode: str = "auto") -> tuple[bool, str]:
    """Numerical tail test for z -> Xi(z) g(z).

    The log integrand must fall below -60 at 40 scale units from the centre on
    every unbounded side and decrease along the way.
    """
    grid = _as_grid(grid)
    fs = [as_function(f) for f in f_list]
    center, scale = model.marginal_moments(0.0)
    lo, hi = model.domain.lower, model.domain.upper
    for side in (-1.0, 1.0):
        if math.isfinite(lo if side < 0 else hi):
            continue
        z = center + side * scale * np.array([5.0, 10.0, 20.0, 40.0])
        prod = np.ones(z.shape)
        for f in fs:
            prod = prod * np.abs(f(z))
        with np.errstate(divide="ignore"):
            logv = np.log(prod) + _log_exponent_sum(model, grid.increments, z, cfg, mode) + model.log_initial_density(z)
        finite = logv[np.isfinite(logv)]
        if finite.size and (finite[-1] > -60.0 or np.any(np.diff(finite) > 0)):
            return False, (f"log integrand does not decay on the {'left' if side < 0 else 'right'} tail: "
                           f"{np.round(logv, 3).tolist()} at z = {z.tolist()}")
    return True, "tails decay"


def fdd_degenerate_xindi(model: ProcessModel, f_list: Sequence, grid, cfg: QuadratureConfig | None = None,
                         mode: str = "auto", *, opt_in: bool = False, compare: bool = True) -> FddResult:
    """Single integral int Xi(t_1..t_n; z) g(z) dz over f_1..f_n.

    Exact only for n = 1.  Requires ``opt_in=True`` and refuses integrands
    whose tails do not decay.  With ``compare`` the gap to the bivariate
    reduction (n >= 2) or to the n = 1 marginal expectation is attached.
    """
    if not opt_in:
        raise UnsupportedOperation("the single-integral formula is a probe; pass opt_in=True to evaluate it")
    grid = _as_grid(grid)
    fs = [as_function(f) for f in f_list]
    if len(fs) != len(grid):
        raise ValueError("need n functions f_1..f_n")
    ok, why = check_xindi_integrable(model, fs, grid, cfg, mode)
    if not ok:
        raise DomainError(f"integrability check failed: {why}")
    incs = grid.increments

    def integrand(z):
        prod = np.ones(z.shape)
        for f in fs:
            prod = prod * f(z)
        return prod * np.exp(_log_exponent_sum(model, incs, z, cfg, mode) + model.log_initial_density(z))

    center, scale = model.marginal_moments(0.0)
    points = sorted({p for f in fs for p in f.breakpoints})
    value, err, _ = integrate_1d(integrand, model.domain, cfg, points=points, center=center, scale=scale,
                                 full_output=True)
    comparisons = {}
    if compare:
        if len(grid) >= 2:
            ref = fdd_bivariate(model, fs, grid, cfg, mode).value
            comparisons["backward_bivariate"] = ref
        else:
            ref = expect_marginal(model, grid.epochs[0], fs[0], cfg, mode)
            comparisons["marginal"] = ref
        comparisons["gap"] = value - ref
    return FddResult(value, "degenerate_xindi", float(err), comparisons)


def kernel_triviality_probe(model: ProcessModel, t: float, trial_functions: Sequence,
                            cfg: QuadratureConfig | None = None, mode: str = "auto", *,
                            z_grid: Sequence[float] | None = None,
                            lambdas: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0)) -> list[IdentityReport]:
    """Grid evidence that trial functions are not annihilated by Lambda_t.

    For each h the report carries sup_z |Lambda_t h(z)| as ``lhs`` (``rhs``
    is 0); a positive value certifies h is outside the kernel.  The exponential
    moments E[h(X_0) exp(lambda X_0)] on ``lambdas`` go into ``meta``.
    """
    center, scale = model.marginal_moments(0.0)
    if z_grid is None:
        z = np.linspace(center - 4.0 * scale, center + 4.0 * scale, 81)
        z = z[model.domain.contains(z)]
    else:
        z = np.asarray(z_grid, dtype=float)
    reports = []
    for h in trial_functions:
        h = as_function(h)
        vals = np.abs(np.atleast_1d(bridge_apply(model, t, h, z, cfg, mode)))
        i = int(np.argmax(vals))
        moments = {}
        for lam in lambdas:
            moments[f"{lam:g}"] = integrate_1d(
                lambda v, lam=lam: h(v) * np.exp(lam * v + model.log_initial_density(v)),
                model.domain, cfg, points=h.breakpoints, center=center, scale=scale,
            )
        reports.append(IdentityReport(
            "kernel probe", float(vals[i]), 0.0,
            meta={"function": h.name, "t": float(t), "z_at_sup": float(z[i]),
                  "certified_outside_kernel": bool(vals[i] > 1e-12), "exp_moments": moments},
        ))
    return reports


__all__ = [
    "FddResult", "TimeGrid", "backward_chain", "bridge_apply", "check_xindi_integrable", "fdd_backward_nested", "fdd_bivariate",
    "fdd_degenerate_xindi", "kernel_triviality_probe", "orthogonal_component", "xi",
]
