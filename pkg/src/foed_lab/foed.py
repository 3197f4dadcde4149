"""FOED exponent, rate, marginal densities and the L^n F ladder.

For a model with initial density g and transition density p_t the exponent
is E(t, x) = phi(t, x) / g(x) with phi(t, x) = int p_t(z, x) g(z) dz, the
rate is F(t, x) = d/dt log phi(t, x), and the ladder is
L^0 F = 1, L^{m+1} F = d/dt L^m F + F * L^m F, so that L^n F = d^n phi / phi.
Everything is evaluated in log space where possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnsupportedOperation
from .functions import as_function
from .models import ProcessModel
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, derivative_fd, integrate_1d, integrate_batch
from .report import IdentityReport

MODES = ("auto", "closed_form", "quadrature")

# Finite-difference steps, relative to max(1, t), for d/dt log E and for the
# outer derivatives of the ladder.  Both stencils are Richardson-extrapolated,
# so the truncation error is O(h^4) and the steps can stay wide enough to
# keep the ~1e-9 relative noise of quadrature-built exponents under control.
_RATE_STEP = 1e-3
_LADDER_STEP = 1e-2


def _resolve_mode(model: ProcessModel, mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "auto":
        return "closed_form" if model.has_closed_form else "quadrature"
    if mode == "closed_form" and not model.has_closed_form:
        raise UnsupportedOperation(f"model {model.name!r} has no closed-form exponent")
    return mode


def _probe_points(model: ProcessModel, x: np.ndarray) -> np.ndarray:
    # z values used to locate the peak of z -> p_t(z, x) g(z) for each x
    center, scale = model.marginal_moments(0.0)
    u = (np.arange(1, 256) - 128.0) / 128.0
    fixed = center + scale * np.tan(0.5 * np.pi * 0.999 * u)
    frac = np.linspace(0.0, 1.0, 33)
    moving = center + frac[None, :] * (x[:, None] - center)
    z = np.concatenate([np.broadcast_to(fixed, (x.size, fixed.size)), moving], axis=1)
    lo, hi = model.domain.lower, model.domain.upper
    span = np.abs(z) + 1.0
    return np.clip(z, lo + 1e-9 * span, hi - 1e-9 * span)


def _quad_log_phi(model: ProcessModel, t: float, x: np.ndarray, cfg: QuadratureConfig) -> np.ndarray:
    # log of phi(t, x) = int p_t(z, x) g(z) dz for a batch of x sharing one t.
    # The integrand is rescaled per x by its largest value on a probe set so
    # that it stays O(1) even far in the tails.
    xs = x.ravel()

    def log_integrand(z, xcol):
        return model.log_transition_density(t, z, xcol) + model.log_initial_density(z)

    probe = np.sort(_probe_points(model, xs), axis=1)
    vals = log_integrand(probe, xs[:, None])
    vals = np.where(np.isnan(vals), -np.inf, vals)
    best = np.argmax(vals, axis=1)
    rows = np.arange(xs.size)
    lo = probe[rows, np.maximum(best - 1, 0)]
    hi = probe[rows, np.minimum(best + 1, probe.shape[1] - 1)]
    # golden-section search for the peak between the neighbouring probes
    ratio = 0.5 * (np.sqrt(5.0) - 1.0)
    for _ in range(80):
        m1 = hi - ratio * (hi - lo)
        m2 = lo + ratio * (hi - lo)
        left = log_integrand(m1, xs) > log_integrand(m2, xs)
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    shift = np.maximum(vals[rows, best], log_integrand(0.5 * (lo + hi), xs))
    shift = np.where(np.isfinite(shift), shift, 0.0)
    center, scale = model.marginal_moments(0.0)

    def integrand(z):
        return np.exp(log_integrand(z[None, :], xs[:, None]) - shift[:, None])

    val = np.asarray(integrate_batch(integrand, model.domain, cfg, center=center, scale=scale))
    with np.errstate(divide="ignore"):
        return (np.log(val) + shift).reshape(x.shape)


def log_foed_exponent(model: ProcessModel, t, x, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """log E(t, x); broadcasts over array arguments."""
    mode = _resolve_mode(model, mode)
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    if np.any(t_arr < 0):
        raise DomainError("time must be nonnegative")
    lg = np.asarray(model.log_initial_density(x_arr))
    if np.any(~np.isfinite(lg)) or np.any(~model.domain.contains(x_arr)):
        raise DomainError("the exponent needs g(x) > 0")
    out = np.zeros(t_arr.shape)
    pos = t_arr > 0
    if pos.any():
        if mode == "closed_form":
            out[pos] = model.log_closed_form_foed(t_arr[pos], x_arr[pos])
        else:
            cfg = cfg or DEFAULT_CONFIG
            for tv in np.unique(t_arr[pos]):
                sel = pos & (t_arr == tv)
                out[sel] = _quad_log_phi(model, float(tv), x_arr[sel], cfg) - lg[sel]
    return out if out.shape else float(out)


def foed_exponent(model: ProcessModel, t, x, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """E(t, x) = exp(int_0^t F(u, x) du); equals 1 at t = 0."""
    return np.exp(log_foed_exponent(model, t, x, cfg, mode))


def log_marginal_density(model: ProcessModel, t, x, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """log of the density of X_t; -inf where g vanishes."""
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    lg = np.asarray(model.log_initial_density(x_arr), dtype=float)
    out = np.full(t_arr.shape, -np.inf)
    ok = np.isfinite(lg) & model.domain.contains(x_arr)
    if ok.any():
        out[ok] = lg[ok] + log_foed_exponent(model, t_arr[ok], x_arr[ok], cfg, mode)
    return out if out.shape else float(out)


def marginal_density(model: ProcessModel, t, x, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """Density of X_t: g(x) * E(t, x), and 0 where g(x) = 0."""
    return np.exp(log_marginal_density(model, t, x, cfg, mode))


@dataclass(frozen=True)
class FoedExponent:
    """Callable exponent bound to a model, an evaluation mode and tolerances."""

    model: ProcessModel
    mode: str = "auto"
    cfg: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        object.__setattr__(self, "mode", _resolve_mode(self.model, self.mode))

    def log(self, t, x):
        return log_foed_exponent(self.model, t, x, self.cfg, self.mode)

    def __call__(self, t, x):
        return np.exp(self.log(t, x))


@dataclass(frozen=True)
class MarginalLaw:
    """The law of X_t, described by its density."""

    model: ProcessModel
    t: float
    mode: str = "auto"
    cfg: QuadratureConfig = field(default_factory=QuadratureConfig)

    def density(self, x):
        return marginal_density(self.model, self.t, x, self.cfg, self.mode)

    def expect(self, f, cfg: QuadratureConfig | None = None) -> float:
        return expect_marginal(self.model, self.t, f, cfg or self.cfg, self.mode)


def expect_marginal(model: ProcessModel, t: float, f, cfg: QuadratureConfig | None = None, mode: str = "auto") -> float:
    """int f dmu_t by quadrature."""
    f = as_function(f)
    center, scale = model.marginal_moments(t)
    return integrate_1d(
        lambda x: f(x) * marginal_density(model, t, x, cfg, mode),
        model.domain, cfg, points=f.breakpoints, center=center, scale=scale,
    )


# --------------------------------------------------------------------------
# rate and ladder
# --------------------------------------------------------------------------

def foed_rate(model: ProcessModel, t: float, x, cfg: QuadratureConfig | None = None, mode: str = "auto",
              h: float | None = None):
    """F(t, x) = d/dt log E(t, x) by a Richardson-extrapolated difference.

    One-sided stencils are used near t = 0.
    """
    mode = _resolve_mode(model, mode)
    t = float(t)
    if t < 0:
        raise DomainError("time must be nonnegative")
    step = (h if h is not None else _RATE_STEP) * max(1.0, t)
    return derivative_fd(
        lambda s: log_foed_exponent(model, s, x, cfg, mode), t, 1, h=step, lower=0.0, richardson=True,
    )


def ln_f(model: ProcessModel, n: int, t: float, x, cfg: QuadratureConfig | None = None, mode: str = "auto",
         h: float | None = None):
    """L^n F(t, x) through L^{m+1} F = d/dt L^m F + F L^m F, for 1 <= n <= 3."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > 3:
        raise UnsupportedOperation("the ladder is limited to n <= 3: nested differences lose too many digits")
    mode = _resolve_mode(model, mode)
    t = float(t)
    if not t > 0:
        raise DomainError("the ladder needs t > 0")
    x = np.asarray(x, dtype=float)
    step = (h if h is not None else _LADDER_STEP) * max(1.0, t)
    memo: dict[tuple[int, float], np.ndarray] = {}

    def rate(s):
        key = (1, s)
        if key not in memo:
            memo[key] = np.asarray(foed_rate(model, s, x, cfg, mode))
        return memo[key]

    def level(m, s):
        if m == 1:
            return rate(s)
        key = (m, s)
        if key not in memo:
            d = derivative_fd(lambda r: level(m - 1, r), s, 1, h=step, lower=0.0, richardson=True)
            memo[key] = d + rate(s) * level(m - 1, s)
        return memo[key]

    out = level(n, t)
    return out if out.shape else float(out)


# --------------------------------------------------------------------------
# identity checks
# --------------------------------------------------------------------------

def check_generator_identity(model: ProcessModel, f, t: float, cfg: QuadratureConfig | None = None,
                             mode: str = "auto", tolerance: float = 1e-5) -> IdentityReport:
    """int f dmu_t  versus  int [f + Af * int_0^t E(s, .) ds] dgamma."""
    if model.generator is None:
        raise UnsupportedOperation(f"model {model.name!r} has no generator")
    f = as_function(f)
    t = float(t)
    lhs = expect_marginal(model, t, f, cfg, mode)
    center, scale = model.marginal_moments(0.0)
    inner_cfg = cfg

    def integrand(x):
        d = f.derivs(x, 2)
        af = model.apply_generator(d, x, 1)
        # int_0^t g(x) E(s, x) ds, in log space to survive far tails
        occupation = integrate_batch(
            lambda s: marginal_density(model, s[None, :], x[:, None], cfg, mode), (0.0, t), inner_cfg,
        )
        return d[0] * model.initial_density(x) + af * occupation

    rhs = integrate_1d(integrand, model.domain, cfg, center=center, scale=scale)
    return IdentityReport("generator identity", lhs, rhs, tolerance,
                          meta={"model": model.name, "t": t, "f": f.name})


def check_an_identity(model: ProcessModel, n: int, f, t: float, cfg: QuadratureConfig | None = None,
                      mode: str = "auto", tolerance: float = 1e-5) -> IdentityReport:
    """int A^n f dmu_t  versus  int f L^n F(t, .) dmu_t, for n = 1, 2."""
    if n not in (1, 2):
        raise UnsupportedOperation("only n = 1, 2 are supported")
    if model.generator is None:
        raise UnsupportedOperation(f"model {model.name!r} has no generator")
    f = as_function(f)
    t = float(t)
    center, scale = model.marginal_moments(t)

    def lhs_integrand(x):
        return model.apply_generator(f.derivs(x, 2 * n), x, n) * marginal_density(model, t, x, cfg, mode)

    def rhs_integrand(x):
        dens = marginal_density(model, t, x, cfg, mode)
        live = dens > 0
        out = np.zeros_like(x)
        if live.any():
            out[live] = f(x[live]) * ln_f(model, n, t, x[live], cfg, mode) * dens[live]
        return out

    lhs = integrate_1d(lhs_integrand, model.domain, cfg, center=center, scale=scale)
    rhs = integrate_1d(rhs_integrand, model.domain, cfg, center=center, scale=scale)
    return IdentityReport(f"A^{n} identity", lhs, rhs, tolerance,
                          meta={"model": model.name, "t": t, "n": n, "f": f.name})


def exponent_from(model: ProcessModel, s: float, t: float, z, cfg: QuadratureConfig | None = None,
                  mode: str = "auto"):
    """Density ratio mu_t(z) / mu_s(z), the exponent restarted at time s."""
    return np.exp(log_foed_exponent(model, t, z, cfg, mode) - log_foed_exponent(model, s, z, cfg, mode))


def check_semiflow(model: ProcessModel, s: float, t: float, x, cfg: QuadratureConfig | None = None,
                   mode: str = "auto", tolerance: float = 1e-8) -> IdentityReport:
    """int p_{t-s}(v, x) mu_s(v) dv  versus  mu_s(x) E(t, x) / E(s, x), worst point of ``x``.

    The left side pushes the time-s law forward with the transition density;
    the right side restarts the exponent at time s.
    """
    s, t = float(s), float(t)
    if not 0 < s < t:
        raise DomainError("need 0 < s < t")
    cfg = cfg or DEFAULT_CONFIG
    x = np.atleast_1d(np.asarray(x, dtype=float))
    center, scale = model.marginal_moments(s)

    def integrand(v):
        return np.exp(model.log_transition_density(t - s, v[None, :], x[:, None])
                      + log_marginal_density(model, s, v, cfg, mode)[None, :])

    lhs = np.asarray(integrate_batch(integrand, model.domain, cfg, center=center, scale=scale))
    rhs = marginal_density(model, s, x, cfg, mode) * exponent_from(model, s, t, x, cfg, mode)
    i = int(np.argmax(np.abs(lhs - rhs)))
    return IdentityReport("semiflow", float(lhs[i]), float(rhs[i]), tolerance,
                          meta={"model": model.name, "s": s, "t": t, "x_worst": float(x[i]), "points": int(x.size)})


def representation_gap(model: ProcessModel, f, t: float, cfg: QuadratureConfig | None = None,
                       mode: str = "auto", tolerance: float = 1e-5) -> IdentityReport:
    """int f dmu_t  versus  int f dgamma + int_0^t int f(z) F(r, z) mu_r(dz) dr."""
    f = as_function(f)
    t = float(t)
    lhs = expect_marginal(model, t, f, cfg, mode)
    base = expect_marginal(model, 0.0, f, cfg, mode)

    def drift(r):
        out = np.empty_like(r)
        for i, rv in enumerate(r):
            center, scale = model.marginal_moments(rv)
            out[i] = integrate_1d(
                lambda z: f(z) * foed_rate(model, rv, z, cfg, mode) * marginal_density(model, rv, z, cfg, mode),
                model.domain, cfg, points=f.breakpoints, center=center, scale=scale,
            )
        return out

    # a modest rule: the r-integrand is smooth and each node is a full quadrature
    outer = QuadratureConfig(cfg.abs_tol if cfg else 1e-10, cfg.rel_tol if cfg else 1e-8, gauss_nodes=7)
    rhs = base + integrate_1d(drift, (0.0, t), outer)
    return IdentityReport("representation identity", lhs, rhs, tolerance,
                          meta={"model": model.name, "t": t, "f": f.name})


def gauss_gauss_rate(a: float, t, z):
    """Rate obtained by differentiating the Gauss-Gauss exponent in t."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    return -1.0 / (2.0 * (a + t)) + z * z / (2.0 * (a + t) ** 2)


def gauss_gauss_rate_alternative(a: float, t, z):
    """The variant with an extra z^2/(2a) term, kept to measure its mismatch."""
    return gauss_gauss_rate(a, t, z) + np.asarray(z, dtype=float) ** 2 / (2.0 * a)


def marginal_mass(model: ProcessModel, t: float, cfg: QuadratureConfig | None = None, mode: str = "auto") -> float:
    """int g(z) E(t, z) dz, which should be 1."""
    center, scale = model.marginal_moments(t)
    return integrate_1d(lambda x: marginal_density(model, t, x, cfg, mode), model.domain, cfg,
                        center=center, scale=scale)


__all__ = [
    "FoedExponent", "MarginalLaw", "MODES", "check_an_identity", "check_generator_identity",
    "check_semiflow", "exponent_from", "expect_marginal", "foed_exponent", "foed_rate", "gauss_gauss_rate",
    "gauss_gauss_rate_alternative", "ln_f", "log_foed_exponent", "log_marginal_density",
    "marginal_density", "marginal_mass", "representation_gap",
]
