"""Expectations of path functionals given the state at a later epoch.

For a grid 0 < t_1 < ... < t_n and a lag s >= 0 the conditioning epoch is
T = s + t_1 + ... + t_n and the last bridge runs over L = T - t_n.  Three
routes are offered:

* :func:`conditional_product` chains bridge operators,
  E(L, w) / E(T, w) * Lambda_L(H_n)(w), with H_n the top of
  :func:`foed_lab.bridge.backward_chain`;
* :func:`conditional_psi` with ``variant="increment_form"`` integrates a joint
  payoff against a product of eta densities, each taken over one grid
  increment and normalised at its later state;
* ``variant="lemma52_form"`` uses ratios p_{t_i}(z_{i-1}, z_i) / mu_{t_i}(z_{i-1})
  over the epochs themselves.  It is kept as a probe and does not agree
  with the other two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bridge import LOG_DENSITY_FLOOR, _bridge_batch, _log_mu_checked, backward_chain
from .errors import DomainError, UnsupportedOperation
from .foed import log_foed_exponent, log_marginal_density
from .functions import as_function
from .models import ProcessModel, TimeGrid
from .oracle import fdd_forward
from .quadrature import QuadratureConfig, integrate_1d, integrate_nd
from .report import IdentityReport

VARIANTS = ("increment_form", "lemma52_form")


@dataclass(frozen=True)
class ConditionalQuery:
    """Condition on X_T = w with T = s + t_1 + ... + t_n.

    ``payoff`` is either a list f_0..f_n (a product payoff) or a callable
    Psi(z_0, ..., z_n) on arrays.
    """

    grid: TimeGrid
    s: float
    w: float
    payoff: Sequence | Callable = field(default_factory=list)

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, TimeGrid) else TimeGrid(self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) < 1:
            raise DomainError("the query needs at least one epoch")
        if not (math.isfinite(self.s) and self.s >= 0):
            raise DomainError("the lag s must be nonnegative")
        if not math.isfinite(self.w):
            raise DomainError("the conditioning state must be finite")
        if not callable(self.payoff):
            fs = tuple(as_function(f) for f in self.payoff)
            if len(fs) != len(grid) + 1:
                raise ValueError("need n + 1 functions f_0..f_n")
            object.__setattr__(self, "payoff", fs)

    @property
    def n(self) -> int:
        return len(self.grid)

    def partial_sum(self, k: int) -> float:
        """s + t_1 + ... + t_k."""
        return float(self.s) + sum(self.grid.epochs[:k])

    @property
    def last_lag(self) -> float:
        """L = s + t_1 + ... + t_{n-1}, the gap between t_n and T."""
        return self.partial_sum(self.n - 1)

    @property
    def horizon(self) -> float:
        """T = s + t_1 + ... + t_n."""
        return self.partial_sum(self.n)

    @property
    def is_product(self) -> bool:
        return not callable(self.payoff)

    def psi(self) -> Callable:
        if not self.is_product:
            return self.payoff
        fs = self.payoff

        def product(*z):
            val = 1.0
            for f, zi in zip(fs, z):
                val = val * f(zi)
            return val

        return product


@dataclass(frozen=True)
class EtaMeasure:
    """Law of X_0 given X_t = w: density p_t(v, w) g(v) / mu_t(w)."""

    model: ProcessModel
    t: float
    w: float
    cfg: QuadratureConfig | None = None
    mode: str = "auto"

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("eta needs t > 0")
        object.__setattr__(self, "_log_mu", float(_log_mu_checked(self.model, self.t, self.w, self.cfg, self.mode)))

    def log_density(self, v):
        v = np.asarray(v, dtype=float)
        return (self.model.log_transition_density(self.t, v, self.w) + self.model.log_initial_density(v)
                - self._log_mu)

    def density(self, v):
        out = np.exp(self.log_density(v))
        return out if np.shape(out) else float(out)

    def expect(self, f) -> float:
        f = as_function(f)
        center, scale = self.model.marginal_moments(0.0)
        return integrate_1d(lambda v: f(v) * np.exp(self.log_density(v)), self.model.domain, self.cfg,
                            points=f.breakpoints, center=center, scale=scale)

    def mass(self) -> float:
        return self.expect(lambda v: np.ones_like(v))


def eta_density(model: ProcessModel, t: float, w: float, v, cfg: QuadratureConfig | None = None,
                mode: str = "auto"):
    """p_t(v, w) g(v) / mu_t(w), vectorised over v."""
    return EtaMeasure(model, float(t), float(w), cfg, mode).density(v)


def _conditional_product_batch(model, fs, grid, s, w, cfg, mode, drop_negligible=False):
    epochs = grid.epochs
    lag = float(s) + sum(epochs[:-1])
    horizon = lag + epochs[-1]
    w = np.asarray(w, dtype=float)
    top, points = backward_chain(model, fs, grid.increments, cfg, mode)
    log_mu_t = np.asarray(log_marginal_density(model, horizon, w, cfg, mode))
    if np.any(log_mu_t < LOG_DENSITY_FLOOR):
        raise DomainError(f"marginal density at time {horizon} underflows at the conditioning state")
    if lag == 0.0:
        a, b = top(w)
        return a * np.exp(b - log_foed_exponent(model, horizon, w, cfg, mode))
    ratio = np.exp(log_foed_exponent(model, lag, w, cfg, mode) - log_foed_exponent(model, horizon, w, cfg, mode))
    return ratio * _bridge_batch(model, lag, top, w, cfg, mode, points, drop_negligible)


def conditional_product(model: ProcessModel, query: ConditionalQuery, cfg: QuadratureConfig | None = None,
                        mode: str = "auto") -> float:
    """E[f_0(X_0) prod f_i(X_{t_i}) | X_T = w] by chaining bridge operators (n <= 2).

    The leading factor is the ratio of exponents E(L, w) / E(T, w); for
    L = 0 the outer bridge is the identity.
    """
    if not query.is_product:
        raise ValueError("conditional_product needs a function list; use conditional_psi for joint payoffs")
    if query.n > 2:
        raise UnsupportedOperation("nested conditioning is limited to n <= 2")
    return float(_conditional_product_batch(model, query.payoff, query.grid, query.s, query.w, cfg, mode))


def _increment_integrand(model, query, cfg, mode):
    # (z_0, ..., z_n) -> Psi * prod_i eta_{dt_i, z_i}(z_{i-1}) E(dt_i, z_i)
    #                    * eta_{L, w}(z_n) E(L, w) / E(T, w)
    # For L = 0 the last state is pinned at w and z_n is not integrated.
    n, incs = query.n, query.grid.increments
    lag, horizon, w = query.last_lag, query.horizon, query.w
    psi = query.psi()
    const = -float(log_foed_exponent(model, horizon, w, cfg, mode))
    if lag > 0:
        const += float(log_foed_exponent(model, lag, w, cfg, mode) - _log_mu_checked(model, lag, w, cfg, mode))

    def integrand(*z):
        z = list(z)
        if lag == 0.0:
            z.append(np.full(np.shape(z[-1]), w))
        logw = np.full(np.broadcast_shapes(*(np.shape(zi) for zi in z)), const)
        for i in range(1, n + 1):
            dt = incs[i - 1]
            logw = (logw + model.log_initial_density(z[i - 1]) + model.log_transition_density(dt, z[i - 1], z[i])
                    - log_marginal_density(model, dt, z[i], cfg, mode) + log_foed_exponent(model, dt, z[i], cfg, mode))
        if lag > 0:
            logw = logw + model.log_initial_density(z[n]) + model.log_transition_density(lag, z[n], w)
        return psi(*z) * np.exp(logw)

    return integrand, n + 1 if lag > 0 else n


def _epoch_ratio_integrand(model, query, cfg, mode):
    # Psi * prod_{i<n} p_{t_i}(z_{i-1}, z_i) / mu_{t_i}(z_{i-1}) * p_{t_n}(z_n, w) / mu_{t_n}(w)
    #     * exp(sum_i log E(dt_i, z_i)) * prod_i g(z_i) * E(L, w) / E(T, w)
    n, epochs, incs = query.n, query.grid.epochs, query.grid.increments
    lag, horizon, w = query.last_lag, query.horizon, query.w
    psi = query.psi()
    const = float(log_foed_exponent(model, lag, w, cfg, mode) - log_foed_exponent(model, horizon, w, cfg, mode)
                  - _log_mu_checked(model, epochs[-1], w, cfg, mode))

    def integrand(*z):
        logw = np.full(np.broadcast_shapes(*(np.shape(zi) for zi in z)), const)
        for zi in z:
            logw = logw + model.log_initial_density(zi)
        for i in range(1, n):
            logw = (logw + model.log_transition_density(epochs[i - 1], z[i - 1], z[i])
                    - log_marginal_density(model, epochs[i - 1], z[i - 1], cfg, mode))
        for i in range(1, n + 1):
            logw = logw + log_foed_exponent(model, incs[i - 1], z[i], cfg, mode)
        logw = logw + model.log_transition_density(epochs[-1], z[n], w)
        return psi(*z) * np.exp(logw)

    return integrand, n + 1


def conditional_psi(model: ProcessModel, query: ConditionalQuery, variant: str = "increment_form",
                    cfg: QuadratureConfig | None = None, mode: str = "auto") -> float:
    """E[Psi(X_0, X_{t_1}, ..., X_{t_n}) | X_T = w] as one integral over the states.

    The integral has n + 1 dimensions (n when L = 0 in the increment form),
    so n <= 3.  Integrands are evaluated in log space.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if query.n > 3:
        raise UnsupportedOperation("conditional_psi integrates at most 4 dimensions")
    if variant == "lemma52_form" and query.last_lag == 0.0:
        raise DomainError("the epoch-ratio form needs a positive last lag")
    build = _increment_integrand if variant == "increment_form" else _epoch_ratio_integrand
    integrand, dim = build(model, query, cfg, mode)
    epochs = (0.0,) + query.grid.epochs
    moments = [model.marginal_moments(t) for t in epochs[:dim]]
    if query.is_product:
        points = [list(f.breakpoints) for f in query.payoff[:dim]]
    else:
        points = None
    return integrate_nd(integrand, [model.domain] * dim, cfg, points=points,
                        centers=[m[0] for m in moments], scales=[m[1] for m in moments])


def tower_check(model: ProcessModel, f_list: Sequence, grid, s: float, cfg: QuadratureConfig | None = None,
                mode: str = "auto", tolerance: float = 1e-4) -> IdentityReport:
    """int E[prod f_i | X_T = w] mu_T(w) dw against the forward joint expectation."""
    grid = grid if isinstance(grid, TimeGrid) else TimeGrid(grid)
    fs = [as_function(f) for f in f_list]
    if len(grid) > 2:
        raise UnsupportedOperation("nested conditioning is limited to n <= 2")
    horizon = float(s) + sum(grid.epochs)
    center, scale = model.marginal_moments(horizon)

    def integrand(w):
        log_mu = np.asarray(log_marginal_density(model, horizon, w, cfg, mode))
        live = log_mu >= LOG_DENSITY_FLOOR
        out = np.zeros(w.shape)
        if live.any():
            out[live] = np.exp(log_mu[live]) * _conditional_product_batch(model, fs, grid, s, w[live], cfg, mode, True)
        return out

    lhs = integrate_1d(integrand, model.domain, cfg, center=center, scale=scale)
    rhs = fdd_forward(model, fs, grid, cfg)
    return IdentityReport("tower property", lhs, rhs, tolerance, anchor="conditional structure (csfd)",
                          meta={"s": float(s), "epochs": list(grid.epochs), "T": horizon})


def check_lemma_rela(model: ProcessModel, s: float, t: float, x: float, w: float,
                     cfg: QuadratureConfig | None = None, mode: str = "auto") -> IdentityReport:
    """Both sides of p_{s+t}(x, w) mu_s(w) = p_s(x, w) mu_{s+t}(w).

    The row is reported with ``expect_gap`` set: the two sides differ in
    general (they coincide at t = 0) and nothing is asserted about the gap.
    """
    s, t = float(s), float(t)
    if not s > 0 or t < 0:
        raise DomainError("need s > 0 and t >= 0")
    lhs = math.exp(float(model.log_transition_density(s + t, x, w))
                   + float(log_marginal_density(model, s, w, cfg, mode)))
    rhs = math.exp(float(model.log_transition_density(s, x, w))
                   + float(log_marginal_density(model, s + t, w, cfg, mode)))
    return IdentityReport("transition ratio probe", lhs, rhs, anchor="lemma (rela)", expect_gap=True,
                          meta={"s": s, "t": t, "x": float(x), "w": float(w)})


__all__ = [
    "ConditionalQuery", "EtaMeasure", "VARIANTS", "check_lemma_rela", "conditional_product", "conditional_psi",
    "eta_density", "tower_check",
]
