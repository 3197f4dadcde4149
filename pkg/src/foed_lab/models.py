"""Model zoo: one-dimensional Markov processes with a density at time zero.

Each model is an immutable :class:`ProcessModel` whose densities are
vectorised callables working in log space.  Three families are provided,
all obtained by running a classical diffusion for ``a`` time units before
the clock starts, so that ``X_0`` has a non-degenerate law:

* ``gauss_gauss``: ``X_t = B_{t+a}`` for a standard Brownian motion.
* ``ou_shift``: ``X_t = Y_{t+a}`` with ``dY = -lambda*Y dt + dW``, ``Y_0 = y0``.
* ``besq_shift``: ``X_t = Z_{t+a}`` for a squared Bessel process of
  dimension ``delta`` started at ``y0 > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import DomainError, UnsupportedOperation
from .quadrature import POSITIVE_HALF_LINE, REAL_LINE, StateInterval

_LOG_2PI = math.log(2.0 * math.pi)

# --------------------------------------------------------------------------
# modified Bessel function of the first kind
# --------------------------------------------------------------------------

_SERIES_SWITCH = 15.0


def _log_series(nu: float, x: np.ndarray) -> np.ndarray:
    # log of sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)); all terms positive.
    out = np.empty_like(x)
    if x.size == 0:
        return out
    q = 0.25 * x * x
    nterms = int(np.max(x) / 2.0 + 12.0 * math.sqrt(np.max(x) + 1.0) + 60.0)
    k = np.arange(1, nterms + 1, dtype=float)
    chunk = max(1, 200_000 // nterms)
    for s in range(0, x.size, chunk):
        qs = q[s:s + chunk, None]
        with np.errstate(divide="ignore"):
            logs = np.cumsum(np.log(qs) - np.log(k * (k + nu)), axis=1)
        logs = np.concatenate([np.zeros((qs.shape[0], 1)), logs], axis=1)
        top = logs.max(axis=1, keepdims=True)
        total = top[:, 0] + np.log(np.exp(logs - top).sum(axis=1))
        out[s:s + chunk] = total
    with np.errstate(divide="ignore"):
        return out + nu * np.log(0.5 * x) - special.gammaln(nu + 1.0)


def _log_hankel(nu: float, x: np.ndarray) -> np.ndarray:
    # Large-argument expansion, summed up to its smallest term.
    mu = 4.0 * nu * nu
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 80):
        new = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        shrinking = np.abs(new) < np.abs(term)
        active &= shrinking
        total = np.where(active, total + new, total)
        term = np.where(active, new, term)
        active &= np.abs(term) > 1e-17 * np.abs(total)
        if not active.any():
            break
    return x - 0.5 * np.log(2.0 * math.pi * x) + np.log(total)


def log_bessel_i(nu: float, x) -> np.ndarray:
    """Natural log of the modified Bessel function I_nu(x) for x >= 0.

    Power series for x <= 15 (and whenever the order is large compared with
    the argument), large-argument asymptotic series otherwise.  Orders must
    satisfy nu >= -1; for negative integers I_{-n} = I_n is used.
    """
    nu = float(nu)
    if nu < -1.0:
        raise DomainError("order below -1 is not supported")
    if nu < 0 and nu == round(nu):
        nu = -nu
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("bessel_i needs a nonnegative argument")
    flat = x.ravel()
    out = np.empty_like(flat)
    zero = flat == 0.0
    if nu == 0.0:
        out[zero] = 0.0
    else:
        out[zero] = -np.inf if nu > 0 else np.inf
    big = (flat > max(_SERIES_SWITCH, 2.0 * nu * nu)) & ~zero
    small = ~big & ~zero
    if small.any():
        out[small] = _log_series(nu, flat[small])
    if big.any():
        out[big] = _log_hankel(nu, flat[big])
    return out.reshape(x.shape) if x.shape else float(out[0])


def bessel_i(nu: float, x):
    """Modified Bessel function I_nu(x); see :func:`log_bessel_i`."""
    return np.exp(log_bessel_i(nu, x))


# --------------------------------------------------------------------------
# time grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing positive epochs t_1 < ... < t_n with t_0 = 0."""

    epochs: tuple[float, ...]

    def __init__(self, epochs: Sequence[float]):
        ep = tuple(float(t) for t in epochs)
        if not ep:
            raise ValueError("a time grid needs at least one epoch")
        if not all(math.isfinite(t) for t in ep) or ep[0] <= 0:
            raise ValueError("epochs must be finite and positive")
        if any(b <= a for a, b in zip(ep[:-1], ep[1:])):
            raise ValueError("epochs must be strictly increasing")
        object.__setattr__(self, "epochs", ep)

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def increments(self) -> tuple[float, ...]:
        prev = (0.0,) + self.epochs[:-1]
        return tuple(b - a for a, b in zip(prev, self.epochs))


def _epochs(grid) -> tuple[float, ...]:
    if isinstance(grid, TimeGrid):
        return grid.epochs
    ep = tuple(float(t) for t in grid)
    if ep:
        TimeGrid(ep)
    return ep


# --------------------------------------------------------------------------
# model record
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProcessModel:
    """Immutable description of a Markov process with a density at time 0.

    All callables are vectorised and broadcast their arguments.  Densities
    are supplied in log form; the plain versions are derived from them.

    ``generator(derivs, x, power)`` applies ``A**power`` (power 1 or 2) to a
    function given by its derivatives ``derivs = (f, f', f'', ...)``
    evaluated at ``x``.  ``sampler(t, x, u)`` maps uniforms ``u`` of shape
    ``x.shape + (step_uniforms,)`` to draws from ``p_t(x, .)``;
    ``initial_sampler(u)`` does the same for the initial law.
    """

    name: str
    domain: StateInterval
    params: Mapping[str, float]
    log_initial_density: Callable
    log_transition_density: Callable
    log_closed_form_foed: Callable | None = None
    generator: Callable | None = None
    sampler: Callable | None = None
    initial_sampler: Callable | None = None
    step_uniforms: int = 1
    initial_uniforms: int = 1
    # mean and standard deviation of X_t, used as quadrature and scan hints
    marginal_moments: Callable[[float], tuple[float, float]] = field(default=lambda t: (0.0, 1.0))
    # mean and standard deviation of X_{s+t} given X_s = x
    transition_moments: Callable | None = None
    gaussian: bool = False

    def initial_density(self, x):
        return np.exp(self.log_initial_density(x))

    def transition_density(self, t, x, y):
        return np.exp(self.log_transition_density(t, x, y))

    def closed_form_foed(self, t, x):
        if self.log_closed_form_foed is None:
            raise UnsupportedOperation(f"model {self.name!r} has no closed-form exponent")
        return np.exp(self.log_closed_form_foed(t, x))

    @property
    def has_closed_form(self) -> bool:
        return self.log_closed_form_foed is not None

    def apply_generator(self, derivs: Sequence, x, power: int = 1):
        if self.generator is None:
            raise UnsupportedOperation(f"model {self.name!r} has no generator")
        if power not in (1, 2):
            raise UnsupportedOperation("only A and A^2 are available")
        if len(derivs) < 2 * power + 1:
            raise ValueError(f"A^{power} needs derivatives up to order {2 * power}")
        return self.generator(derivs, x, power)

    @property
    def quad_hint(self) -> tuple[float, float]:
        """Centre and scale of the initial law."""
        return self.marginal_moments(0.0)


def _log_normal(y, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - (y - mean) ** 2 / (2.0 * var)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


# --------------------------------------------------------------------------
# Gauss-Gauss
# --------------------------------------------------------------------------

def make_gauss_gauss(a: float) -> ProcessModel:
    """Brownian motion observed from time ``a`` on: X_t = B_{t+a}."""
    a = _positive("a", a)

    def log_g(x):
        return _log_normal(np.asarray(x, dtype=float), 0.0, a)

    def log_p(t, x, y):
        return _log_normal(np.asarray(y, dtype=float), x, np.asarray(t, dtype=float))

    def log_foed(t, z):
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        return 0.5 * np.log(a / (a + t)) + z * z * t / (2.0 * a * (a + t))

    def gen(d, x, power):
        return d[2] / 2.0 if power == 1 else d[4] / 4.0

    def step(t, x, u):
        return x + math.sqrt(t) * special.ndtri(u[..., 0])

    def init(u):
        return math.sqrt(a) * special.ndtri(u[..., 0])

    return ProcessModel(
        name="gauss_gauss",
        domain=REAL_LINE,
        params={"a": a},
        log_initial_density=log_g,
        log_transition_density=log_p,
        log_closed_form_foed=log_foed,
        generator=gen,
        sampler=step,
        initial_sampler=init,
        marginal_moments=lambda t: (0.0, math.sqrt(a + t)),
        transition_moments=lambda t, x: (x, math.sqrt(t)),
        gaussian=True,
    )


# --------------------------------------------------------------------------
# Ornstein-Uhlenbeck shift
# --------------------------------------------------------------------------

def ou_variance(lam: float, t):
    """Variance e^{-2 lam t} int_0^t e^{2 lam s} ds of the OU transition."""
    t = np.asarray(t, dtype=float)
    if lam == 0.0:
        return t
    return -np.expm1(-2.0 * lam * t) / (2.0 * lam)


def make_ou_shift(a: float, lam: float, y0: float = 0.0) -> ProcessModel:
    """OU process dY = -lam Y dt + dW from Y_0 = y0, observed from time a on."""
    a = _positive("a", a)
    lam = float(lam)
    y0 = float(y0)
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    if not math.isfinite(y0):
        raise DomainError("y0 must be finite")

    def nu(t):
        return y0 * np.exp(-lam * np.asarray(t, dtype=float))

    var_a = float(ou_variance(lam, a))
    nu_a = float(nu(a))

    def log_g(x):
        return _log_normal(np.asarray(x, dtype=float), nu_a, var_a)

    def log_p(t, x, y):
        t = np.asarray(t, dtype=float)
        return _log_normal(np.asarray(y, dtype=float), np.asarray(x) * np.exp(-lam * t), ou_variance(lam, t))

    def log_foed(t, z):
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        var_ta = ou_variance(lam, t + a)
        return (
            0.5 * np.log(var_a / var_ta)
            - (z - nu(t + a)) ** 2 / (2.0 * var_ta)
            + (z - nu_a) ** 2 / (2.0 * var_a)
        )

    def gen(d, x, power):
        if power == 1:
            return d[2] / 2.0 - lam * x * d[1]
        return d[4] / 4.0 - lam * x * d[3] + (lam * lam * x * x - lam) * d[2] + lam * lam * x * d[1]

    def step(t, x, u):
        return x * math.exp(-lam * t) + math.sqrt(float(ou_variance(lam, t))) * special.ndtri(u[..., 0])

    def init(u):
        return nu_a + math.sqrt(var_a) * special.ndtri(u[..., 0])

    return ProcessModel(
        name="ou_shift",
        domain=REAL_LINE,
        params={"a": a, "lambda": lam, "y0": y0},
        log_initial_density=log_g,
        log_transition_density=log_p,
        log_closed_form_foed=log_foed,
        generator=gen,
        sampler=step,
        initial_sampler=init,
        marginal_moments=lambda t: (float(nu(t + a)), math.sqrt(float(ou_variance(lam, t + a)))),
        transition_moments=lambda t, x: (x * math.exp(-lam * t), math.sqrt(float(ou_variance(lam, t)))),
        gaussian=True,
    )


# --------------------------------------------------------------------------
# squared Bessel shift
# --------------------------------------------------------------------------

def besq_log_transition(delta: float):
    """Log transition density of a squared Bessel process of dimension delta."""
    order = delta / 2.0 - 1.0

    def log_p(t, x, y):
        t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
        out = np.full(t.shape, -np.inf)
        ok = (x > 0) & (y > 0)
        if ok.any():
            tt, xx, yy = t[ok], x[ok], y[ok]
            out[ok] = (
                -np.log(2.0 * tt)
                + 0.5 * order * (np.log(yy) - np.log(xx))
                - (xx + yy) / (2.0 * tt)
                + log_bessel_i(order, np.sqrt(xx * yy) / tt)
            )
        return out if out.shape else float(out)

    return log_p


def make_besq_shift(a: float, delta: float, y0: float) -> ProcessModel:
    """Squared Bessel process of dimension delta from y0 > 0, observed from time a on.

    Absorption at 0 (delta = 0) puts an atom at the origin that the densities
    here do not represent, so only delta > 0 is accepted.
    """
    a = _positive("a", a)
    delta = _positive("delta", delta)
    y0 = float(y0)
    if not y0 > 0 or not math.isfinite(y0):
        raise DomainError("the squared Bessel shift needs y0 > 0")
    order = delta / 2.0 - 1.0
    log_p = besq_log_transition(delta)

    def log_g(x):
        return log_p(a, y0, x)

    def log_foed(t, z):
        t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
        out = np.full(t.shape, np.nan)
        ok = z > 0
        if ok.any():
            tt, zz = t[ok], z[ok]
            r = np.sqrt(y0 * zz)
            out[ok] = (
                np.log(a / (a + tt))
                + (y0 + zz) * tt / (2.0 * a * (a + tt))
                + log_bessel_i(order, r / (tt + a))
                - log_bessel_i(order, r / a)
            )
        return out if out.shape else float(out)

    def gen(d, x, power):
        if power == 1:
            return 2.0 * x * d[2] + delta * d[1]
        return 4.0 * x * x * d[4] + 4.0 * x * (2.0 + delta) * d[3] + delta * (2.0 + delta) * d[2]

    def step(t, x, u):
        # Y/t is noncentral chi-square(delta, x/t): a Poisson(x/(2t)) mixture
        # of chi-square laws with delta + 2N degrees of freedom.
        x = np.asarray(x, dtype=float)
        n = stats.poisson.ppf(u[..., 0], x / (2.0 * t))
        shape = delta / 2.0 + n
        return 2.0 * t * special.gammaincinv(shape, u[..., 1])

    def init(u):
        return step(a, np.full(u.shape[:-1], y0), u)

    def moments(t):
        s = t + a
        return y0 + delta * s, math.sqrt(2.0 * delta * s * s + 4.0 * y0 * s)

    def trans(t, x):
        return x + delta * t, np.sqrt(2.0 * delta * t * t + 4.0 * np.abs(x) * t)

    return ProcessModel(
        name="besq_shift",
        domain=POSITIVE_HALF_LINE,
        params={"a": a, "delta": delta, "y0": y0},
        log_initial_density=log_g,
        log_transition_density=log_p,
        log_closed_form_foed=log_foed,
        generator=gen,
        sampler=step,
        initial_sampler=init,
        step_uniforms=2,
        initial_uniforms=2,
        marginal_moments=moments,
        transition_moments=trans,
    )


# --------------------------------------------------------------------------
# catalog and sampling
# --------------------------------------------------------------------------

_CATALOG = {
    "gauss_gauss": (make_gauss_gauss, ("a",), {}),
    "ou_shift": (make_ou_shift, ("a", "lambda", "y0"), {"y0": 0.0}),
    "besq_shift": (make_besq_shift, ("a", "delta", "y0"), {}),
}


def model_names() -> list[str]:
    return sorted(_CATALOG)


def build_model(name: str, params: Mapping[str, float]) -> ProcessModel:
    """Construct a catalog model from its name and a parameter map."""
    try:
        factory, names, defaults = _CATALOG[name]
    except KeyError:
        raise DomainError(f"unknown model {name!r}; choose from {model_names()}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise DomainError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    merged = {**defaults, **params}
    missing = [k for k in names if k not in merged]
    if missing:
        raise DomainError(f"missing parameter(s) for {name}: {missing}")
    return factory(*(float(merged[k]) for k in names))


def path_uniforms(model: ProcessModel, n_steps: int) -> int:
    """Number of uniforms consumed by one path with ``n_steps`` transitions."""
    return model.initial_uniforms + n_steps * model.step_uniforms


def sample_paths(model: ProcessModel, grid, n_paths: int, rng) -> np.ndarray:
    """Draw ``n_paths`` independent paths; returns shape (n_paths, n+1).

    Path i consumes the uniforms with counters ``[i*k, (i+1)*k)`` of the
    generator's remaining stream, where k = :func:`path_uniforms`, so
    splitting a batch into pieces reproduces the same numbers.
    """
    if model.sampler is None or model.initial_sampler is None:
        raise UnsupportedOperation(f"model {model.name!r} has no sampler")
    epochs = _epochs(grid)
    k = path_uniforms(model, len(epochs))
    u = rng.uniforms(n_paths * k).reshape(n_paths, k)
    out = np.empty((n_paths, len(epochs) + 1))
    out[:, 0] = model.initial_sampler(u[:, : model.initial_uniforms])
    col = model.initial_uniforms
    prev = 0.0
    for i, t in enumerate(epochs, start=1):
        out[:, i] = model.sampler(t - prev, out[:, i - 1], u[:, col: col + model.step_uniforms])
        col += model.step_uniforms
        prev = t
    return out


def sample_path(model: ProcessModel, grid, rng) -> np.ndarray:
    """One path (x_0, x_1, ..., x_n) observed at 0 and at the grid epochs."""
    return sample_paths(model, grid, 1, rng)[0]
