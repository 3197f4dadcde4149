"""Kolmogorov distance between X_t and a Brownian motion started from the law of X_0.

With psi(x) = P(X_t <= x) - P(B_t <= x) the distance is sup |psi|.  The
derivative of psi is the density difference

    mu_t(x) - E g(x + sqrt(t) G),   G standard normal,

so the supremum sits at a zero of that difference (:func:`xocon_residual`)
unless psi vanishes identically.  :func:`kolmogorov_distance_foed` evaluates
|psi| on those zeros; :func:`kolmogorov_distance_grid` scans a dense grid and
serves as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .foed import log_foed_exponent, log_marginal_density
from .models import ProcessModel, make_ou_shift
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, RootFindConfig, derivative_fd, find_roots, integrate_1d, integrate_batch

# tolerated disagreement between the two distances before the root route is
# marked incomplete
_AGREEMENT = 1e-6
# residuals below this everywhere on the scan mean psi is identically zero
_FLAT = 1e-12


@dataclass(frozen=True)
class KolmogorovQuery:
    """One distance computation.

    ``brownian_initial`` may be given as a log density to document the
    comparator; it must coincide with the model's initial density.
    """

    model: ProcessModel
    t: float
    scan: RootFindConfig | None = None
    brownian_initial: Callable | None = None

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("the Kolmogorov distance needs t > 0")
        if self.brownian_initial is not None:
            center, scale = self.model.marginal_moments(0.0)
            z = center + scale * np.linspace(-6.0, 6.0, 97)
            z = z[self.model.domain.contains(z)]
            mine = np.asarray(self.model.log_initial_density(z), dtype=float)
            other = np.asarray(self.brownian_initial(z), dtype=float)
            if not np.allclose(mine, other, rtol=1e-10, atol=1e-12):
                raise DomainError("the Brownian comparator must start from the model's initial law")


@dataclass(frozen=True)
class KolmogorovReport:
    t: float
    distance_foed: float
    distance_grid: float
    critical_points: list[float]
    psi_at_critical: list[float]
    psi_prime_at_critical: list[float]
    split_form_gap: float
    agreement_gap: float
    status: str
    bracket: tuple[float, float]
    tail_values: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def distance(self) -> float:
        """The root-based value, or the grid value when roots missed the supremum."""
        return self.distance_grid if self.status == "incomplete" else self.distance_foed

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "distance": self.distance,
            "distance_foed": self.distance_foed,
            "distance_grid": self.distance_grid,
            "critical_points": list(self.critical_points),
            "psi_at_critical": list(self.psi_at_critical),
            "psi_prime_at_critical": list(self.psi_prime_at_critical),
            "split_form_gap": self.split_form_gap,
            "agreement_gap": self.agreement_gap,
            "status": self.status,
            "bracket": list(self.bracket),
            "tail_values": list(self.tail_values),
            "meta": dict(self.meta),
        }


def scan_bracket(model: ProcessModel, t: float, width: float = 12.0) -> RootFindConfig:
    """Mean +- width standard deviations, covering the initial and both time-t laws."""
    m0, s0 = model.marginal_moments(0.0)
    mt, st = model.marginal_moments(t)
    sd = max(s0, st, math.sqrt(s0 * s0 + t))
    return RootFindConfig(bracket_lo=min(m0, mt) - width * sd, bracket_hi=max(m0, mt) + width * sd,
                          scan_points=1024)


def _split(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return x.ravel(), x.shape


def psi_fn(model: ProcessModel, t: float, x, cfg: QuadratureConfig | None = None, mode: str = "auto"):
    """P(X_t <= x) - P(B_t <= x), B a Brownian motion started from the law of X_0.

    The law of X_t is g * E(t, .).  Points left of the centre use lower-tail
    integrals and the rest upper-tail integrals, so both ends are resolved
    to absolute accuracy.
    """
    t = float(t)
    if not t > 0:
        raise DomainError("psi needs t > 0")
    cfg = cfg or DEFAULT_CONFIG
    xs, shape = _split(x)
    mt, st = model.marginal_moments(t)
    m0, s0 = model.marginal_moments(0.0)
    rt = math.sqrt(t)
    out = np.empty(xs.size)
    for upper in (False, True):
        sel = xs > mt if upper else xs <= mt
        if not sel.any():
            continue
        xv = xs[sel]
        sign = -1.0 if upper else 1.0

        def mass(u, xv=xv, sign=sign):
            # law of X_t on (-inf, x] or [x, inf), written with u = |z - x|
            z = xv[:, None] - sign * u[None, :]
            return np.exp(log_marginal_density(model, t, z, cfg, mode))

        def brownian(z, xv=xv, sign=sign):
            return np.exp(model.log_initial_density(z)[None, :]
                          + special.log_ndtr(sign * (xv[:, None] - z[None, :]) / rt))

        first = integrate_batch(mass, (0.0, math.inf), cfg, center=0.0, scale=st)
        second = integrate_batch(brownian, model.domain, cfg, center=m0, scale=s0)
        out[sel] = sign * (np.asarray(first) - np.asarray(second))
    out = out.reshape(shape)
    return out if np.ndim(x) else float(out[0])


def xocon_residual(model: ProcessModel, t: float, x, cfg: QuadratureConfig | None = None, mode: str = "auto",
                   simplified: bool = False):
    """g(x) E(t, x) - E[1{G <= 0} (g(x - sqrt(t) G) + g(x + sqrt(t) G))].

    The expectation is an integral over u < 0 against the normal density.
    With ``simplified`` it is computed instead as int g(z) phi_t(x - z) dz,
    which equals it by symmetry of G.
    """
    t = float(t)
    if not t > 0:
        raise DomainError("the residual needs t > 0")
    cfg = cfg or DEFAULT_CONFIG
    xs, shape = _split(x)
    rt = math.sqrt(t)
    lead = np.exp(log_marginal_density(model, t, xs, cfg, mode))
    if simplified:
        m0, s0 = model.marginal_moments(0.0)

        def conv(z):
            d = (xs[:, None] - z[None, :]) / rt
            return np.exp(model.log_initial_density(z)[None, :] - 0.5 * d * d) / math.sqrt(2.0 * math.pi * t)

        tail = integrate_batch(conv, model.domain, cfg, center=m0, scale=s0)
    else:
        def half(u):
            phi = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
            left = np.exp(model.log_initial_density(xs[:, None] - rt * u[None, :]))
            right = np.exp(model.log_initial_density(xs[:, None] + rt * u[None, :]))
            return phi[None, :] * (left + right)

        tail = integrate_batch(half, (-math.inf, 0.0), cfg, center=0.0, scale=1.0)
    out = (lead - np.asarray(tail)).reshape(shape)
    return out if np.ndim(x) else float(out[0])


def split_form(model: ProcessModel, t: float, x0: float, cfg: QuadratureConfig | None = None,
               mode: str = "auto") -> float:
    """int_{-inf}^{x0} (E(t,z) - Phi((x0-z)/sqrt t)) g dz - int_{x0}^{inf} Phi((x0-z)/sqrt t) g dz."""
    rt = math.sqrt(float(t))
    m0, s0 = model.marginal_moments(0.0)
    lo, hi = model.domain.lower, model.domain.upper

    def left(z):
        lg = model.log_initial_density(z)
        return np.exp(lg + log_foed_exponent(model, t, z, cfg, mode)) - np.exp(lg + special.log_ndtr((x0 - z) / rt))

    def right(z):
        return np.exp(model.log_initial_density(z) + special.log_ndtr((x0 - z) / rt))

    first = integrate_1d(left, (lo, min(x0, hi)), cfg, center=m0, scale=s0) if x0 > lo else 0.0
    second = integrate_1d(right, (max(x0, lo), hi), cfg, center=m0, scale=s0) if x0 < hi else 0.0
    return first - second


def _local_maxima(values: np.ndarray, keep: int = 8) -> np.ndarray:
    a = np.abs(values)
    inner = np.flatnonzero((a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:])) + 1
    cand = np.concatenate([inner, [0, a.size - 1]])
    order = np.argsort(-a[cand], kind="stable")
    return np.unique(cand[order[:keep]])


def kolmogorov_distance_grid(model: ProcessModel, t: float, cfg: QuadratureConfig | None = None,
                             mode: str = "auto", *, points: int = 4096, refinements: int = 2,
                             bracket: RootFindConfig | None = None) -> float:
    """sup |psi| on an evenly spaced grid, refined twice around the largest local maxima."""
    b = bracket or scan_bracket(model, t)
    xs = np.linspace(b.bracket_lo, b.bracket_hi, points)
    vals = np.asarray(psi_fn(model, t, xs, cfg, mode))
    best = float(np.abs(vals).max())
    for _ in range(refinements):
        step = xs[1] - xs[0] if xs.size > 1 else 0.0
        fine = []
        for i in _local_maxima(vals):
            fine.append(np.linspace(xs[i] - step, xs[i] + step, 65))
        xs = np.unique(np.clip(np.concatenate(fine), b.bracket_lo, b.bracket_hi))
        vals = np.asarray(psi_fn(model, t, xs, cfg, mode))
        best = max(best, float(np.abs(vals).max()))
    return best


def kolmogorov_distance_foed(model: ProcessModel, t: float, cfg: QuadratureConfig | None = None,
                             mode: str = "auto", *, scan: RootFindConfig | None = None,
                             grid_points: int = 4096) -> KolmogorovReport:
    """max |psi| over the zeros of :func:`xocon_residual`, checked against the grid scan.

    ``status`` is ``"ok"``, ``"degenerate"`` when the residual vanishes on the
    whole scan (psi is then identically zero and the scan maximum is
    returned) or ``"incomplete"`` when the grid finds a larger value than the
    roots do (a tangency the sign scan cannot see).
    """
    t = float(t)
    query = KolmogorovQuery(model, t, scan)
    b = query.scan or scan_bracket(model, t)
    xs = np.linspace(b.bracket_lo, b.bracket_hi, b.scan_points)
    res = np.asarray(xocon_residual(model, t, xs, cfg, mode))
    scale = float(np.abs(res).max())
    tails = psi_fn(model, t, np.array([b.bracket_lo, b.bracket_hi]), cfg, mode)
    grid = kolmogorov_distance_grid(model, t, cfg, mode, points=grid_points, bracket=b)
    meta = {"residual_max": scale, "scan_points": b.scan_points}
    if scale <= _FLAT:
        psi_scan = np.asarray(psi_fn(model, t, xs, cfg, mode))
        d = float(np.abs(psi_scan).max())
        return KolmogorovReport(t, d, grid, [], [], [], 0.0, abs(d - grid), "degenerate",
                                (b.bracket_lo, b.bracket_hi), (float(tails[0]), float(tails[1])), meta)

    def f(x):
        return xocon_residual(model, t, x, cfg, mode)

    roots = find_roots(f, b)
    # drop sign changes of rounding noise far out in the tails
    delta = (b.bracket_hi - b.bracket_lo) / b.scan_points
    if roots:
        r = np.asarray(roots)
        near = np.maximum(np.abs(f(r - delta)), np.abs(f(r + delta)))
        roots = [float(x) for x in r[near > 1e-10 * scale]]
    psi_r = [float(v) for v in np.atleast_1d(psi_fn(model, t, np.asarray(roots), cfg, mode))] if roots else []
    st = model.marginal_moments(t)[1]
    h = 1e-2 * st
    dpsi = [float(derivative_fd(lambda x: psi_fn(model, t, x, cfg, mode), x0, 1, h, richardson=True))
            for x0 in roots]
    split_gap = max((abs(split_form(model, t, x0, cfg, mode) - p) for x0, p in zip(roots, psi_r)), default=0.0)
    d = max((abs(p) for p in psi_r), default=0.0)
    status = "ok" if grid <= d + _AGREEMENT else "incomplete"
    return KolmogorovReport(t, d, grid, roots, psi_r, dpsi, float(split_gap), abs(d - grid), status,
                            (b.bracket_lo, b.bracket_hi), (float(tails[0]), float(tails[1])), meta)


def lambda_sweep(a: float, t: float, lambdas: Sequence[float], y0: float = 0.0,
                 cfg: QuadratureConfig | None = None) -> list[dict]:
    """Distances for OU-shift models over a range of mean-reversion rates."""
    rows = []
    for lam in lambdas:
        rep = kolmogorov_distance_foed(make_ou_shift(a, lam, y0), t, cfg)
        rows.append({"lambda": float(lam), "distance": rep.distance, "status": rep.status})
    return rows


__all__ = [
    "KolmogorovQuery", "KolmogorovReport", "kolmogorov_distance_foed", "kolmogorov_distance_grid",
    "lambda_sweep", "psi_fn", "scan_bracket", "split_form", "xocon_residual",
]
