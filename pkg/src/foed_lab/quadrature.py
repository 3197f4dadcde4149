"""Deterministic integration, root finding and differencing.

Everything here works on numpy arrays.  Integrands receive a 1-D array of
abscissae and return either an array of the same length (scalar integrand)
or an array of shape ``batch + (len(x),)`` (a family of integrands sharing
one adaptive panel layout).  Infinite endpoints are handled by the rational
map ``x = base +/- S*u/(1-u)``; an explicit truncation ``window`` may be
passed instead when the caller knows an envelope for the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError, UnsupportedOperation

_EPS = np.finfo(float).eps
# Largest number of outer points batched into one nested inner integral.
_ND_BATCH_LIMIT = 8192
# Per-level Gauss order cap for nested rules; the tensor cost is (2n+1)^dims.
_ND_NODE_CAP = {1: None, 2: 32, 3: 15, 4: 7}


@dataclass(frozen=True)
class StateInterval:
    """Open real interval ``(lower, upper)``; either end may be infinite."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper) or not self.lower < self.upper:
            raise ValueError(f"degenerate interval ({self.lower}, {self.upper})")

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lower) & (x < self.upper)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def clip(self, lo: float, hi: float) -> tuple[float, float]:
        return max(lo, self.lower), min(hi, self.upper)


REAL_LINE = StateInterval()
POSITIVE_HALF_LINE = StateInterval(0.0, math.inf)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    # Tail mass tolerated when a caller truncates an infinite domain.
    truncation_mass: float = 1e-12
    gauss_nodes: int = 64

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "truncation_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_subdivisions < 1 or self.gauss_nodes < 1:
            raise ValueError("max_subdivisions and gauss_nodes must be positive")

    def refined(self, factor: float = 100.0) -> "QuadratureConfig":
        """Tighter tolerances and a larger budget, for refinement studies."""
        return replace(
            self,
            abs_tol=self.abs_tol / factor,
            rel_tol=self.rel_tol / factor,
            max_subdivisions=self.max_subdivisions * 4,
        )


@dataclass(frozen=True)
class RootFindConfig:
    bracket_lo: float = -10.0
    bracket_hi: float = 10.0
    x_tol: float = 1e-10
    max_iter: int = 200
    scan_points: int = 512

    def __post_init__(self):
        if not self.bracket_lo < self.bracket_hi:
            raise ValueError("bracket_lo must be below bracket_hi")
        if not self.x_tol > 0 or self.max_iter < 1 or self.scan_points < 2:
            raise ValueError("invalid root-finding settings")


DEFAULT_CONFIG = QuadratureConfig()


# --------------------------------------------------------------------------
# Gauss-Kronrod rules
# --------------------------------------------------------------------------

def _kronrod_recurrence(n: int, a0: np.ndarray, b0: np.ndarray):
    # Laurie's algorithm for the Jacobi-Kronrod matrix.
    a = np.zeros(2 * n + 1)
    b = np.zeros(2 * n + 1)
    k = np.arange(0, 3 * n // 2 + 1)
    a[k] = a0[k]
    k = np.arange(0, math.ceil(3 * n / 2) + 1)
    b[k] = b0[k]
    s = np.zeros(n // 2 + 2)
    t = np.zeros(n // 2 + 2)
    t[1] = b[n + 1]
    for m in range(0, n - 1):
        k = np.arange((m + 1) // 2, -1, -1)
        l = m - k
        s[k + 1] = np.cumsum((a[k + n + 1] - a[l]) * t[k + 1] + b[k + n + 1] * s[k] - b[l] * s[k + 1])
        s, t = t, s
    j = np.arange(n // 2, -1, -1)
    s[j + 1] = s[j]
    for m in range(n - 1, 2 * n - 2):
        k = np.arange(m + 1 - n, (m - 1) // 2 + 1)
        l = m - k
        j = n - 1 - l
        s[j + 1] = np.cumsum(-(a[k + n + 1] - a[l]) * t[j + 1] - b[k + n + 1] * s[j + 1] + b[l] * s[j + 2])
        j = j[-1]
        k = (m + 1) // 2
        if m % 2 == 0:
            a[k + n + 1] = a[k] + (s[j + 1] - b[k + n + 1] * s[j + 2]) / t[j + 2]
        else:
            b[k + n + 1] = s[j + 1] / s[j + 2]
        s, t = t, s
    a[2 * n] = a[n - 1] - b[2 * n] * s[1] / t[1]
    return a, b


@lru_cache(maxsize=None)
def gauss_kronrod_rule(n: int):
    """Nodes and weights of the (n, 2n+1) Gauss-Kronrod pair on [-1, 1].

    Returns ``(nodes, kronrod_weights, gauss_weights)``; the Gauss nodes are
    ``nodes[1::2]``.
    """
    if n < 1:
        raise ValueError("rule order must be positive")
    m = math.ceil(3 * n / 2) + 1
    kk = np.arange(1, m + 1, dtype=float)
    a0 = np.zeros(m + 1)
    b0 = np.empty(m + 1)
    b0[0] = 2.0
    b0[1:] = kk**2 / (4.0 * kk**2 - 1.0)
    a, b = _kronrod_recurrence(n, a0, b0)
    off = np.sqrt(b[1:])
    jac = np.diag(a) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jac)
    wk = b0[0] * vecs[0, :] ** 2
    nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry
    wk = 0.5 * (wk + wk[::-1])
    _, wg = np.polynomial.legendre.leggauss(n)
    for arr in (nodes, wk, wg):
        arr.setflags(write=False)
    return nodes, wk, wg


# --------------------------------------------------------------------------
# adaptive 1-D integration
# --------------------------------------------------------------------------

_FINITE, _RIGHT, _LEFT = 0, 1, 2


def _as_interval(interval) -> tuple[float, float]:
    if isinstance(interval, StateInterval):
        return float(interval.lower), float(interval.upper)
    lo, hi = interval
    return float(lo), float(hi)


def _segments(lo, hi, points, center, scale):
    if center is None:
        center = 0.0 if not math.isfinite(lo) or not math.isfinite(hi) else 0.5 * (lo + hi)
    scale = 1.0 if scale is None else float(scale)
    if not scale > 0:
        raise ValueError("scale hint must be positive")
    cuts = sorted({float(p) for p in points if lo < p < hi})
    if not math.isfinite(lo) and not math.isfinite(hi) and not cuts:
        cuts = [float(center)]
    edges = [lo] + cuts + [hi]
    segs = []
    for p, q in zip(edges[:-1], edges[1:]):
        if math.isfinite(p) and math.isfinite(q):
            segs.append((_FINITE, p, q - p))
        elif math.isfinite(p):
            segs.append((_RIGHT, p, max(scale, center - p)))
        elif math.isfinite(q):
            segs.append((_LEFT, q, max(scale, q - center)))
        else:  # pragma: no cover - excluded by the cut above
            raise AssertionError
    return segs


def _map(kind, base, S, u):
    finite = kind == _FINITE
    w = np.where(finite, 0.0, u)
    r = w / (1.0 - w)
    jac = np.where(finite, S, S / (1.0 - w) ** 2)
    x = np.where(finite, base + S * u, np.where(kind == _RIGHT, base + S * r, base - S * r))
    return x, jac


def integrate_batch(
    f: Callable[[np.ndarray], np.ndarray],
    interval,
    cfg: QuadratureConfig | None = None,
    *,
    points: Sequence[float] = (),
    center: float | None = None,
    scale: float | None = None,
    window: tuple[float, float] | None = None,
    full_output: bool = False,
):
    """Integrate a family of integrands sharing one adaptive panel layout.

    ``f(x)`` must return shape ``batch + (len(x),)``; the result has shape
    ``batch``.  The loop stops once every member satisfies
    ``err <= max(abs_tol, rel_tol*|I|)``.  ``points`` are interior break
    points (jumps, kinks); ``center``/``scale`` shape the map used for
    infinite ends.  With ``full_output`` the error estimates and the panel
    count are returned as well.
    """
    cfg = cfg or DEFAULT_CONFIG
    lo, hi = _as_interval(interval)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
        if not lo < hi:
            raise ValueError("truncation window does not meet the interval")
    nodes, wk, wg = gauss_kronrod_rule(cfg.gauss_nodes)
    segs = _segments(lo, hi, points, center, scale)
    kind = np.array([s[0] for s in segs])
    base = np.array([s[1] for s in segs], dtype=float)
    S = np.array([s[2] for s in segs], dtype=float)
    ua = np.zeros(len(segs))
    ub = np.ones(len(segs))
    batch_shape = None

    def evaluate(kind, base, S, ua, ub):
        nonlocal batch_shape
        half = 0.5 * (ub - ua)
        u = (0.5 * (ua + ub))[:, None] + half[:, None] * nodes[None, :]
        x, jac = _map(kind[:, None], base[:, None], S[:, None], u)
        vals = np.asarray(f(x.ravel()), dtype=float)
        if batch_shape is None:
            batch_shape = vals.shape[:-1]
        vals = vals.reshape((-1,) + x.shape) * jac
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand returned non-finite values")
        ik = half * (vals @ wk)
        ig = half * (vals[..., 1::2] @ wg)
        resabs = half * (np.abs(vals) @ wk)
        err = np.maximum(np.abs(ik - ig), 50.0 * _EPS * resabs)
        return ik, err

    ik, err = evaluate(kind, base, S, ua, ub)
    while True:
        total = ik.sum(axis=-1)
        total_err = err.sum(axis=-1)
        tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            break
        npan = ik.shape[-1]
        if npan >= cfg.max_subdivisions:
            est = total.reshape(batch_shape)
            raise QuadratureError(
                f"no convergence after {npan} panels (error {float(total_err.max()):.3e})",
                estimate=est if batch_shape else float(est),
                error=total_err.reshape(batch_shape),
            )
        norm = (err / tol[:, None]).max(axis=0)
        sel = np.flatnonzero(norm > 1.0 / npan)
        room = max(1, (cfg.max_subdivisions - npan))
        if sel.size > room:
            sel = np.sort(np.argsort(-norm, kind="stable")[:room])
        keep = np.setdiff1d(np.arange(npan), sel)
        mid = 0.5 * (ua[sel] + ub[sel])
        nk = np.concatenate([kind[sel], kind[sel]])
        nb = np.concatenate([base[sel], base[sel]])
        ns = np.concatenate([S[sel], S[sel]])
        na = np.concatenate([ua[sel], mid])
        nz = np.concatenate([mid, ub[sel]])
        new_ik, new_err = evaluate(nk, nb, ns, na, nz)
        kind = np.concatenate([kind[keep], nk])
        base = np.concatenate([base[keep], nb])
        S = np.concatenate([S[keep], ns])
        ua = np.concatenate([ua[keep], na])
        ub = np.concatenate([ub[keep], nz])
        ik = np.concatenate([ik[:, keep], new_ik], axis=-1)
        err = np.concatenate([err[:, keep], new_err], axis=-1)

    result = total.reshape(batch_shape)
    if not batch_shape:
        result = float(result)
    if full_output:
        return result, total_err.reshape(batch_shape), ik.shape[-1]
    return result


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    interval=REAL_LINE,
    cfg: QuadratureConfig | None = None,
    *,
    points: Sequence[float] = (),
    center: float | None = None,
    scale: float | None = None,
    window: tuple[float, float] | None = None,
    full_output: bool = False,
):
    """Adaptive Gauss-Kronrod integral of a vectorised scalar integrand.

    >>> round(integrate_1d(lambda x: np.exp(-x), (0.0, np.inf)), 12)
    1.0
    """

    def g(x):
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)

    return integrate_batch(
        g, interval, cfg, points=points, center=center, scale=scale,
        window=window, full_output=full_output,
    )


def integrate_nd(
    f: Callable[..., np.ndarray],
    intervals: Sequence,
    cfg: QuadratureConfig | None = None,
    *,
    points: Sequence[Sequence[float]] | None = None,
    centers: Sequence[float | None] | None = None,
    scales: Sequence[float | None] | None = None,
) -> float:
    """Nested adaptive quadrature of ``f(x_1, ..., x_n)`` for n <= 4.

    The outermost variable comes first.  Each level is an adaptive
    Gauss-Kronrod integral over a batch of outer points; the tolerances are
    divided by sqrt(n) per level and the Gauss order per level is capped
    (64/32/15/7 for n = 1..4) because the work grows like (2m+1)^n.
    """
    cfg = cfg or DEFAULT_CONFIG
    n = len(intervals)
    if n < 1:
        raise ValueError("need at least one interval")
    if n > 4:
        raise UnsupportedOperation(f"integrate_nd supports n <= 4, got {n}")
    points = list(points) if points is not None else [()] * n
    centers = list(centers) if centers is not None else [None] * n
    scales = list(scales) if scales is not None else [None] * n
    if n == 1:
        return integrate_1d(f, intervals[0], cfg, points=points[0], center=centers[0], scale=scales[0])

    split = math.sqrt(n)
    cap = _ND_NODE_CAP[n]
    level_cfg = replace(
        cfg,
        abs_tol=cfg.abs_tol / split,
        rel_tol=cfg.rel_tol / split,
        gauss_nodes=min(cfg.gauss_nodes, cap),
    )

    def level(k: int, outer: list[np.ndarray]):
        bshape = outer[0].shape if outer else ()
        bsize = int(np.prod(bshape)) if bshape else 1

        def integrand(x):
            if k == n - 1:
                args = [o[..., None] for o in outer] + [x]
                return np.broadcast_to(np.asarray(f(*args), dtype=float), bshape + x.shape)
            out = np.empty(bshape + x.shape)
            chunk = max(1, _ND_BATCH_LIMIT // bsize)
            for s in range(0, x.size, chunk):
                xs = x[s:s + chunk]
                shape = bshape + xs.shape
                inner = [np.broadcast_to(o[..., None], shape) for o in outer]
                inner.append(np.broadcast_to(xs, shape))
                out[..., s:s + chunk] = level(k + 1, inner)
            return out

        return integrate_batch(
            integrand, intervals[k], level_cfg,
            points=points[k], center=centers[k], scale=scales[k],
        )

    return float(level(0, []))


def integrate_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ix,
    iy,
    cfg: QuadratureConfig | None = None,
    *,
    points: Sequence[Sequence[float]] | None = None,
    centers: Sequence[float | None] | None = None,
    scales: Sequence[float | None] | None = None,
) -> float:
    """Iterated adaptive integral of ``f(x, y)``: outer over x, inner over y."""
    return integrate_nd(f, [ix, iy], cfg, points=points, centers=centers, scales=scales)


# --------------------------------------------------------------------------
# roots and derivatives
# --------------------------------------------------------------------------

def find_roots(f: Callable[[np.ndarray], np.ndarray], cfg: RootFindConfig | None = None) -> list[float]:
    """Sign-change scan followed by bisection.

    ``f`` is called with arrays.  Roots where f touches zero without changing
    sign are invisible to the scan.
    """
    cfg = cfg or RootFindConfig()
    xs = np.linspace(cfg.bracket_lo, cfg.bracket_hi, cfg.scan_points)
    fx = np.asarray(f(xs), dtype=float)
    roots = list(xs[fx == 0.0])
    change = np.flatnonzero(np.sign(fx[:-1]) * np.sign(fx[1:]) < 0)
    if change.size:
        lo = xs[change].copy()
        hi = xs[change + 1].copy()
        flo = fx[change].copy()
        for _ in range(cfg.max_iter):
            if np.all(hi - lo <= cfg.x_tol):
                break
            mid = 0.5 * (lo + hi)
            fm = np.asarray(f(mid), dtype=float)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left, hi, mid)
            exact = fm == 0.0
            lo = np.where(exact, mid, lo)
            hi = np.where(exact, mid, hi)
        roots.extend(0.5 * (lo + hi))
    return sorted(float(r) for r in roots)


def _stencil(f, x, order, h, side):
    if side == 0:
        if order == 1:
            return (f(x + h) - f(x - h)) / (2.0 * h)
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    # second-order one-sided stencils; side=+1 looks right, -1 looks left
    hs = side * h
    f0, f1, f2 = f(x), f(x + hs), f(x + 2 * hs)
    if order == 1:
        return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * hs)
    f3 = f(x + 3 * hs)
    return (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h)


def derivative_fd(
    f: Callable,
    x: float,
    order: int = 1,
    h: float | None = None,
    *,
    lower: float | None = None,
    upper: float | None = None,
    richardson: bool = False,
):
    """Finite-difference derivative of order 1 or 2.

    Central differences by default; when the stencil would leave
    ``[lower, upper]`` a second-order one-sided stencil is used instead.
    ``richardson`` combines steps h and h/2 to cancel the leading h^2 term.
    ``f`` may return arrays (differentiation is elementwise).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = float(x)
    if h is None:
        h = max(1e-5, 1e-5 * abs(x))
    if not h > 0:
        raise ValueError("step must be positive")
    reach = h * (3 if order == 2 else 2)
    side = 0
    if lower is not None and x - h < lower:
        side = 1
        if upper is not None and x + reach > upper:
            raise ValueError("interval too short for a one-sided stencil")
    elif upper is not None and x + h > upper:
        side = -1
    d = _stencil(f, x, order, h, side)
    if richardson:
        d2 = _stencil(f, x, order, 0.5 * h, side)
        d = (4.0 * d2 - d) / 3.0
    return d
