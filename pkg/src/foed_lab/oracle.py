"""Independent ground truth: forward chain rule, Monte Carlo, Gaussian laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, UnsupportedOperation
from .functions import as_function
from .models import ProcessModel, TimeGrid, ou_variance, path_uniforms, sample_paths
from .quadrature import QuadratureConfig, integrate_1d, integrate_batch, integrate_nd
from .rng import CounterRNG


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_samples": self.n_samples, "seed": self.seed}


@dataclass(frozen=True)
class GaussianVector:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match the mean")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


def _grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def _forward_tensor(model, fs, incs, times, cfg) -> float:
    n = len(incs)

    def integrand(*z):
        logw = model.log_initial_density(z[0])
        for i in range(1, n + 1):
            logw = logw + model.log_transition_density(incs[i - 1], z[i - 1], z[i])
        val = np.exp(logw)
        for f, zi in zip(fs, z):
            val = val * f(zi)
        return val

    moments = [model.marginal_moments(t) for t in times]
    return integrate_nd(
        integrand, [model.domain] * (n + 1), cfg,
        points=[list(f.breakpoints) for f in fs],
        centers=[m[0] for m in moments], scales=[m[1] for m in moments],
    )


def _forward_chain(model, fs, incs, times, cfg) -> float:
    # h_n = f_n and h_k(z) = f_k(z) int p_{dt}(z, y) h_{k+1}(y) dy, so the
    # integral at level k+1 depends on z only and is evaluated once per node.
    # A node is skipped when its largest path density times the bound on the
    # remaining product is below 1e-4 * abs_tol: it cannot move the result.
    cfg = cfg or QuadratureConfig()
    n = len(incs)
    bounds = [1.0] * (n + 2)
    for k in range(n, -1, -1):
        bounds[k] = bounds[k + 1] * fs[k].sup_bound
    cut = 1e-4 * cfg.abs_tol
    moments = [model.marginal_moments(t) for t in times]

    def h(k, z, weight):
        fz = fs[k](z)
        if k == n:
            return fz
        out = np.zeros(z.shape)
        w = weight * np.abs(fz)
        live = w * bounds[k + 1] >= cut if math.isfinite(bounds[k + 1]) else w > 0
        if not live.any():
            return out
        zl, wl = z[live], w[live]
        dt = incs[k]

        def integrand(y):
            p = np.exp(model.log_transition_density(dt, zl[:, None], y[None, :]))
            return p * h(k + 1, y, (wl[:, None] * p).max(axis=0))[None, :]

        out[live] = fz[live] * integrate_batch(
            integrand, model.domain, cfg, points=fs[k + 1].breakpoints,
            center=moments[k + 1][0], scale=moments[k + 1][1],
        )
        return out

    def top(z):
        g = model.initial_density(z)
        return g * h(0, z, g)

    return integrate_1d(top, model.domain, cfg, points=fs[0].breakpoints,
                        center=moments[0][0], scale=moments[0][1])


def fdd_forward(model: ProcessModel, f_list: Sequence, grid, cfg: QuadratureConfig | None = None,
                engine: str = "chain") -> float:
    """E f_0(X_0) prod f_i(X_{t_i}) by the forward chain rule.

    The integrand is f_0(z_0) g(z_0) prod_i f_i(z_i) p_{t_i - t_{i-1}}(z_{i-1}, z_i)
    over (z_0, ..., z_n), n + 1 <= 4.  ``engine="tensor"`` hands the whole
    product to :func:`integrate_nd`; the default ``"chain"`` evaluates the
    same iterated integral level by level, using that each inner integral
    depends only on the preceding state, which makes the cost additive in n.
    """
    grid = _grid(grid)
    fs = [as_function(f) for f in f_list]
    n = len(grid)
    if len(fs) != n + 1:
        raise ValueError("need n + 1 functions f_0..f_n")
    if n + 1 > 4:
        raise UnsupportedOperation("the forward oracle integrates at most 4 dimensions")
    times = (0.0,) + grid.epochs
    if engine == "chain":
        return _forward_chain(model, fs, grid.increments, times, cfg)
    if engine == "tensor":
        return _forward_tensor(model, fs, grid.increments, times, cfg)
    raise ValueError("engine must be 'chain' or 'tensor'")


def fdd_monte_carlo(model: ProcessModel, f_list: Sequence, grid, n_samples: int, seed: int,
                    chunk: int = 200_000) -> MCEstimate:
    """Sample mean of f_0(X_0) prod f_i(X_{t_i}) over exact paths.

    Paths are drawn in chunks from one counter stream; the chunk size does
    not change the result.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    epochs = grid.epochs if isinstance(grid, TimeGrid) else tuple(grid)
    fs = [as_function(f) for f in f_list]
    if len(fs) != len(epochs) + 1:
        raise ValueError("need n + 1 functions f_0..f_n")
    per_path = path_uniforms(model, len(epochs))
    values = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        m = min(chunk, n_samples - start)
        rng = CounterRNG(seed, start * per_path)
        paths = sample_paths(model, epochs, m, rng)
        val = np.ones(m)
        for i, f in enumerate(fs):
            val = val * f(paths[:, i])
        values[start:start + m] = val
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    return MCEstimate(mean, se, n_samples, int(seed))


def gaussian_joint(model: ProcessModel, epochs: Sequence[float]) -> GaussianVector:
    """Joint law of (X_s) at the given epochs (0 allowed) for the Gaussian models."""
    ep = np.asarray(epochs, dtype=float)
    if np.any(ep < 0):
        raise DomainError("epochs must be nonnegative")
    a = model.params.get("a")
    s, t = np.meshgrid(ep, ep, indexing="ij")
    if model.name == "gauss_gauss":
        return GaussianVector(np.zeros(ep.size), np.minimum(s, t) + a)
    if model.name == "ou_shift":
        lam, y0 = model.params["lambda"], model.params["y0"]
        mean = y0 * np.exp(-lam * (ep + a))
        cov = np.exp(-lam * np.abs(t - s)) * ou_variance(lam, np.minimum(s, t) + a)
        return GaussianVector(mean, cov)
    raise UnsupportedOperation(f"no closed-form joint law for model {model.name!r}")


def gaussian_condition(joint: GaussianVector, observed_indices: Sequence[int],
                       observed_values: Sequence[float]) -> GaussianVector:
    """Condition a Gaussian vector on some coordinates (Schur complement).

    The result keeps all coordinates; observed ones become point masses.
    The observed block is factorised by Cholesky without pivoting and a
    failed factorisation is an error.
    """
    idx = np.asarray(observed_indices, dtype=int)
    vals = np.asarray(observed_values, dtype=float)
    if idx.size != vals.size or idx.size == 0:
        raise ValueError("need matching, non-empty index and value lists")
    d = joint.mean.size
    rest = np.setdiff1d(np.arange(d), idx)
    cov = joint.covariance
    try:
        chol = linalg.cho_factor(cov[np.ix_(idx, idx)], lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise DomainError(f"observed covariance block is singular: {exc}") from None
    cross = cov[np.ix_(rest, idx)]
    gain = linalg.cho_solve(chol, cross.T).T
    mean = joint.mean.copy()
    mean[rest] = joint.mean[rest] + gain @ (vals - joint.mean[idx])
    mean[idx] = vals
    new_cov = np.zeros_like(cov)
    block = cov[np.ix_(rest, rest)] - gain @ cross.T
    new_cov[np.ix_(rest, rest)] = 0.5 * (block + block.T)
    return GaussianVector(mean, new_cov)


def gaussian_expectation(vec: GaussianVector, f_list: Sequence, cfg: QuadratureConfig | None = None) -> float:
    """E prod f_i(Y_i) for a Gaussian vector Y, one function per coordinate.

    Constant functions drop out, zero-variance coordinates are evaluated at
    their mean and the rest is integrated against the joint density
    (at most 4 dimensions).
    """
    fs = [as_function(f) for f in f_list]
    if len(fs) != vec.mean.size:
        raise ValueError("need one function per coordinate")
    factor = 1.0
    live = []
    tiny = 1e-13 * max(1.0, float(np.abs(vec.covariance).max()))
    for i, f in enumerate(fs):
        if f.is_constant:
            factor *= float(f(0.0))
        elif vec.covariance[i, i] <= tiny:
            factor *= float(f(vec.mean[i]))
        else:
            live.append(i)
    if not live or factor == 0.0:
        return factor
    if len(live) > 4:
        raise UnsupportedOperation("at most 4 non-degenerate coordinates")
    idx = np.asarray(live)
    mean = vec.mean[idx]
    cov = vec.covariance[np.ix_(idx, idx)]
    try:
        chol = linalg.cho_factor(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise DomainError(f"covariance of the live coordinates is singular: {exc}") from None
    log_norm = -0.5 * idx.size * math.log(2.0 * math.pi) - np.log(np.diag(chol[0])).sum()
    live_fs = [fs[i] for i in live]

    def integrand(*z):
        shape = np.broadcast_shapes(*(np.shape(zi) for zi in z))
        d = np.stack([np.broadcast_to(zi, shape) - m for zi, m in zip(z, mean)], axis=-1)
        quad = np.einsum("...i,...i->...", d, linalg.cho_solve(chol, d.reshape(-1, idx.size).T).T.reshape(d.shape))
        val = np.exp(log_norm - 0.5 * quad)
        for f, zi in zip(live_fs, z):
            val = val * f(zi)
        return val

    sd = np.sqrt(np.diag(cov))
    value = integrate_nd(integrand, [(-math.inf, math.inf)] * idx.size, cfg,
                         points=[list(f.breakpoints) for f in live_fs],
                         centers=list(mean), scales=list(sd))
    return factor * value


def gaussian_conditional_expectation(model: ProcessModel, f_list: Sequence, grid, s: float, w: float,
                                     cfg: QuadratureConfig | None = None) -> float:
    """E[f_0(X_0) prod f_i(X_{t_i}) | X_T = w] with T = s + t_1 + ... + t_n.

    Built from :func:`gaussian_joint` and :func:`gaussian_condition`; only the
    Gaussian zoo members are supported.
    """
    epochs = grid.epochs if isinstance(grid, TimeGrid) else tuple(float(t) for t in grid)
    fs = list(f_list)
    if len(fs) != len(epochs) + 1:
        raise ValueError("need n + 1 functions f_0..f_n")
    big_t = float(s) + sum(epochs)
    joint = gaussian_joint(model, (0.0,) + tuple(epochs) + (big_t,))
    cond = gaussian_condition(joint, [len(epochs) + 1], [w])
    k = len(epochs) + 1
    sub = GaussianVector(cond.mean[:k], cond.covariance[:k, :k])
    return gaussian_expectation(sub, fs, cfg)


def bivariate_orthant(rho: float) -> float:
    """P(Y_1 <= 0, Y_2 <= 0) for centred normals with correlation rho."""
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


def trivariate_orthant(corr: np.ndarray) -> float:
    """P(Y_1 <= 0, Y_2 <= 0, Y_3 <= 0) for centred normals with correlation matrix corr."""
    c = np.asarray(corr, dtype=float)
    return 0.125 + (math.asin(c[0, 1]) + math.asin(c[0, 2]) + math.asin(c[1, 2])) / (4.0 * math.pi)


def correlation(cov: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.diag(cov))
    return cov / np.outer(sd, sd)
