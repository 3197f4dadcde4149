"""Closed catalog of named test functions with derivatives and metadata.

A :class:`TestFunction` knows its derivatives (when smooth), the points where
it jumps (so quadrature can split there) and a bound on its absolute value.
Plain callables are accepted anywhere a test function is expected and are
wrapped by :func:`as_function`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import special

from .errors import ConfigError, UnsupportedOperation


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray, int], np.ndarray] | None = None
    max_order: int = 0
    breakpoints: tuple[float, ...] = ()
    sup_bound: float = math.inf
    params: Mapping[str, float] = field(default_factory=dict)
    is_constant: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape)

    def derivs(self, x, order: int) -> list[np.ndarray]:
        """``[f(x), f'(x), ..., f^(order)(x)]``."""
        if order > self.max_order or (order > 0 and self.derivative is None):
            raise UnsupportedOperation(f"{self.name} has no derivative of order {order}")
        x = np.asarray(x, dtype=float)
        out = [self(x)]
        for k in range(1, order + 1):
            out.append(np.broadcast_to(np.asarray(self.derivative(x, k), dtype=float), x.shape))
        return out


def _gauss_shape(center: float, width: float, name: str, params) -> TestFunction:
    # exp(-((x-c)/(sqrt(2) w))^2); d^k/du^k e^{-u^2} = (-1)^k H_k(u) e^{-u^2}
    s = math.sqrt(2.0) * width

    def f(x):
        u = (x - center) / s
        return np.exp(-u * u)

    def d(x, k):
        u = (x - center) / s
        return (-1) ** k * special.eval_hermite(k, u) * np.exp(-u * u) / s**k

    return TestFunction(name, f, d, 8, (), 1.0, dict(params))


def indicator(c: float = 0.0) -> TestFunction:
    """1 on (-inf, c], 0 elsewhere."""
    c = float(c)
    return TestFunction("indicator", lambda x: (x <= c).astype(float), None, 0, (c,), 1.0, {"c": c})


def exp_neg_sq() -> TestFunction:
    """exp(-x^2)."""
    return _gauss_shape(0.0, math.sqrt(0.5), "exp_neg_sq", {})


def gaussian_bump(center: float = 0.0, width: float = 1.0) -> TestFunction:
    """exp(-(x-center)^2 / (2 width^2))."""
    width = float(width)
    if not width > 0:
        raise ConfigError("gaussian_bump width must be positive")
    return _gauss_shape(float(center), width, "gaussian_bump", {"center": float(center), "width": width})


def linear(slope: float = 1.0, intercept: float = 0.0) -> TestFunction:
    """slope*x + intercept (unbounded)."""
    slope, intercept = float(slope), float(intercept)

    def d(x, k):
        return np.full_like(x, slope if k == 1 else 0.0)

    bound = abs(intercept) if slope == 0 else math.inf
    return TestFunction(
        "linear", lambda x: slope * x + intercept, d, 8, (), bound,
        {"slope": slope, "intercept": intercept}, is_constant=slope == 0,
    )


def constant(value: float = 1.0) -> TestFunction:
    value = float(value)
    return TestFunction(
        "constant", lambda x: np.full_like(x, value), lambda x, k: np.zeros_like(x),
        8, (), abs(value), {"value": value}, is_constant=True,
    )


CATALOG: dict[str, Callable[..., TestFunction]] = {
    "indicator": indicator,
    "exp_neg_sq": exp_neg_sq,
    "linear": linear,
    "constant": constant,
    "gaussian_bump": gaussian_bump,
}


def make_function(name: str, params: Mapping[str, float] | None = None) -> TestFunction:
    """Build a catalog function from its name and keyword parameters."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(CATALOG)}") from None
    try:
        return factory(**dict(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def as_function(f) -> TestFunction:
    if isinstance(f, TestFunction):
        return f
    if callable(f):
        return TestFunction(getattr(f, "__name__", "callable"), f)
    raise TypeError(f"expected a test function, got {type(f).__name__}")


def is_constant_one(f) -> bool:
    return isinstance(f, TestFunction) and f.is_constant and f.params.get("value", None) == 1.0
