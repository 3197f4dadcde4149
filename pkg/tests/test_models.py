import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from foed_lab.errors import DomainError
from foed_lab.models import TimeGrid, bessel_i, build_model, log_bessel_i, model_names, sample_paths
from foed_lab.quadrature import integrate_1d
from foed_lab.rng import CounterRNG


@pytest.mark.parametrize("name", ["gg", "ou", "besq"])
def test_transition_densities_integrate_to_one(name, request):
    m = request.getfixturevalue(name)
    c, s = m.marginal_moments(0.0)
    for x in (c, c + 0.7 * s):
        for t in (0.3, 2.0):
            mean, sd = m.transition_moments(t, x)
            mass = integrate_1d(lambda y: m.transition_density(t, x, y), m.domain, center=mean, scale=sd)
            assert abs(mass - 1.0) < 1e-9


@pytest.mark.parametrize("name", ["gg", "ou", "besq"])
def test_chapman_kolmogorov(name, request):
    m = request.getfixturevalue(name)
    c, s = m.marginal_moments(0.0)
    x, y = c, c + 0.5 * s
    mean, sd = m.transition_moments(0.6, x)
    lhs = integrate_1d(lambda z: m.transition_density(0.6, x, z) * m.transition_density(0.9, z, y), m.domain,
                       center=mean, scale=sd)
    assert abs(lhs - float(m.transition_density(1.5, x, y))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(1e-3, 500.0))
def test_log_bessel_matches_scipy(nu, x):
    # an absolute error in log I is the relative error of I
    ref = math.log(special.ive(nu, x)) + x
    assert abs(float(log_bessel_i(nu, x)) - ref) <= 1e-12


def test_bessel_i_plain_form():
    assert abs(float(bessel_i(0.5, 2.0)) - special.iv(0.5, 2.0)) < 1e-13


@pytest.mark.parametrize("name", ["gg", "ou", "besq"])
def test_sampler_moments(name, request):
    m = request.getfixturevalue(name)
    paths = sample_paths(m, (1.0,), 200_000, CounterRNG(11))
    mean, sd = m.marginal_moments(1.0)
    assert abs(paths[:, 1].mean() - mean) < 5 * sd / math.sqrt(200_000)
    assert abs(paths[:, 1].std() / sd - 1.0) < 0.02


def test_catalog_and_grid_validation():
    assert model_names() == ["besq_shift", "gauss_gauss", "ou_shift"]
    assert build_model("ou_shift", {"a": 1.0, "lambda": 0.5}).params["y0"] == 0.0
    with pytest.raises(DomainError):
        build_model("gauss_gauss", {"a": -1.0})
    with pytest.raises(DomainError):
        build_model("gauss_gauss", {"b": 1.0})
    with pytest.raises(DomainError):
        build_model("besq_shift", {"a": 1.0, "delta": 2.0, "y0": 0.0})
    with pytest.raises(ValueError):
        TimeGrid([1.0, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 1.0])
    assert TimeGrid([1.0, 2.5]).increments == (1.0, 1.5)
    assert np.isfinite(build_model("gauss_gauss", {"a": 2.0}).log_initial_density(0.0))
