import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foed_lab.errors import DomainError, UnsupportedOperation
from foed_lab.foed import (
    FoedExponent, MarginalLaw, check_an_identity, check_generator_identity, check_semiflow, foed_exponent,
    foed_rate, gauss_gauss_rate, gauss_gauss_rate_alternative, ln_f, marginal_density, marginal_mass,
    representation_gap,
)
from foed_lab.functions import exp_neg_sq, indicator
from foed_lab.models import make_gauss_gauss


def test_gauss_gauss_exponent_values(gg):
    # mu_t = N(0, 1 + t) over g = N(0, 1)
    assert abs(float(foed_exponent(gg, 1.0, 0.0)) - 1 / math.sqrt(2)) < 1e-14
    assert abs(float(foed_exponent(gg, 1.0, 0.5)) - math.exp(0.0625) / math.sqrt(2)) < 1e-14
    assert float(foed_exponent(gg, 0.0, 0.3)) == 1.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.05, 5.0), st.floats(-3.0, 3.0))
def test_quadrature_exponent_matches_closed_form(a, t, x):
    m = make_gauss_gauss(a)
    q = float(foed_exponent(m, t, x, mode="quadrature"))
    c = float(foed_exponent(m, t, x, mode="closed_form"))
    assert abs(q / c - 1.0) < 1e-8


@pytest.mark.parametrize("name", ["gg", "ou", "besq"])
def test_marginal_mass_is_one(name, request):
    m = request.getfixturevalue(name)
    for t in (0.1, 1.0):
        assert abs(marginal_mass(m, t) - 1.0) < 1e-8


@pytest.mark.parametrize("name", ["gg", "ou"])
def test_semiflow(name, request):
    m = request.getfixturevalue(name)
    rep = check_semiflow(m, 0.5, 1.0, np.linspace(-2, 2, 9))
    assert rep.passed, rep


def test_semiflow_needs_ordered_times(gg):
    with pytest.raises(DomainError):
        check_semiflow(gg, 1.0, 0.5, [0.0])


def test_rate_matches_derivative_of_closed_form(gg):
    z = np.linspace(-2, 2, 5)
    assert np.allclose(foed_rate(gg, 1.0, z), gauss_gauss_rate(1.0, 1.0, z), atol=1e-9)
    assert np.allclose(gauss_gauss_rate_alternative(1.0, 1.0, z) - gauss_gauss_rate(1.0, 1.0, z), z * z / 2)


def test_ladder_first_rung_equals_rate(gg):
    z = np.array([-1.0, 0.0, 1.5])
    assert np.allclose(ln_f(gg, 1, 1.0, z), foed_rate(gg, 1.0, z), atol=1e-9)
    # Gauss-Gauss: L^2 F = (d^4 phi / dx^4) / (4 phi), phi the N(0, a + t) density
    u = z / math.sqrt(2.0)
    assert np.allclose(ln_f(gg, 2, 1.0, z), (u**4 - 6 * u**2 + 3) / 16.0, atol=1e-6)


def test_generator_identities(gg, ou):
    for m in (gg, ou):
        assert check_generator_identity(m, exp_neg_sq(), 1.0).passed
        assert check_an_identity(m, 1, exp_neg_sq(), 1.0).passed
        assert check_an_identity(m, 2, exp_neg_sq(), 1.0).passed
    with pytest.raises(UnsupportedOperation):
        check_an_identity(gg, 3, exp_neg_sq(), 1.0)


def test_representation_identity(gg):
    assert representation_gap(gg, indicator(0.5), 0.7).passed


def test_bound_objects(gg):
    e = FoedExponent(gg)
    assert e.mode == "closed_form"
    assert abs(float(e(1.0, 0.0)) - 1 / math.sqrt(2)) < 1e-14
    law = MarginalLaw(gg, 1.0)
    assert abs(law.expect(indicator(0.0)) - 0.5) < 1e-10
    assert abs(float(law.density(0.0)) - float(marginal_density(gg, 1.0, 0.0))) == 0.0
    with pytest.raises(ValueError):
        foed_exponent(gg, 1.0, 0.0, mode="nope")
