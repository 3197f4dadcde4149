import math

import numpy as np
import pytest

from foed_lab.bridge import (
    FddResult, bridge_apply, check_xindi_integrable, fdd_backward_nested, fdd_bivariate, fdd_degenerate_xindi,
    kernel_triviality_probe, orthogonal_component, xi,
)
from foed_lab.errors import DomainError, UnsupportedOperation
from foed_lab.functions import constant, exp_neg_sq, indicator, linear
from foed_lab.models import make_gauss_gauss
from foed_lab.oracle import fdd_forward, gaussian_condition, gaussian_joint


def test_bridge_of_linear_is_gaussian_regression(gg):
    # X_0 ~ N(0, 1), X_t = X_0 + B_t: E[X_0 | X_t = z] = z / (1 + t)
    z = np.linspace(-2, 2, 7)
    assert np.allclose(bridge_apply(gg, 1.5, linear(), z), z / 2.5, atol=1e-10)


def test_bridge_matches_gaussian_conditioning_on_ou(ou):
    joint = gaussian_joint(ou, (0.0, 0.8))
    for z in (-1.0, 0.4, 2.0):
        cond = gaussian_condition(joint, [1], [z])
        m, v = cond.mean[0], cond.covariance[0, 0]
        assert abs(bridge_apply(ou, 0.8, linear(), z) - m) < 1e-8
        assert abs(bridge_apply(ou, 0.8, lambda x: x * x, z) - (m * m + v)) < 1e-8


def test_bridge_fixes_constants_and_orthogonal_part(gg):
    assert abs(bridge_apply(gg, 1.0, constant(3.0), 0.4) - 3.0) < 1e-10
    comp = orthogonal_component(gg, 1.0, linear())
    assert abs(float(comp(np.array(1.0))) - 0.5) < 1e-10
    with pytest.raises(DomainError):
        bridge_apply(gg, 0.0, linear(), 0.0)


def test_nested_and_bivariate_are_exact_for_two_epochs(gg, ou):
    for m in (gg, ou):
        for f in (indicator(), exp_neg_sq()):
            fwd = fdd_forward(m, [constant(), f, f], (1.0, 2.0))
            assert abs(fdd_backward_nested(m, [constant(), f, f], (1.0, 2.0)).value - fwd) < 1e-8
            assert abs(fdd_bivariate(m, [f, f], (1.0, 2.0)).value - fwd) < 1e-8


def test_orthant_value(gg):
    res = fdd_bivariate(gg, [indicator(), indicator()], (1.0, 2.0))
    assert isinstance(res, FddResult)
    assert abs(res.value - (0.25 + math.asin(2 / math.sqrt(6)) / (2 * math.pi))) < 1e-9


def test_nested_with_initial_factor(gg):
    fs = [exp_neg_sq(), indicator(0.3), exp_neg_sq()]
    assert abs(fdd_backward_nested(gg, fs, (0.5, 1.2)).value - fdd_forward(gg, fs, (0.5, 1.2))) < 1e-8


def test_bivariate_reduction_misses_three_epochs():
    # measured gap, far outside quadrature error
    m = make_gauss_gauss(2.0)
    fs = [indicator()] * 3
    biv = fdd_bivariate(m, fs, (1.0, 2.0, 3.0)).value
    fwd = fdd_forward(m, [constant()] + fs, (1.0, 2.0, 3.0))
    assert abs(biv - 0.5061191848153774) < 1e-7
    assert abs(fwd - 0.36694920602682196) < 1e-7


def test_degenerate_formula_probe():
    m = make_gauss_gauss(2.0)
    with pytest.raises(UnsupportedOperation):
        fdd_degenerate_xindi(m, [constant(), constant()], (1.0, 2.0))
    res = fdd_degenerate_xindi(m, [constant(), constant()], (1.0, 2.0), opt_in=True, compare=False)
    assert abs(res.value - 2 / math.sqrt(3)) < 1e-9
    # n = 1 is the marginal law and exact
    one = fdd_degenerate_xindi(m, [exp_neg_sq()], (1.0,), opt_in=True)
    assert abs(one.comparisons["gap"]) < 1e-9


def test_integrability_guard(gg):
    ok, _ = check_xindi_integrable(gg, [constant(), constant()], (1.0, 2.0))
    assert not ok
    with pytest.raises(DomainError):
        fdd_degenerate_xindi(gg, [constant(), constant()], (1.0, 2.0), opt_in=True)


def test_xi_and_limits(gg):
    assert abs(xi(gg, [constant()], (1.0,), 0.0) - 1 / math.sqrt(2)) < 1e-14
    with pytest.raises(UnsupportedOperation):
        fdd_backward_nested(gg, [constant()] * 4, (1.0, 2.0, 3.0))
    with pytest.raises(DomainError):
        fdd_bivariate(gg, [constant()], (1.0,))


def test_kernel_probe_certifies_nonzero_images(gg):
    rows = kernel_triviality_probe(gg, 1.0, [linear(), exp_neg_sq()])
    assert all(r.meta["certified_outside_kernel"] for r in rows)
