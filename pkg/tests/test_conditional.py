import math

import numpy as np
import pytest

from foed_lab.conditional import (
    ConditionalQuery, EtaMeasure, check_lemma_rela, conditional_product, conditional_psi, eta_density,
    tower_check,
)
from foed_lab.errors import DomainError, UnsupportedOperation
from foed_lab.functions import constant, exp_neg_sq, indicator, linear
from foed_lab.oracle import gaussian_conditional_expectation
from foed_lab.quadrature import QuadratureConfig


def test_single_epoch_regression_value(gg):
    # X_1 given X_2 = 2 for X = B_{1+.}: mean 4/3
    q = ConditionalQuery((1.0,), 1.0, 2.0, [constant(), linear()])
    assert abs(conditional_product(gg, q) - 4 / 3) < 1e-10
    assert abs(conditional_psi(gg, q) - 4 / 3) < 1e-8


def test_zero_lag_pins_the_last_state(gg):
    q = ConditionalQuery((1.0,), 0.0, 0.7, [constant(), linear()])
    assert abs(conditional_product(gg, q) - 0.7) < 1e-12
    assert abs(conditional_psi(gg, q) - 0.7) < 1e-10


@pytest.mark.parametrize("grid,s,w", [((1.0,), 0.5, 1.0), ((0.5, 1.0), 0.5, -0.3), ((1.0, 2.0), 0.0, 0.4)])
def test_routes_agree_with_gaussian_oracle(ou, grid, s, w):
    fs = [exp_neg_sq()] + [indicator(0.2)] * (len(grid) - 1) + [exp_neg_sq()]
    q = ConditionalQuery(grid, s, w, fs)
    ref = gaussian_conditional_expectation(ou, fs, grid, s, w)
    assert abs(conditional_product(ou, q) - ref) < 1e-8
    assert abs(conditional_psi(ou, q, "increment_form") - ref) < 1e-7


def test_joint_payoff(gg):
    q = ConditionalQuery((1.0,), 1.0, 0.0, lambda z0, z1: z0 * z1)
    # Cov(X_0, X_1 | X_2 = 0) for variances 1, 2, 3
    assert abs(conditional_psi(gg, q) - 1 / 3) < 1e-8
    with pytest.raises(ValueError):
        conditional_product(gg, q)


def test_epoch_ratio_form_is_a_probe(gg):
    # it agrees when t_n equals the last lag and not otherwise
    fs = [constant(), linear()]
    same = ConditionalQuery((1.0,), 1.0, 2.0, fs)
    assert abs(conditional_psi(gg, same, "lemma52_form") - 4 / 3) < 1e-8
    other = ConditionalQuery((1.0,), 0.5, 2.0, fs)
    assert abs(conditional_psi(gg, other, "lemma52_form") - conditional_product(gg, other)) > 1e-3
    with pytest.raises(DomainError):
        conditional_psi(gg, ConditionalQuery((1.0,), 0.0, 2.0, fs), "lemma52_form")


def test_eta_measure(gg):
    eta = EtaMeasure(gg, 1.0, 0.0)
    assert abs(eta.mass() - 1.0) < 1e-10
    # X_0 given X_1 = 0 is N(0, 1/2)
    assert abs(float(eta_density(gg, 1.0, 0.0, 0.0)) - 1 / math.sqrt(math.pi)) < 1e-12
    assert abs(eta.expect(lambda v: v * v) - 0.5) < 1e-10


def test_tower_property(gg, ou):
    for m in (gg, ou):
        rep = tower_check(m, [constant(), indicator(), exp_neg_sq()], (1.0, 2.0), 0.5)
        assert rep.passed, rep


def test_transition_ratio_probe_values_are_frozen(gg):
    rep = check_lemma_rela(gg, 1.0, 1.0, 0.0, 1.0)
    assert rep.status == "flag"
    assert abs(rep.lhs - 0.04826617631502696) < 1e-14
    assert abs(rep.rhs - 0.04717694885447962) < 1e-14
    fine = check_lemma_rela(gg, 1.0, 1.0, 0.0, 1.0, QuadratureConfig().refined())
    assert abs(fine.rel_err - rep.rel_err) < 1e-9
    # the sides coincide at t = 0
    assert check_lemma_rela(gg, 1.0, 0.0, 0.0, 1.0).abs_err < 1e-15


def test_query_validation():
    with pytest.raises(DomainError):
        ConditionalQuery((1.0,), -1.0, 0.0, [constant(), constant()])
    with pytest.raises(ValueError):
        ConditionalQuery((1.0,), 1.0, 0.0, [constant()])
    q = ConditionalQuery((1.0, 2.0), 0.5, 0.0, [constant()] * 3)
    assert (q.n, q.last_lag, q.horizon) == (2, 1.5, 3.5)


def test_limits(gg):
    q = ConditionalQuery((1.0, 2.0, 3.0), 1.0, 0.0, [constant()] * 4)
    with pytest.raises(UnsupportedOperation):
        conditional_product(gg, q)
