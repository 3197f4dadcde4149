import numpy as np
import pytest

from foed_lab.errors import DomainError
from foed_lab.kolmogorov import (
    KolmogorovQuery, kolmogorov_distance_foed, kolmogorov_distance_grid, lambda_sweep, psi_fn, split_form,
    xocon_residual,
)
from foed_lab.models import make_gauss_gauss, make_ou_shift


def test_identical_laws_give_zero(gg):
    rep = kolmogorov_distance_foed(gg, 1.0)
    assert rep.status == "degenerate"
    assert rep.distance < 1e-12


def test_ou_distance_is_frozen(ou):
    rep = kolmogorov_distance_foed(ou, 1.0)
    assert rep.status == "ok"
    assert abs(rep.distance - 0.07622193561969193) < 1e-10
    assert rep.agreement_gap < 1e-6
    assert max(abs(d) for d in rep.psi_prime_at_critical) < 1e-5
    assert rep.split_form_gap < 1e-9
    d = rep.to_dict()
    assert d["distance"] == rep.distance and d["status"] == "ok"


def test_residual_is_derivative_of_psi(ou):
    x = np.array([-1.0, 0.3, 2.0])
    h = 1e-4
    fd = (psi_fn(ou, 1.0, x + h) - psi_fn(ou, 1.0, x - h)) / (2 * h)
    assert np.allclose(fd, xocon_residual(ou, 1.0, x), atol=1e-8)
    assert np.allclose(xocon_residual(ou, 1.0, x), xocon_residual(ou, 1.0, x, simplified=True), atol=1e-10)


def test_split_form(ou):
    assert abs(split_form(ou, 1.0, 0.4) - float(psi_fn(ou, 1.0, 0.4))) < 1e-9


def test_distance_grows_with_mean_reversion():
    rows = lambda_sweep(1.0, 1.0, [0.25, 1.0])
    assert rows[0]["distance"] < rows[1]["distance"]


def test_grid_and_query_validation(ou):
    assert kolmogorov_distance_grid(ou, 1.0) > 0.07
    with pytest.raises(DomainError):
        KolmogorovQuery(ou, 0.0)
    with pytest.raises(DomainError):
        KolmogorovQuery(ou, 1.0, brownian_initial=lambda z: -z * z)
    KolmogorovQuery(ou, 1.0, brownian_initial=ou.log_initial_density)
