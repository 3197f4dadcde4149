"""Exponents of marginal evolution (FOED) for time-homogeneous Markov processes.

The exponent E(t, x) = mu_t(x) / g(x) turns the initial density g into the
density at time t.  The package builds it by quadrature, derives bridge
operators and backward formulas for finite-dimensional laws from it, and
checks every formula against forward chain-rule and Monte Carlo oracles.
"""

from .bridge import (
    FddResult, backward_chain, bridge_apply, fdd_backward_nested, fdd_bivariate, fdd_degenerate_xindi, xi,
)
from .conditional import ConditionalQuery, EtaMeasure, conditional_product, conditional_psi, tower_check
from .errors import ConfigError, DomainError, FoedLabError, QuadratureError, UnsupportedOperation
from .foed import (
    FoedExponent, MarginalLaw, check_semiflow, foed_exponent, foed_rate, ln_f, log_foed_exponent,
    marginal_density,
)
from .functions import TestFunction, make_function
from .kolmogorov import KolmogorovQuery, KolmogorovReport, kolmogorov_distance_foed, kolmogorov_distance_grid
from .models import ProcessModel, TimeGrid, build_model, make_besq_shift, make_gauss_gauss, make_ou_shift
from .oracle import fdd_forward, fdd_monte_carlo, gaussian_condition, gaussian_joint
from .quadrature import QuadratureConfig
from .report import IdentityReport, VerificationLedger
from .verify import VerifySettings, run_verification

__version__ = "0.1.0"
