"""Tail risk measures for location-scale mixtures of elliptical distributions.

``Y = mu + Theta beta + sqrt(Theta) Sigma^(1/2) X`` with ``X`` spherical
(normal, Student-t, logistic or Laplace generator) and ``Theta`` a positive
mixing variable.  The package evaluates value-at-risk, univariate and
multivariate tail conditional expectations and TCE-based allocations by
one-dimensional quadrature over ``Theta``, and checks them against a seeded
Monte Carlo oracle.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegeneratePairError,
    DomainError,
    LSMEError,
    NumericalFailure,
    ValidationError,
    VanishingTailError,
)
from .generators import LAPLACE, LOGISTIC, NORMAL, GeneratorFamily, Kind, student_t  # noqa: E402
from .mixing import GIG, BetaPrime, Discrete, Gamma, InverseGamma, PointMass  # noqa: E402
from .model import LSMEModel, aggregate, cdf_1d, marginal, quantile_1d, sample_model, var_vector  # noqa: E402
from .multivariate import allocate, conditional_tce, conditional_tce_pair, mtce, pair_model  # noqa: E402
from .oracle import mc_allocation, mc_mtce, mc_tce  # noqa: E402
from .univariate import Mode, tce_1d, tce_sum  # noqa: E402

__all__ = [
    "LSMEError",
    "ValidationError",
    "DomainError",
    "DegeneratePairError",
    "NumericalFailure",
    "VanishingTailError",
    "GeneratorFamily",
    "Kind",
    "NORMAL",
    "LOGISTIC",
    "LAPLACE",
    "student_t",
    "PointMass",
    "Discrete",
    "Gamma",
    "InverseGamma",
    "GIG",
    "BetaPrime",
    "LSMEModel",
    "marginal",
    "aggregate",
    "cdf_1d",
    "quantile_1d",
    "var_vector",
    "sample_model",
    "Mode",
    "tce_1d",
    "tce_sum",
    "mtce",
    "pair_model",
    "conditional_tce",
    "conditional_tce_pair",
    "allocate",
    "mc_tce",
    "mc_mtce",
    "mc_allocation",
]
