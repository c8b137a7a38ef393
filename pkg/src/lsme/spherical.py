"""Tail probabilities and sampling for spherical laws ``Z ~ E_n(0, I_n, g_n)``.

Besides the joint law this module handles the *deleted-component* law: if
one coordinate of ``Z`` is integrated above the threshold ``xi_k``, the
remaining ``n - 1`` coordinates carry the density

    f_{Z-k}(z) = Gbar_n(|z|^2/2 + a) / (c_n * N(a)),    a = xi_k^2 / 2,

where ``N(a)`` is :func:`lsme.generators.tail_density_normalizer`.

Univariate tails are closed form (the logistic-elliptical one uses a short
quadrature for moderate ``z`` and a Gaussian series in the far tail).
Multivariate orthants are deterministic for identity scale; see
:mod:`lsme._orthant` for the correlated variants used by the risk modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from . import _orthant
from ._orthant import TailEstimate
from .errors import DomainError, UnsupportedDimensionError, ValidationError
from .generators import GeneratorFamily, Kind, normalizing_constant

__all__ = [
    "MAX_DIM",
    "SphericalLaw",
    "TailThresholds",
    "TailEstimate",
    "univariate_cdf",
    "univariate_tail",
    "log_univariate_tail",
    "tail_mean_ratio",
    "multivariate_tail",
    "multivariate_tail_estimate",
    "deleted_tail",
    "deleted_tail_estimate",
    "correlated_tail",
    "correlated_deleted_tail",
    "sample_spherical",
]

MAX_DIM = 8


@dataclass(frozen=True)
class SphericalLaw:
    family: GeneratorFamily
    n: int

    def __post_init__(self):
        _check_n(self.n, low=1)

    def tail(self, xi) -> float:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.n == 1:
            return float(univariate_tail(self.family, xi[0]))
        return multivariate_tail(self.family, self.n, xi)

    def sample(self, rng, count):
        return sample_spherical(self.family, self.n, rng, count)


@dataclass(frozen=True)
class TailThresholds:
    """Standardised thresholds at one value of the mixing variable.

    ``xi_q`` has one entry per coordinate; ``z_q`` is the univariate
    threshold (``xi_q[0]`` for one-dimensional models).
    """

    theta: float
    xi_q: np.ndarray
    z_q: Optional[float] = None

    def minus(self, k: int) -> np.ndarray:
        """``xi_q`` with component ``k`` removed."""
        return np.delete(self.xi_q, k)

    def shift(self, k: int) -> float:
        """The deleted-law shift ``a = xi_k^2 / 2``."""
        return 0.5 * float(self.xi_q[k]) ** 2

    @classmethod
    def univariate(cls, y_q, mu, sigma, beta, theta):
        z = (y_q - mu - theta * beta) / (math.sqrt(theta) * sigma)
        return cls(theta, np.array([z]), z)


def _check_n(n, low=2):
    if int(n) != n or n < low:
        raise ValidationError(f"dimension must be an integer >= {low}, got {n}")
    if n > MAX_DIM:
        raise UnsupportedDimensionError(f"dimension {n} exceeds the supported maximum of {MAX_DIM}")
    return int(n)


# ---------------------------------------------------------------------------
# Univariate
# ---------------------------------------------------------------------------


def univariate_tail(family: GeneratorFamily, z):
    """``P(Z > z)`` for the univariate member of ``family``."""
    z = np.asarray(z, dtype=float)
    kind = family.kind
    if kind is Kind.NORMAL:
        out = special.ndtr(-z)
    elif kind is Kind.STUDENT_T:
        out = special.stdtr(family.m, -z)
    elif kind is Kind.LAPLACE:
        out = np.where(z >= 0, 0.5 * np.exp(-np.abs(z)), 1.0 - 0.5 * np.exp(-np.abs(z)))
    else:
        out = np.asarray(_orthant.logistic_tail(z))
    return out if out.ndim else float(out)


def univariate_cdf(family: GeneratorFamily, z):
    """``P(Z <= z)``, evaluated as the upper tail at ``-z`` (symmetry)."""
    return univariate_tail(family, -np.asarray(z, dtype=float))


def log_univariate_tail(family: GeneratorFamily, z):
    """``log P(Z > z)``, accurate where the tail itself underflows."""
    z = np.asarray(z, dtype=float)
    kind = family.kind
    if kind is Kind.NORMAL:
        out = special.log_ndtr(-z)
    elif kind is Kind.LAPLACE:
        out = np.where(z >= 0, math.log(0.5) - np.abs(z), np.log1p(-0.5 * np.exp(-np.abs(z))))
    elif kind is Kind.STUDENT_T:
        out = _orthant.log_student_tail(family.m, z)
    else:
        out = _orthant.log_logistic_tail(z)
    return out if out.ndim else float(out)


_MILLS_SWITCH = 40.0  # beyond this the logistic tail is normal to within exp(-800)


def tail_mean_ratio(family: GeneratorFamily, z):
    """``Gbar_1(z^2/2) / P(Z > z)``, i.e. ``E[Z | Z > z]``.

    Far in the tail both factors underflow together and the difference of
    their logarithms loses every digit, so the ratio is formed directly:
    Mills' ratio via ``erfcx`` for normal (and far-tail logistic) laws, and
    ``1 + z`` for the Laplace law.
    """
    from .generators import log_cumulative_generator

    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(log_cumulative_generator(family, 1, 0.5 * z * z) - log_univariate_tail(family, z))
    out = np.atleast_1d(out).copy()
    zz = np.atleast_1d(z)
    kind = family.kind
    if kind in (Kind.NORMAL, Kind.LOGISTIC):
        far = zz > (0.0 if kind is Kind.NORMAL else _MILLS_SWITCH)
        out[far] = math.sqrt(2.0 / math.pi) / special.erfcx(zz[far] / math.sqrt(2.0))
    elif kind is Kind.LAPLACE:
        right = zz >= 0
        out[right] = 1.0 + zz[right]
    else:
        bad = ~np.isfinite(out) | (zz > 1e150)  # z^2 overflows beyond this
        out[bad] = np.maximum(zz[bad], 0.0) * family.m / (family.m - 1.0)
    return out.reshape(z.shape) if z.ndim else float(out[0])


# ---------------------------------------------------------------------------
# Multivariate orthants
# ---------------------------------------------------------------------------


def _as_thresholds(xi, d):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (d,):
        raise ValidationError(f"threshold vector must have length {d}, got shape {xi.shape}")
    if np.any(np.isnan(xi)):
        raise DomainError("thresholds must not be NaN")
    return xi


def multivariate_tail_estimate(family: GeneratorFamily, n: int, xi, method: str = "auto") -> TailEstimate:
    """``P(Z_1 > xi_1, ..., Z_n > xi_n)`` with an error estimate.

    ``method="auto"`` uses the deterministic evaluator of the family;
    ``method="mc"`` uses radius-conditional Monte Carlo over a fixed set of
    directions (variance reduced with normal control variates).
    """
    n = _check_n(n)
    xi = _as_thresholds(xi, n)
    law = _orthant.joint_law(family, n)
    return _evaluate(law, xi, method)


def multivariate_tail(family: GeneratorFamily, n: int, xi, method: str = "auto") -> float:
    return multivariate_tail_estimate(family, n, xi, method).value


def deleted_tail_estimate(family: GeneratorFamily, n: int, xi_minus_k, a, method: str = "auto") -> TailEstimate:
    """``P(Z_{-k} > xi_{-k})`` for the deleted-component law with shift ``a``.

    ``method="quadrature"`` (``n = 2`` only) integrates the normalised
    density directly; it exists as an independent check of the fast paths.
    """
    n = _check_n(n)
    a = float(a)
    if not np.isfinite(a) or a < 0:
        raise DomainError(f"shift a must be non-negative, got {a}")
    xi = _as_thresholds(xi_minus_k, n - 1)
    if method == "quadrature":
        return _deleted_quadrature(family, n, float(xi[0]), a)
    law = _orthant.deleted_law(family, n, a)
    return _evaluate(law, xi, method)


def deleted_tail(family: GeneratorFamily, n: int, xi_minus_k, a, method: str = "auto") -> float:
    return deleted_tail_estimate(family, n, xi_minus_k, a, method).value


def _evaluate(law, xi, method):
    if method == "auto":
        return _orthant.check_finite(law.orthant(xi), "orthant")
    if method == "mc":
        d = len(xi)
        if d == 1:
            return law.orthant(xi)
        return _orthant._directional_orthant(law, np.eye(d), xi)
    raise ValidationError(f"unknown method {method!r}")


def _deleted_quadrature(family, n, x, a):
    from scipy import integrate

    from .generators import cumulative_generator, tail_density_normalizer

    if n != 2:
        raise ValidationError("quadrature path of deleted_tail is only available for n = 2")
    norm = tail_density_normalizer(family, 2, a) * normalizing_constant(family, 2)
    f = lambda v: cumulative_generator(family, 2, 0.5 * v * v + a)  # noqa: E731
    val, err = integrate.quad(f, max(x, 0.0), np.inf, epsabs=1e-15, epsrel=1e-12, limit=400)
    if x < 0:
        # keep the bulk of the mass inside a finite panel
        head, head_err = integrate.quad(f, x, 0.0, epsabs=1e-15, epsrel=1e-12, limit=400)
        val, err = val + head, err + head_err
    return TailEstimate(val / norm, err / norm, "quadrature")


def correlated_tail(family: GeneratorFamily, corr, t) -> TailEstimate:
    """``P(W > t)`` for ``W ~ E_n(0, R, g_n)`` with correlation matrix ``R``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = len(t)
    if n == 1:
        return TailEstimate(float(univariate_tail(family, t[0])), 0.0, "exact")
    _check_n(n)
    return _orthant.check_finite(_orthant.correlated_orthant(_orthant.joint_law(family, n), corr, t), "joint orthant")


def correlated_deleted_tail(family: GeneratorFamily, n: int, corr, t, a) -> TailEstimate:
    """Deleted-law orthant with correlation ``corr`` among the remaining coordinates."""
    law = _orthant.deleted_law(family, n, float(a))
    return _orthant.check_finite(_orthant.correlated_orthant(law, corr, t), "deleted orthant")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_radius(family: GeneratorFamily, n: int, rng, count):
    kind = family.kind
    if kind is Kind.NORMAL:
        return np.sqrt(rng.chisquare(n, count))
    if kind is Kind.STUDENT_T:
        return np.sqrt(n * rng.f(n, family.m, count))
    if kind is Kind.LAPLACE:
        return rng.gamma(n, 1.0, count)
    return _orthant.joint_law(family, n).table.ppf(rng.random(count))


def sample_spherical(family: GeneratorFamily, n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` draws of ``Z = R U`` as an array of shape ``(count, n)``."""
    n = _check_n(n, low=1)
    count = int(count)
    if count < 1:
        raise ValidationError("count must be at least 1")
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * sample_radius(family, n, rng, count)[:, None]
