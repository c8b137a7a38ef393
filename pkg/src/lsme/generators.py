"""Density generators and their special functions for the four elliptical families.

A spherical law on R^n with generator ``g_n`` has density ``g_n(|z|^2 / 2)``.
Throughout this module ``g_n`` *includes* its normalising constant ``c_n``:

=========  ==========================================  ==================================
family     g_n(u)                                      cumulative generator Gbar_n(u)
=========  ==========================================  ==================================
normal     c_n exp(-u)                                 c_n exp(-u)
student-t  c_n (1 + 2u/m)^(-(m+n)/2)                   c_n m/(m+n-2) (1 + 2u/m)^(-(m+n-2)/2)
logistic   c_n exp(-u) / (1 + exp(-u))^2               c_n exp(-u) / (1 + exp(-u))
laplace    c_n exp(-sqrt(2u))                          c_n (1 + sqrt(2u)) exp(-sqrt(2u))
=========  ==========================================  ==================================

The logistic constant involves the Dirichlet eta function at ``n/2 - 1``,
which is negative for ``n = 1``; :func:`dirichlet_eta` handles that by
analytic continuation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalFailure, ValidationError

__all__ = [
    "Kind",
    "GeneratorFamily",
    "GeneratorConstants",
    "NORMAL",
    "LOGISTIC",
    "LAPLACE",
    "student_t",
    "density_generator",
    "cumulative_generator",
    "log_cumulative_generator",
    "shifted_cumulative_generator",
    "normalizing_constant",
    "tail_density_normalizer",
    "log_tail_density_normalizer",
    "generator_constants",
    "lerch_phi",
    "dirichlet_eta",
    "radial_integral",
]


class Kind(str, enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "studentt"
    LOGISTIC = "logistic"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class GeneratorFamily:
    """One of the four supported generator families.

    ``m`` is the degrees of freedom and is only meaningful for Student-t,
    where ``m > 1`` is required so that ``g_1`` is integrable.
    """

    kind: Kind
    m: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.STUDENT_T:
            if self.m is None or not np.isfinite(self.m) or self.m <= 1:
                raise DomainError(f"Student-t needs degrees of freedom m > 1, got m={self.m}")
            object.__setattr__(self, "m", float(self.m))
        elif self.m is not None:
            raise ValidationError(f"{self.kind.value} family takes no degrees of freedom")

    @property
    def has_covariance(self) -> bool:
        return self.kind is not Kind.STUDENT_T or self.m > 2

    def __str__(self):
        if self.kind is Kind.STUDENT_T:
            return f"studentt(m={self.m:g})"
        return self.kind.value

    def to_dict(self) -> dict:
        if self.kind is Kind.STUDENT_T:
            return {"kind": self.kind.value, "m": self.m}
        return {"kind": self.kind.value}


NORMAL = GeneratorFamily(Kind.NORMAL)
LOGISTIC = GeneratorFamily(Kind.LOGISTIC)
LAPLACE = GeneratorFamily(Kind.LAPLACE)


def student_t(m: float) -> GeneratorFamily:
    return GeneratorFamily(Kind.STUDENT_T, m)


@dataclass(frozen=True)
class GeneratorConstants:
    c_n: float
    psi_prime_zero: Optional[float]


def _check_dim(n):
    if int(n) != n or n < 1:
        raise ValidationError(f"dimension must be a positive integer, got {n}")
    return int(n)


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("generator argument u must be non-negative")
    return u


# ---------------------------------------------------------------------------
# Alternating series: Dirichlet eta and the Lerch transcendent
# ---------------------------------------------------------------------------

_CVZ_TERMS = 40


@lru_cache(maxsize=None)
def _cvz_weights(n_terms: int = _CVZ_TERMS) -> np.ndarray:
    # Cohen, Rodriguez Villegas & Zagier, "Convergence acceleration of
    # alternating series", algorithm 1.  sum_k (-1)^k a_k ~= sum_k w_k a_k,
    # error <= 2 (3 + sqrt 8)^-n when a_k is a Hausdorff moment sequence.
    d = (3.0 + math.sqrt(8.0)) ** n_terms
    d = (d + 1.0 / d) / 2.0
    b, c = -1.0, -d
    w = np.empty(n_terms)
    for k in range(n_terms):
        c = b - c
        w[k] = c / d
        b = (k + n_terms) * (k - n_terms) * b / ((k + 0.5) * (k + 1.0))
    w.setflags(write=False)
    return w


def alternating_sum(terms: np.ndarray) -> np.ndarray:
    """Accelerated ``sum_k (-1)^k terms[k]`` along axis 0.

    ``terms`` must hold the first ``_CVZ_TERMS`` entries of a completely
    monotone sequence; the sum is then accurate to ~1e-30 relative to
    ``terms[0]``.
    """
    w = _cvz_weights()
    terms = np.asarray(terms, dtype=float)
    return np.tensordot(w, terms[: len(w)], axes=(0, 0))


def lerch_phi(z, s, a=1.0):
    """Lerch transcendent ``sum_{k>=0} z^k / (k + a)^s`` for ``-1 < z <= 0``.

    Vectorised over ``z`` and ``s``.  The terms form a moment sequence for
    ``s > 0, a > 0``, so the accelerated alternating sum reaches ~1e-16.
    """
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(z <= -1.0) or np.any(z > 0.0):
        raise DomainError("lerch_phi needs -1 < z <= 0")
    if np.any(s <= 0):
        raise DomainError("lerch_phi needs s > 0")
    if a <= 0:
        raise DomainError("lerch_phi needs a > 0")
    out = _lerch_series(-z, s, a)
    return out if np.ndim(out) else float(out)


def _lerch_series(x, s, a=1.0):
    """``sum_k (-x)^k / (k + a)^s`` for ``0 <= x <= 1`` (x = 1 gives eta-like sums)."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    k = np.arange(_CVZ_TERMS, dtype=float).reshape((-1,) + (1,) * np.broadcast(x, s).ndim)
    with np.errstate(divide="ignore", invalid="ignore"):
        # x**0 must be 1 even when x == 0
        terms = np.where(k == 0, 1.0, x ** k) * (k + a) ** (-s)
    return alternating_sum(terms)


def dirichlet_eta(s):
    """Dirichlet eta ``sum_{i>=1} (-1)^(i-1) i^-s`` continued to all real ``s``.

    ``s > 0`` uses the accelerated alternating series; ``s < 0`` goes through
    the functional equation of zeta, ``eta(s) = (1 - 2^(1-s)) zeta(s)``.
    """
    s_arr = np.asarray(s, dtype=float)
    out = np.empty_like(s_arr)
    flat_s, flat_out = s_arr.reshape(-1), out.reshape(-1)
    for i, si in enumerate(flat_s):
        if si > 0:
            flat_out[i] = float(_lerch_series(1.0, si))
        elif si == 0:
            flat_out[i] = 0.5
        else:
            flat_out[i] = (1.0 - 2.0 ** (1.0 - si)) * _zeta_negative(si)
    return out if out.ndim else float(out)


def _zeta_negative(s):
    # zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1-s) zeta(1-s), with 1-s > 1
    if s == math.floor(s) and int(s) % 2 == 0:
        return 0.0
    return (
        2.0 ** s
        * math.pi ** (s - 1.0)
        * math.sin(math.pi * s / 2.0)
        * math.gamma(1.0 - s)
        * float(special.zeta(1.0 - s))
    )


# ---------------------------------------------------------------------------
# Normalising constants and generators
# ---------------------------------------------------------------------------


def normalizing_constant(family: GeneratorFamily, n: int) -> float:
    """``c_n`` making ``g_n(|z|^2/2)`` a probability density on R^n."""
    n = _check_dim(n)
    kind = family.kind
    if kind is Kind.NORMAL:
        return (2.0 * math.pi) ** (-n / 2.0)
    if kind is Kind.STUDENT_T:
        m = family.m
        return math.exp(
            special.gammaln((m + n) / 2.0) - special.gammaln(m / 2.0) - n / 2.0 * math.log(m * math.pi)
        )
    if kind is Kind.LAPLACE:
        return math.gamma(n / 2.0) / (2.0 * math.pi ** (n / 2.0) * math.gamma(n))
    return 1.0 / ((2.0 * math.pi) ** (n / 2.0) * dirichlet_eta(n / 2.0 - 1.0))


def _log_unit_generator(family, n, u):
    """log of g_n(u) / c_n."""
    kind = family.kind
    if kind is Kind.NORMAL:
        return -u
    if kind is Kind.STUDENT_T:
        m = family.m
        return -(m + n) / 2.0 * np.log1p(2.0 * u / m)
    if kind is Kind.LOGISTIC:
        return -u - 2.0 * np.log1p(np.exp(-u))
    return -np.sqrt(2.0 * u)


def _log_unit_cumulative(family, n, u):
    """log of Gbar_n(u) / c_n."""
    kind = family.kind
    if kind is Kind.NORMAL:
        return -u
    if kind is Kind.STUDENT_T:
        m = family.m
        if m + n - 2 <= 0:
            raise DomainError(f"cumulative generator diverges for m + n - 2 <= 0 (m={m}, n={n})")
        return math.log(m / (m + n - 2.0)) - (m + n - 2.0) / 2.0 * np.log1p(2.0 * u / m)
    if kind is Kind.LOGISTIC:
        return -u - np.log1p(np.exp(-u))
    r = np.sqrt(2.0 * u)
    return np.log1p(r) - r


def density_generator(family: GeneratorFamily, n: int, u):
    """``g_n(u)`` including the normalising constant."""
    n = _check_dim(n)
    u = _check_u(u)
    out = normalizing_constant(family, n) * np.exp(_log_unit_generator(family, n, u))
    return out if out.ndim else float(out)


def log_cumulative_generator(family: GeneratorFamily, n: int, u):
    n = _check_dim(n)
    u = _check_u(u)
    out = math.log(normalizing_constant(family, n)) + _log_unit_cumulative(family, n, u)
    return out if np.ndim(out) else float(out)


def cumulative_generator(family: GeneratorFamily, n: int, u):
    """``Gbar_n(u) = int_u^inf g_n(v) dv`` in closed form."""
    out = np.exp(log_cumulative_generator(family, n, u))
    return out if np.ndim(out) else float(out)


def shifted_cumulative_generator(family: GeneratorFamily, n: int, u, a):
    """``int_u^inf g_n(v + a) dv``, which is just ``Gbar_n(u + a)``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("shift a must be non-negative")
    return cumulative_generator(family, n, np.asarray(u, dtype=float) + a)


# ---------------------------------------------------------------------------
# Normaliser of the deleted-component density
# ---------------------------------------------------------------------------


def tail_density_normalizer(family: GeneratorFamily, n: int, a, method: str = "closed"):
    """Integral of ``Gbar_n(|t|^2/2 + a) / c_n`` over t in R^(n-1).

    This is ``-psi*'(0)``: dividing ``Gbar_n(|t|^2/2 + a) / c_n`` by it gives
    the density of the remaining ``n - 1`` coordinates once one coordinate has
    been integrated out above its threshold (with ``a`` half that threshold
    squared).  ``method="quadrature"`` evaluates the radial integral
    numerically instead of using the closed forms.
    """
    n = _check_dim(n)
    if n < 2:
        raise ValidationError("tail_density_normalizer needs n >= 2")
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("shift a must be non-negative")
    d = n - 1
    if method == "quadrature":
        out = np.vectorize(lambda ai: _normalizer_quadrature(family, n, ai))(a)
    elif method != "closed":
        raise ValidationError(f"unknown method {method!r}")
    else:
        out = np.exp(log_tail_density_normalizer(family, n, a))
    return out if np.ndim(out) else float(out)


def log_tail_density_normalizer(family: GeneratorFamily, n: int, a):
    """Logarithm of :func:`tail_density_normalizer` (closed forms), finite for large ``a``."""
    n = _check_dim(n)
    if n < 2:
        raise ValidationError("tail_density_normalizer needs n >= 2")
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("shift a must be non-negative")
    d = n - 1
    if family.kind is Kind.NORMAL:
        out = d / 2.0 * math.log(2.0 * math.pi) - a
    elif family.kind is Kind.STUDENT_T:
        m = family.m
        log_k = (
            math.log(m / (m + n - 2.0))
            + special.gammaln((m - 1.0) / 2.0)
            - special.gammaln((m + n - 2.0) / 2.0)
            + d / 2.0 * math.log(math.pi * m)
        )
        out = log_k - (m - 1.0) / 2.0 * np.log1p(2.0 * a / m)
    elif family.kind is Kind.LOGISTIC:
        x = np.exp(-a)
        out = d / 2.0 * math.log(2.0 * math.pi) - a + np.log(_lerch_series(x, d / 2.0))
    else:
        out = _log_laplace_normalizer(d, a)
    return out if np.ndim(out) else float(out)


def _log_kve(nu, x):
    """``log(K_nu(x) e^x)``; scipy's ``kve`` gives NaN for very large ``x``,
    where two terms of the Hankel expansion are exact to double precision."""
    x = np.asarray(x, dtype=float)
    big = x > 1e8
    safe = np.where(big, 1.0, x)
    small = np.log(special.kve(nu, safe))
    xb = np.where(big, x, 1e8)
    large = 0.5 * np.log(math.pi / (2.0 * xb)) + np.log1p((4.0 * nu * nu - 1.0) / (8.0 * xb))
    return np.where(big, large, small)


def _log_laplace_normalizer(d, a):
    # Gbar/c_n = E[exp(-u T) / T] for T ~ Levy(1), so the integral over R^d is
    # (2 pi)^((d-1)/2) int t^(lam-1) exp(-(1/t + 2 a t)/2) dt with
    # lam = -(d+3)/2, a generalized-inverse-Gaussian kernel.
    lam = -(d + 3.0) / 2.0
    a = np.asarray(a, dtype=float)
    base = (d - 1.0) / 2.0 * math.log(2.0 * math.pi)
    at_zero = special.gammaln(-lam) - lam * math.log(2.0)
    small = a < 1e-12
    safe = np.where(small, 1.0, a)
    x = np.sqrt(2.0 * safe)
    kernel = math.log(2.0) - lam / 2.0 * np.log(2.0 * safe) + _log_kve(lam, x) - x
    return base + np.where(small, at_zero, kernel)


def _normalizer_quadrature(family, n, a):
    c_n = normalizing_constant(family, n)
    return radial_integral(lambda u: cumulative_generator(family, n, u + a) / c_n, n - 1)


def radial_integral(h, d: int, epsrel: float = 1e-12) -> float:
    """``int_{R^d} h(|z|^2/2) dz`` by adaptive quadrature of the radial profile."""
    area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    val, err = integrate.quad(
        lambda r: r ** (d - 1) * h(0.5 * r * r), 0.0, np.inf, epsabs=0.0, epsrel=epsrel, limit=400
    )
    if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
        raise NumericalFailure(f"radial quadrature did not converge (value={val}, error={err})",
                               value=val, error=err)
    return area * val


def generator_constants(family: GeneratorFamily, n: int) -> GeneratorConstants:
    """``c_n`` and ``psi'(0)``, where ``-psi'(0) = E|Z|^2 / n``.

    ``psi'(0)`` is ``None`` for Student-t with ``m <= 2`` (no covariance).
    """
    n = _check_dim(n)
    kind = family.kind
    if kind is Kind.NORMAL:
        psi = -1.0
    elif kind is Kind.STUDENT_T:
        psi = -family.m / (family.m - 2.0) if family.m > 2 else None
    elif kind is Kind.LAPLACE:
        psi = -(n + 1.0)
    else:
        psi = -dirichlet_eta(n / 2.0) / dirichlet_eta(n / 2.0 - 1.0)
    return GeneratorConstants(normalizing_constant(family, n), psi)
