"""Laws of the non-negative mixing variable Theta.

Every law provides

* :meth:`MixingDistribution.nodes` -- a quadrature rule ``(theta, weight)``
  for ``E[f(Theta)]``;
* :meth:`MixingDistribution.sample` -- i.i.d. draws from a caller-owned
  :class:`numpy.random.Generator`;
* :meth:`MixingDistribution.mean` -- the analytic mean, or ``None`` when it
  is infinite.

Continuous laws integrate with Gauss-Legendre on ``theta = s (t / (1 - t))^2``,
``t`` in (0, 1), where ``s`` is the median of the law.  :func:`expect`
compares the N-node rule with the 2N-node rule and warns (or fails) when the
two disagree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import special, stats

from ._orthant import gauss_legendre
from .errors import DomainError, NumericalFailure, ValidationError

__all__ = [
    "MixingDistribution",
    "PointMass",
    "Discrete",
    "Gamma",
    "InverseGamma",
    "GIG",
    "BetaPrime",
    "Expectation",
    "QuadratureWarning",
    "expect",
    "expect_detailed",
    "sample",
    "mixing_from_dict",
    "DEFAULT_NODES",
]

DEFAULT_NODES = 128
FAIL_RTOL = 1e-3


class QuadratureWarning(UserWarning):
    """The N- and 2N-node rules disagree beyond the requested tolerance."""


def _positive(name, value):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value}")
    return value


def _rational_rule(logpdf, s, n, power=2.0, breaks=()):
    # theta = s u^p with u = t/(1-t) maps (0,1) onto (0, inf) and
    # d theta = p s u^(p-1) / (1-t)^2 dt.  Raising the rational map to a power
    # multiplies the algebraic order at both ends, which tames theta^(a-1)
    # densities near 0 and polynomial tails near infinity.  Points where the
    # integrand is not smooth can be passed as ``breaks``; each resulting
    # piece of (0, 1) gets its own n-point rule.
    x, w = gauss_legendre(n)
    cuts = [0.0]
    for b in sorted(float(b) for b in breaks if np.isfinite(b) and b > 0):
        u = (b / s) ** (1.0 / power)
        t_b = u / (1.0 + u)
        if cuts[-1] + 1e-12 < t_b < 1.0 - 1e-12:
            cuts.append(t_b)
    cuts.append(1.0)
    t = np.concatenate([lo + 0.5 * (hi - lo) * (x + 1.0) for lo, hi in zip(cuts[:-1], cuts[1:])])
    wt = np.concatenate([0.5 * (hi - lo) * w for lo, hi in zip(cuts[:-1], cuts[1:])])
    u = t / (1.0 - t)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        theta = s * u ** power
        lw = (
            np.log(power * wt)
            + math.log(s)
            + (power - 1.0) * np.log(u)
            - 2.0 * np.log1p(-t)
            + logpdf(theta)
        )
    weights = np.where(np.isfinite(lw) & np.isfinite(theta), np.exp(lw), 0.0)
    return np.where(np.isfinite(theta), theta, 1e300), weights


def _power_for(*exponents):
    # exponent a means the integrand behaves like x^(a-1) at 0 (or x^(-a-1) at
    # infinity); mapping with power p turns that into t^(p a - 1)
    return float(min(max(2.0, 2.0 / min(exponents)), 16.0))


def _tail_power(a):
    # integrands carry up to a factor theta (and sqrt(theta)), which lowers a
    # polynomial tail exponent a by up to one
    for k in (1.0, 0.5, 0.0):
        if a - k >= 0.125:
            return _power_for(a - k)
    return _power_for(a)


class MixingDistribution:
    """Base class for mixing laws; concrete laws are frozen dataclasses."""

    kind: str = ""
    is_degenerate = False  # True when the law has finitely many atoms

    def nodes(self, n: int = DEFAULT_NODES, breaks=()):
        """Quadrature nodes and weights; atoms and probabilities for discrete laws.

        ``breaks`` lists theta values where the integrand has a kink.
        """
        return _rational_rule(self._dist.logpdf, self._scale_hint, n, self._map_power, breaks)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.asarray(self._dist.rvs(size=int(count), random_state=rng), dtype=float)

    def mean(self) -> Optional[float]:
        raise NotImplementedError

    @property
    def has_finite_mean(self) -> bool:
        return self.mean() is not None

    def to_dict(self) -> dict:
        raise NotImplementedError

    _map_power = 2.0

    @cached_property
    def _scale_hint(self):
        med = float(self._dist.median())
        return med if np.isfinite(med) and med > 0 else 1.0

    def expect(self, f, nodes: int = DEFAULT_NODES, **kw):
        return expect(self, f, nodes=nodes, **kw)


@dataclass(frozen=True)
class PointMass(MixingDistribution):
    """Theta fixed at ``theta0``: the pure elliptical case."""

    theta0: float = 1.0
    kind = "point_mass"
    is_degenerate = True

    def __post_init__(self):
        object.__setattr__(self, "theta0", _positive("theta0", self.theta0))

    def nodes(self, n=DEFAULT_NODES, breaks=()):
        return np.array([self.theta0]), np.array([1.0])

    def sample(self, rng, count):
        return np.full(int(count), self.theta0)

    def mean(self):
        return self.theta0

    def to_dict(self):
        return {"kind": self.kind, "params": {"theta0": self.theta0}}


@dataclass(frozen=True)
class Discrete(MixingDistribution):
    atoms: tuple
    probs: tuple
    kind = "discrete"
    is_degenerate = True

    def __post_init__(self):
        atoms = tuple(_positive("atom", a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        if len(atoms) == 0 or len(atoms) != len(probs):
            raise ValidationError("discrete law needs equally many atoms and probabilities (at least one)")
        if any((not np.isfinite(p)) or p < 0 for p in probs):
            raise DomainError("discrete probabilities must be non-negative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"discrete probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    def nodes(self, n=DEFAULT_NODES, breaks=()):
        return np.array(self.atoms), np.array(self.probs)

    def sample(self, rng, count):
        idx = rng.choice(len(self.atoms), size=int(count), p=np.array(self.probs))
        return np.array(self.atoms)[idx]

    def mean(self):
        return math.fsum(a * p for a, p in zip(self.atoms, self.probs))

    def to_dict(self):
        return {"kind": self.kind, "params": {"atoms": list(self.atoms), "probs": list(self.probs)}}


@dataclass(frozen=True)
class Gamma(MixingDistribution):
    """Density proportional to ``theta^(shape-1) exp(-rate theta)``."""

    shape: float
    rate: float = 1.0
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    @cached_property
    def _dist(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    @property
    def _map_power(self):
        return _power_for(self.shape)

    def sample(self, rng, count):
        return rng.gamma(self.shape, 1.0 / self.rate, size=int(count))

    def mean(self):
        return self.shape / self.rate

    def to_dict(self):
        return {"kind": self.kind, "params": {"shape": self.shape, "rate": self.rate}}


@dataclass(frozen=True)
class InverseGamma(MixingDistribution):
    """``scale / G`` with ``G ~ Gamma(shape, 1)``."""

    shape: float
    scale: float = 1.0
    kind = "inverse_gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    @cached_property
    def _dist(self):
        return stats.invgamma(self.shape, scale=self.scale)

    @property
    def _map_power(self):
        return _tail_power(self.shape)

    def sample(self, rng, count):
        return self.scale / rng.gamma(self.shape, 1.0, size=int(count))

    def mean(self):
        return self.scale / (self.shape - 1.0) if self.shape > 1 else None

    def to_dict(self):
        return {"kind": self.kind, "params": {"shape": self.shape, "scale": self.scale}}


@dataclass(frozen=True)
class GIG(MixingDistribution):
    """Generalized inverse Gaussian, density ``theta^(lam-1) exp(-(chi/theta + psi theta)/2)``.

    ``chi = 0`` reduces to Gamma(lam, psi/2) and ``psi = 0`` to
    InverseGamma(-lam, chi/2); both limits are delegated.
    """

    lam: float
    chi: float
    psi: float
    kind = "gig"

    def __post_init__(self):
        lam, chi, psi = float(self.lam), float(self.chi), float(self.psi)
        if not all(np.isfinite([lam, chi, psi])) or chi < 0 or psi < 0:
            raise DomainError("GIG needs finite lam and non-negative chi, psi")
        if lam <= 0 and chi <= 0:
            raise DomainError("GIG with lam <= 0 needs chi > 0")
        if lam >= 0 and psi <= 0:
            raise DomainError("GIG with lam >= 0 needs psi > 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "psi", psi)

    @cached_property
    def _limit(self):
        if self.chi == 0:
            return Gamma(self.lam, self.psi / 2.0)
        if self.psi == 0:
            return InverseGamma(-self.lam, self.chi / 2.0)
        return None

    @cached_property
    def _dist(self):
        if self._limit is not None:
            return self._limit._dist
        return stats.geninvgauss(self.lam, math.sqrt(self.chi * self.psi), scale=math.sqrt(self.chi / self.psi))

    @property
    def _map_power(self):
        return self._limit._map_power if self._limit is not None else 2.0

    def sample(self, rng, count):
        if self._limit is not None:
            return self._limit.sample(rng, count)
        return super().sample(rng, count)

    def mean(self):
        if self._limit is not None:
            return self._limit.mean()
        omega = math.sqrt(self.chi * self.psi)
        return math.sqrt(self.chi / self.psi) * special.kve(self.lam + 1.0, omega) / special.kve(self.lam, omega)

    def to_dict(self):
        return {"kind": self.kind, "params": {"lam": self.lam, "chi": self.chi, "psi": self.psi}}


@dataclass(frozen=True)
class BetaPrime(MixingDistribution):
    """Inverted beta with scale ``eta``: ``eta B / (1 - B)``, ``B ~ Beta(alpha, beta)``.

    Density ``theta^(alpha-1) (1 + theta/eta)^(-alpha-beta) / (eta^alpha B(alpha, beta))``.
    """

    eta: float
    alpha: float
    beta: float
    kind = "beta_prime"

    def __post_init__(self):
        for name in ("eta", "alpha", "beta"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    @cached_property
    def _dist(self):
        return stats.betaprime(self.alpha, self.beta, scale=self.eta)

    @property
    def _map_power(self):
        return max(_power_for(self.alpha), _tail_power(self.beta))

    def sample(self, rng, count):
        b = rng.beta(self.alpha, self.beta, size=int(count))
        return self.eta * b / (1.0 - b)

    def mean(self):
        return self.eta * self.alpha / (self.beta - 1.0) if self.beta > 1 else None

    def to_dict(self):
        return {"kind": self.kind, "params": {"eta": self.eta, "alpha": self.alpha, "beta": self.beta}}


_KINDS = {
    "point_mass": PointMass,
    "discrete": Discrete,
    "gamma": Gamma,
    "inverse_gamma": InverseGamma,
    "gig": GIG,
    "beta_prime": BetaPrime,
}


def mixing_from_dict(spec: dict) -> MixingDistribution:
    """Inverse of ``to_dict``: ``{"kind": ..., "params": {...}}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("mixing must be an object with a 'kind' field")
    kind = str(spec["kind"]).lower()
    if kind not in _KINDS:
        raise ValidationError(f"unknown mixing kind {spec['kind']!r}; expected one of {sorted(_KINDS)}")
    params = dict(spec.get("params", {}))
    if kind == "discrete":
        params = {"atoms": tuple(params.get("atoms", ())), "probs": tuple(params.get("probs", ()))}
    try:
        return _KINDS[kind](**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for mixing kind {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Expectation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expectation:
    """``E[f(Theta)]`` from the 2N-node rule together with the N-node value."""

    value: np.ndarray
    coarse: np.ndarray
    nodes: int
    converged: bool

    @property
    def discrepancy(self):
        return np.max(np.abs(np.asarray(self.value) - np.asarray(self.coarse)))


def _weighted(f, theta, w):
    vals = np.asarray(f(theta), dtype=float)
    if vals.ndim == 0:
        vals = np.full(theta.shape, float(vals))
    return np.tensordot(w, vals, axes=(0, 0))


def expect_detailed(
    mixing: MixingDistribution,
    f,
    nodes: int = DEFAULT_NODES,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    breaks=(),
) -> Expectation:
    """``E[f(Theta)]`` with the N-versus-2N refinement diagnostic.

    ``f`` maps a 1-d array of theta values to an array whose first axis
    runs over theta.  Discrete laws are summed exactly.  A discrepancy above
    ``atol + rtol |value|`` emits :class:`QuadratureWarning`; one above a
    relative 1e-3 (or a non-finite value) raises :class:`NumericalFailure`.
    ``breaks`` are theta values at which ``f`` is not smooth.
    """
    if mixing.is_degenerate:
        theta, w = mixing.nodes()
        v = _weighted(f, theta, w)
        return Expectation(v, v, len(theta), True)
    nodes = int(nodes)
    if nodes < 2:
        raise ValidationError("quadrature needs at least 2 nodes")
    fine = _weighted(f, *mixing.nodes(2 * nodes, breaks))
    coarse = _weighted(f, *mixing.nodes(nodes, breaks))
    return _judge(fine, coarse, 2 * nodes, rtol, atol)


def _judge(fine, coarse, nodes, rtol, atol):
    fine, coarse = np.asarray(fine), np.asarray(coarse)
    if not (np.all(np.isfinite(fine)) and np.all(np.isfinite(coarse))):
        raise NumericalFailure("mixing expectation is not finite", fine=fine, coarse=coarse)
    gap = np.abs(fine - coarse)
    converged = bool(np.all(gap <= atol + rtol * np.abs(fine)))
    if np.any(gap > FAIL_RTOL * np.maximum(np.abs(fine), atol)):
        raise NumericalFailure(
            "mixing quadrature did not converge (N and 2N node rules disagree); "
            "the expectation may be infinite",
            fine=fine,
            coarse=coarse,
        )
    if not converged:
        warnings.warn(
            f"mixing quadrature: {nodes // 2} and {nodes} node rules differ by {gap.max():.3g}",
            QuadratureWarning,
            stacklevel=3,
        )
    return Expectation(fine, coarse, nodes, converged)


def expect(mixing: MixingDistribution, f, nodes: int = DEFAULT_NODES, rtol: float = 1e-8, atol: float = 1e-12):
    """``E[f(Theta)]``; see :func:`expect_detailed` for the diagnostics."""
    v = expect_detailed(mixing, f, nodes, rtol, atol).value
    return float(v) if np.ndim(v) == 0 else v


def sample(mixing: MixingDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    if int(count) < 1:
        raise ValidationError("count must be at least 1")
    return mixing.sample(rng, count)
