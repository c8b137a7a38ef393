"""The LSME random vector ``Y = mu + Theta beta + Theta^(1/2) Sigma^(1/2) X``.

Given ``Theta = theta`` the vector is elliptical with location
``mu + theta beta`` and scale ``theta Sigma``.  This module holds the model
type, linear maps of it (marginals and weighted sums), the one-dimensional
CDF and quantile, and a sampler.

Indices are 0-based throughout the Python API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import mixing as mx
from . import spherical as sph
from .errors import BracketingError, NumericalFailure, ValidationError
from .generators import GeneratorFamily

__all__ = [
    "LSMEModel",
    "QuantileResult",
    "matrix_sqrt",
    "marginal",
    "aggregate",
    "cdf_1d",
    "quantile_1d",
    "var_vector",
    "sample_model",
    "DEFAULT_TOL",
    "kinks",
]

DEFAULT_TOL = 1e-10
MAX_EXPANSIONS = 200


def matrix_sqrt(sigma) -> np.ndarray:
    """Symmetric positive square root of a symmetric positive definite matrix."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError(f"scale matrix must be square, got shape {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise ValidationError("scale matrix has non-finite entries")
    scale = max(np.max(np.abs(sigma)), 1e-300)
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
        raise ValidationError("scale matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if vals[0] <= 1e-14 * max(vals[-1], 0.0) or vals[0] <= 0:
        raise ValidationError(f"scale matrix is not positive definite: smallest eigenvalue {vals[0]:.6g}")
    return (vecs * np.sqrt(vals)) @ vecs.T


def _vector(name, value, n=None):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if n is not None and arr.shape != (n,):
        raise ValidationError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LSMEModel:
    """``Y | Theta = theta ~ E_n(mu + theta beta, theta Sigma, g_n)``.

    Parameters
    ----------
    family : GeneratorFamily
    mu, beta : array_like, length n
    sigma : array_like, n x n symmetric positive definite scale matrix
    mixing : MixingDistribution
    """

    family: GeneratorFamily
    mu: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    mixing: mx.MixingDistribution

    def __post_init__(self):
        if not isinstance(self.family, GeneratorFamily):
            raise ValidationError("family must be a GeneratorFamily")
        if not isinstance(self.mixing, mx.MixingDistribution):
            raise ValidationError("mixing must be a MixingDistribution")
        mu = _vector("mu", self.mu)
        n = len(mu)
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0 and n == 1:
            sigma = sigma.reshape(1, 1)
        if sigma.shape != (n, n):
            raise ValidationError(f"sigma must be {n}x{n}, got shape {sigma.shape}")
        root = matrix_sqrt(sigma)
        beta = _vector("beta", self.beta, n)
        if n > sph.MAX_DIM:
            from .errors import UnsupportedDimensionError

            raise UnsupportedDimensionError(f"dimension {n} exceeds the supported maximum of {sph.MAX_DIM}")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "sigma", _frozen(0.5 * (sigma + sigma.T)))
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "_root", _frozen(root))

    @classmethod
    def univariate(cls, family, mixing, mu=0.0, sigma=1.0, beta=0.0):
        """One-dimensional model; ``sigma`` is the scale, so ``Sigma = sigma**2``."""
        if not sigma > 0:
            raise ValidationError(f"sigma must be positive, got {sigma}")
        return cls(family, [mu], [[float(sigma) ** 2]], [beta], mixing)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def sigma_sqrt(self) -> np.ndarray:
        return self._root

    @property
    def scale(self) -> float:
        """``sqrt(Sigma_11)`` of a one-dimensional model."""
        self._require_1d()
        return math.sqrt(self.sigma[0, 0])

    def _require_1d(self):
        if self.n != 1:
            raise ValidationError(f"operation needs a one-dimensional model, got n={self.n}")

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "beta": self.beta.tolist(),
            "mixing": self.mixing.to_dict(),
        }

    def permuted(self, order) -> "LSMEModel":
        order = list(order)
        return LSMEModel(self.family, self.mu[order], self.sigma[np.ix_(order, order)], self.beta[order], self.mixing)

    def affine(self, scale: float, shift) -> "LSMEModel":
        """Model of ``scale * Y + shift`` for ``scale > 0``."""
        shift = np.broadcast_to(np.asarray(shift, dtype=float), self.mu.shape)
        return LSMEModel(self.family, scale * self.mu + shift, scale**2 * self.sigma, scale * self.beta, self.mixing)

    def __eq__(self, other):
        if not isinstance(other, LSMEModel):
            return NotImplemented
        return (
            self.family == other.family
            and self.mixing == other.mixing
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.beta, other.beta)
        )

    __hash__ = None


def marginal(model: LSMEModel, k: int) -> LSMEModel:
    """Coordinate ``k`` (0-based) as a one-dimensional model."""
    if not 0 <= int(k) < model.n:
        raise ValidationError(f"index {k} out of range for n={model.n}")
    k = int(k)
    return LSMEModel(model.family, [model.mu[k]], [[model.sigma[k, k]]], [model.beta[k]], model.mixing)


def aggregate(model: LSMEModel, weights=None) -> LSMEModel:
    """``w^T Y`` as a one-dimensional model (all-ones weights by default)."""
    w = np.ones(model.n) if weights is None else _vector("weights", weights, model.n)
    if not np.any(w != 0):
        raise ValidationError("aggregation weights are all zero")
    var = float(w @ model.sigma @ w)
    return LSMEModel(model.family, [float(w @ model.mu)], [[var]], [float(w @ model.beta)], model.mixing)


# ---------------------------------------------------------------------------
# One-dimensional CDF and quantile
# ---------------------------------------------------------------------------


def kinks(y, mu, beta):
    """Theta values at which ``y - mu - theta beta`` changes sign (positive ones only).

    Some univariate tails (Laplace) are not smooth at a zero threshold, so the
    mixing quadrature is split there.
    """
    y, mu, beta = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (y, mu, beta)))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = (y - mu) / beta
    return tuple(sorted(set(float(v) for v in r[(beta != 0) & np.isfinite(r) & (r > 0)])))


def _standardise(model, y, theta):
    return (y - model.mu[0] - theta * model.beta[0]) / (np.sqrt(theta) * model.scale)


def _cdf_on_rule(model, y, theta, w):
    return float(w @ sph.univariate_cdf(model.family, _standardise(model, y, theta)))


def cdf_1d(model: LSMEModel, y, nodes: int = mx.DEFAULT_NODES) -> float:
    """``F_Y(y) = E[F_Z((y - mu - Theta beta) / (sqrt(Theta) sigma))]``."""
    model._require_1d()
    y = float(y)
    fam = model.family
    res = mx.expect_detailed(
        model.mixing,
        lambda th: sph.univariate_cdf(fam, _standardise(model, y, th)),
        nodes,
        breaks=kinks(y, model.mu[0], model.beta[0]),
    )
    return float(np.clip(res.value, 0.0, 1.0))


@dataclass(frozen=True)
class QuantileResult:
    """``y_q`` with ``|F_Y(y_q) - q| = residual``."""

    y_q: float
    q: float
    iterations: int
    residual: float
    bracket: tuple = field(default=(), compare=False)

    def __float__(self):
        return self.y_q


def _check_q(q):
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"probability level must lie in (0, 1), got {q}")
    return q


def quantile_1d(model: LSMEModel, q, tol: float = DEFAULT_TOL, nodes: int = mx.DEFAULT_NODES) -> QuantileResult:
    """Value-at-risk ``y_q`` with ``F_Y(y_q) = q``.

    Brackets by doubling steps around ``mu + E[Theta] beta`` (the median of
    Theta when the mean is infinite), then runs Brent's method on the
    2N-node CDF.  The N-versus-2N refinement check is applied once at the
    root.
    """
    model._require_1d()
    q = _check_q(q)
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    mixing = model.mixing
    mu0, beta0 = model.mu[0], model.beta[0]

    def f(y):
        if mixing.is_degenerate:
            theta, w = mixing.nodes()
        else:
            theta, w = mixing.nodes(2 * nodes, kinks(y, mu0, beta0))
        return _cdf_on_rule(model, y, theta, w) - q

    centre_theta = mixing.mean() if mixing.has_finite_mean else mixing._scale_hint
    centre = model.mu[0] + centre_theta * model.beta[0]
    step = model.scale * math.sqrt(centre_theta) + abs(model.beta[0]) * centre_theta + 1e-12
    lo = hi = centre
    flo, fhi = f(lo), f(hi)
    expansions = 0
    while not (flo < 0 < fhi or flo == 0 or fhi == 0):
        expansions += 1
        if expansions > MAX_EXPANSIONS:
            raise BracketingError(f"could not bracket the {q} quantile", lo=lo, hi=hi, f_lo=flo, f_hi=fhi)
        if flo >= 0:
            lo, flo = centre - step, f(centre - step)
        if fhi <= 0:
            hi, fhi = centre + step, f(centre + step)
        step *= 2.0
    if flo == 0:
        root, iters = lo, 0
    elif fhi == 0:
        root, iters = hi, 0
    else:
        root, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200, full_output=True)
        if not info.converged:
            raise NumericalFailure("quantile root-finder did not converge", lo=lo, hi=hi)
        iters = info.iterations
    residual = abs(f(root))
    if not mixing.is_degenerate:
        # refinement check of the CDF at the root
        mx.expect_detailed(
            mixing,
            lambda th: sph.univariate_cdf(model.family, _standardise(model, root, th)),
            nodes,
            breaks=kinks(root, mu0, beta0),
        )
    if residual > tol:
        raise NumericalFailure(
            f"quantile residual {residual:.3g} exceeds tolerance {tol:.3g}", y_q=root, residual=residual
        )
    return QuantileResult(float(root), q, int(iters) + expansions, float(residual), (float(lo), float(hi)))


def var_vector(model: LSMEModel, q, tol: float = DEFAULT_TOL, nodes: int = mx.DEFAULT_NODES) -> np.ndarray:
    """Componentwise value-at-risk; ``q`` is a scalar or one level per coordinate."""
    qs = np.broadcast_to(np.asarray(q, dtype=float), (model.n,))
    return np.array([quantile_1d(marginal(model, k), qs[k], tol, nodes).y_q for k in range(model.n)])


def sample_model(model: LSMEModel, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` draws of ``Y`` as an array of shape ``(count, n)``."""
    count = int(count)
    if count < 1:
        raise ValidationError("count must be at least 1")
    theta = model.mixing.sample(rng, count)
    x = sph.sample_spherical(model.family, model.n, rng, count)
    return model.mu + theta[:, None] * model.beta + np.sqrt(theta)[:, None] * (x @ model.sigma_sqrt.T)
