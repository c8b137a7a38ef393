"""Multivariate TCE and TCE-based allocation of a portfolio sum.

MTCE
----
With ``y`` the vector of componentwise value-at-risk levels, MTCE is
``E[Y | Y_1 > y_1, ..., Y_n > y_n]``.  Conditionally on ``Theta = theta`` the
vector is elliptical, and the standard identity for elliptical tail means
gives, with ``W`` the correlation-scale spherical-type vector, ``R`` the
correlation matrix of ``Sigma`` and ``s_k = sqrt(Sigma_kk)``:

    E[(Y - mu - theta beta) 1{Y > y} | theta] = sqrt(theta) diag(s) R h(theta),
    h_j = c_n N(t_j^2 / 2) P_j(...),

where ``t = (y - mu - theta beta) / (sqrt(theta) s)`` and ``P_j`` is the
orthant probability of the deleted-component law of the remaining
coordinates (conditional correlation ``R_{-j,-j} - r_j r_j^T``).

``weighted`` mode divides the theta-average of this numerator by the
theta-average of ``D(theta) = P(W > t)``.  ``literal`` mode evaluates the
spherical formula ``delta = c_n N F_{Z-k} / F_Z`` at
``xi = Sigma^(-1/2)(y - mu - theta beta)/sqrt(theta)`` and averages
``theta beta + sqrt(theta) Sigma^(1/2) delta`` with the unconditional law of
Theta.  The spherical formula ignores the rotation ``Sigma^(1/2)``, so it is
exact only for diagonal ``Sigma`` and degenerate Theta.

Allocation
----------
``TCE_{Y_k | S} = E[Y_k | S > s_q]``.  The pair ``(Y_k, S)`` is again LSME,
and every contribution is built from the same three expectations as
``TCE_S`` (see :mod:`lsme.univariate`), so the contributions add up to the
total to rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mixing as mx
from . import spherical as sph
from .errors import DegeneratePairError, ValidationError, VanishingTailError
from .generators import Kind, log_tail_density_normalizer, normalizing_constant
from .model import DEFAULT_TOL, LSMEModel, _check_q, aggregate, kinks, var_vector
from .univariate import TAIL_FLOOR, Mode, basis, tce_1d

__all__ = [
    "MtceOutcome",
    "AllocationOutcome",
    "mtce",
    "pair_model",
    "conditional_tce",
    "conditional_tce_pair",
    "allocate",
]


@dataclass(frozen=True)
class MtceOutcome:
    """Result of :func:`mtce`.

    ``joint_tail`` is ``P(Y > y)`` in weighted mode; in literal mode it is the
    theta-average of the spherical orthant at ``xi``.  ``joint_tail_stderr``
    averages the orthant evaluators' own error estimates.
    """

    value: np.ndarray
    var_vector: np.ndarray
    mode: Mode
    q: np.ndarray
    joint_tail: float
    joint_tail_stderr: float
    nodes: int
    warnings: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "value": [float(v) for v in self.value],
            "var_vector": [float(v) for v in self.var_vector],
            "mode": self.mode.value,
            "q": [float(v) for v in self.q],
            "joint_tail": self.joint_tail,
            "joint_tail_stderr": self.joint_tail_stderr,
            "nodes": self.nodes,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class AllocationOutcome:
    """Result of :func:`allocate`: ``contributions[k] = E[Y_k | S > s_q]``."""

    contributions: np.ndarray
    total: float
    s_q: float
    mode: Mode
    q: float
    tail_probability: float
    nodes: int
    warnings: tuple = field(default=(), compare=False)

    @property
    def additivity_gap(self) -> float:
        return float(abs(math.fsum(self.contributions) - self.total))

    def to_dict(self) -> dict:
        return {
            "contributions": [float(v) for v in self.contributions],
            "total": self.total,
            "s_q": self.s_q,
            "mode": self.mode.value,
            "q": self.q,
            "tail_probability": self.tail_probability,
            "additivity_gap": self.additivity_gap,
            "nodes": self.nodes,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Pairs and allocation
# ---------------------------------------------------------------------------


def pair_model(model: LSMEModel, k: int) -> LSMEModel:
    """The pair ``(Y_k, S)`` with ``S = Y_1 + ... + Y_n`` (``k`` is 0-based).

    Raises :class:`DegeneratePairError` when the pair's scale matrix is
    singular, e.g. for ``n = 1`` where ``S = Y_1``.
    """
    if not 0 <= int(k) < model.n:
        raise ValidationError(f"index {k} out of range for n={model.n}")
    k = int(k)
    sig = model.sigma
    row = float(sig[k].sum())
    total = float(sig.sum())
    pair_sigma = np.array([[sig[k, k], row], [row, total]])
    det = sig[k, k] * total - row * row
    if det <= 1e-12 * sig[k, k] * total:
        raise DegeneratePairError(
            f"pair (Y_{k}, S) has a singular scale matrix (determinant {det:.3g}); S is a multiple of Y_{k}"
        )
    return LSMEModel(
        model.family,
        [model.mu[k], float(model.mu.sum())],
        pair_sigma,
        [model.beta[k], float(model.beta.sum())],
        model.mixing,
    )


def conditional_tce(
    target_mu,
    target_beta,
    cross_cov,
    conditioning: LSMEModel,
    q,
    mode=Mode.WEIGHTED,
    nodes: int = mx.DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
) -> float:
    """``E[X | Y > VaR_q(Y)]`` for ``X`` jointly LSME with the 1-d ``conditioning`` variable.

    ``X`` enters only through its location ``target_mu``, skewness
    ``target_beta`` and scale covariance ``cross_cov = Sigma_XY``, so the pair
    need not have a non-singular scale matrix (``X = Y`` is allowed).
    """
    b = basis(conditioning, q, mode, nodes, tol, need_theta=bool(target_beta != 0))
    return float(b.combine(target_mu, target_beta, cross_cov / conditioning.scale))


def conditional_tce_pair(pair: LSMEModel, q, mode=Mode.WEIGHTED, nodes: int = mx.DEFAULT_NODES, tol: float = DEFAULT_TOL) -> float:
    """``E[Y_1 | Y_2 > VaR_q(Y_2)]`` for a two-dimensional model."""
    if pair.n != 2:
        raise ValidationError(f"conditional_tce_pair needs a 2-dimensional model, got n={pair.n}")
    second = LSMEModel(pair.family, [pair.mu[1]], [[pair.sigma[1, 1]]], [pair.beta[1]], pair.mixing)
    return conditional_tce(pair.mu[0], pair.beta[0], pair.sigma[0, 1], second, q, mode, nodes, tol)


def allocate(model: LSMEModel, q, mode=Mode.WEIGHTED, nodes: int = mx.DEFAULT_NODES, tol: float = DEFAULT_TOL) -> AllocationOutcome:
    """TCE allocation ``E[Y_k | S > s_q]`` of ``TCE_S`` to the components.

    The quantile ``s_q`` and the theta-expectations are computed once for
    ``S`` and shared by every component and by the total.
    """
    total_model = aggregate(model)
    need_theta = bool(np.any(model.beta != 0) or total_model.beta[0] != 0)
    b = basis(total_model, q, mode, nodes, tol, need_theta=need_theta)
    sigma_s = total_model.scale
    loadings = model.sigma.sum(axis=1) / sigma_s
    contributions = b.combine(model.mu, model.beta, loadings)
    total = float(b.combine(total_model.mu[0], total_model.beta[0], sigma_s))
    contributions.setflags(write=False)
    return AllocationOutcome(contributions, total, b.y_q, b.mode, b.q, b.tail, b.nodes, b.warnings)


# ---------------------------------------------------------------------------
# MTCE
# ---------------------------------------------------------------------------


_LOG_UNDERFLOW = -745.0
_LOG_PRECISION = 1e8  # |log P| beyond which differences of logs keep < 8 digits


def _q_vector(q, n):
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    if qs.shape == (1,):
        qs = np.repeat(qs, n)
    if qs.shape != (n,):
        raise ValidationError(f"q must be a scalar or have length {n}, got {qs.shape[0]} values")
    return np.array([_check_q(v) for v in qs])


class _RowCache:
    """Per-theta kernel rows, memoised so the error column can be averaged
    after the value columns have been integrated (it is not smooth in theta
    and is kept out of the refinement check)."""

    def __init__(self, row):
        self.row = row
        self.rows = {}

    def _get(self, theta):
        out = self.rows.get(theta)
        if out is None:
            out = self.rows[theta] = self.row(theta)
        return out

    def values(self, theta):
        return np.array([self._get(float(v))[:-1] for v in np.atleast_1d(theta)])

    def errors(self, theta):
        return np.array([self._get(float(v))[-1] for v in np.atleast_1d(theta)])


class _ConditionalStructure:
    """Per-coordinate conditional correlations used by the deleted-law orthants."""

    def __init__(self, corr):
        n = corr.shape[0]
        self.diagonal = bool(np.all(corr[~np.eye(n, dtype=bool)] == 0.0))
        self.parts = []
        for j in range(n):
            rest = [i for i in range(n) if i != j]
            r = corr[rest, j]
            cond = corr[np.ix_(rest, rest)] - np.outer(r, r)
            s = np.sqrt(np.diag(cond))
            self.parts.append((rest, r, s, cond / np.outer(s, s)))


def _weighted_kernel(model: LSMEModel, y, need_theta: bool):
    fam, n = model.family, model.n
    sd = np.sqrt(np.diag(model.sigma))
    corr = model.sigma / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    struct = _ConditionalStructure(corr)
    log_cn = math.log(normalizing_constant(fam, n))

    def one(theta):
        sq = math.sqrt(theta)
        t = (y - model.mu - theta * model.beta) / (sq * sd)
        joint = sph.correlated_tail(fam, corr, t)
        h = np.empty(n)
        for j, (rest, r, s, cond) in enumerate(struct.parts):
            a = 0.5 * t[j] ** 2
            log_pref = log_cn + log_tail_density_normalizer(fam, n, a)
            if log_pref < _LOG_UNDERFLOW:
                h[j] = 0.0  # the deleted orthant cannot matter
                continue
            b = (t[rest] - r * t[j]) / s
            p = sph.correlated_deleted_tail(fam, n, cond, b, a)
            h[j] = math.exp(log_pref + p.log)
        numer = sq * sd * (corr @ h)
        th = theta * joint.value if need_theta else 0.0
        return np.concatenate([[joint.value, th], numer, [joint.error]])

    return _RowCache(one)


def _literal_kernel(model: LSMEModel, y, need_theta: bool):
    fam, n = model.family, model.n
    root = model.sigma_sqrt
    root_inv = np.linalg.inv(root)
    log_cn = math.log(normalizing_constant(fam, n))

    def one(theta):
        sq = math.sqrt(theta)
        xi = root_inv @ (y - model.mu - theta * model.beta) / sq
        joint = sph.multivariate_tail_estimate(fam, n, xi)
        log_joint = joint.log
        if fam.kind is Kind.NORMAL:
            # independent coordinates: delta_k is Mills' ratio of xi_k
            delta = sph.tail_mean_ratio(fam, xi)
        elif not abs(log_joint) < _LOG_PRECISION:
            # every digit of log_delta would cancel; the conditional mean of
            # Z_k follows its threshold this far out
            delta = np.maximum(xi, 0.0)
        else:
            delta = np.empty(n)
            for k in range(n):
                a = 0.5 * xi[k] ** 2
                p = sph.deleted_tail_estimate(fam, n, np.delete(xi, k), a)
                log_delta = log_cn + log_tail_density_normalizer(fam, n, a) + p.log - log_joint
                delta[k] = math.exp(log_delta) if log_delta < 700.0 else max(xi[k], 0.0)
        th = theta if need_theta else 0.0
        return np.concatenate([[joint.value, th], sq * (root @ delta), [joint.error]])

    return _RowCache(one)


def mtce(model: LSMEModel, q, mode=Mode.WEIGHTED, nodes: int = mx.DEFAULT_NODES, tol: float = DEFAULT_TOL) -> MtceOutcome:
    """``E[Y | Y_k > VaR_{q_k}(Y_k) for all k]``.

    ``q`` is one level for every coordinate or a vector of per-coordinate
    levels.  For ``n = 1`` this is :func:`lsme.univariate.tce_1d`.
    """
    mode = Mode.parse(mode)
    n = model.n
    qs = _q_vector(q, n)
    if n == 1:
        out = tce_1d(model, qs[0], mode, nodes, tol)
        return MtceOutcome(
            np.array([out.value]), np.array([out.var]), mode, qs, out.tail_probability, 0.0, out.nodes, out.warnings
        )
    y = var_vector(model, qs, tol, nodes)
    need_theta = bool(np.any(model.beta != 0))
    if mode is Mode.WEIGHTED:
        kernel = _weighted_kernel(model, y, need_theta)
    else:
        kernel = _literal_kernel(model, y, need_theta)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", mx.QuadratureWarning)
        breaks = kinks(y, model.mu, model.beta)
        res = mx.expect_detailed(model.mixing, kernel.values, nodes, breaks=breaks)
    theta, w = model.mixing.nodes() if model.mixing.is_degenerate else model.mixing.nodes(2 * nodes, breaks)
    err = float(w @ kernel.errors(theta))
    cols = np.asarray(res.value, dtype=float)
    tail, theta_term, numer = cols[0], cols[1], cols[2 : 2 + n]
    if tail < TAIL_FLOOR:
        raise VanishingTailError(f"joint tail probability {tail:.3g} is below {TAIL_FLOOR:g}", tail=tail)
    if mode is Mode.WEIGHTED:
        value = model.mu + (model.beta * theta_term + numer) / tail
    else:
        value = model.mu + model.beta * theta_term + numer
    value.setflags(write=False)
    notes = tuple(str(w.message) for w in caught if issubclass(w.category, mx.QuadratureWarning))
    return MtceOutcome(value, y, mode, qs, float(tail), float(err), res.nodes, notes)
