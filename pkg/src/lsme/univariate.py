"""Tail conditional expectation of a univariate LSME variable.

Given ``Theta = theta`` the variable ``Y`` is elliptical, and with the
standardised threshold ``z(theta) = (y_q - mu - theta beta) / (sqrt(theta) sigma)``

    E[(Y - mu) 1{Y > y_q} | theta] = theta beta Fbar(z) + sqrt(theta) sigma Gbar_1(z^2 / 2).

Two ways of averaging over Theta are offered:

``weighted`` (default)
    ``mu + E[N(Theta)] / E[D(Theta)]`` with ``D = Fbar(z)`` and ``N`` the
    right-hand side above.  This is the conditional mean ``E[Y | Y > y_q]``.
``literal``
    ``mu + E[theta beta + sqrt(theta) sigma Gbar_1 / Fbar]``, i.e. the
    per-theta conditional tail means averaged with the *unconditional* law of
    Theta.  Kept for comparison; it coincides with ``weighted`` only when
    Theta is degenerate.

The same three expectations (the *basis*) also drive conditional TCEs of a
second variable given the exceedance of the first, which is how portfolio
allocation stays exactly additive.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mixing as mx
from . import spherical as sph
from .errors import ValidationError, VanishingTailError
from .generators import log_cumulative_generator
from .model import DEFAULT_TOL, LSMEModel, aggregate, kinks, quantile_1d

__all__ = ["Mode", "TceOutcome", "tce_1d", "tce_sum", "TAIL_FLOOR"]

TAIL_FLOOR = 1e-12


class Mode(str, enum.Enum):
    WEIGHTED = "weighted"
    LITERAL = "literal"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        aliases = {"exceedance_weighted": "weighted"}
        text = str(value).strip().lower()
        try:
            return cls(aliases.get(text, text))
        except ValueError:
            raise ValidationError(f"mode must be 'weighted' or 'literal', got {value!r}") from None


@dataclass(frozen=True)
class TceOutcome:
    """Result of :func:`tce_1d` or :func:`tce_sum`.

    ``tail_probability`` is ``E[D(Theta)] = P(Y > y_q)``, which should equal
    ``1 - q``; it is a free consistency check on the quadrature.
    """

    value: float
    var: float
    mode: Mode
    q: float
    tail_probability: float
    nodes: int
    warnings: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["warnings"] = list(self.warnings)
        return out


@dataclass(frozen=True)
class Basis:
    """``E[D]``, ``E[theta D]`` (or ``E[theta]``) and ``E[sqrt(theta) Gbar_1 (/ D)]``."""

    y_q: float
    q: float
    mode: Mode
    tail: float
    theta_term: float
    scale_term: float
    nodes: int
    warnings: tuple

    def combine(self, mu, beta, loading):
        """``mu + E[theta beta D + sqrt(theta) loading Gbar] / E[D]`` (or the literal analogue).

        ``loading`` is ``Cov(target, conditioning) / sigma_conditioning``.
        """
        mu, beta, loading = (np.asarray(v, dtype=float) for v in (mu, beta, loading))
        if self.mode is Mode.WEIGHTED:
            return mu + (beta * self.theta_term + loading * self.scale_term) / self.tail
        return mu + beta * self.theta_term + loading * self.scale_term


def _basis_columns(model: LSMEModel, y, mode: Mode, need_theta: bool):
    fam = model.family
    mu, beta, sigma = model.mu[0], model.beta[0], model.scale

    def columns(theta):
        sq = np.sqrt(theta)
        z = (y - mu - theta * beta) / (sq * sigma)
        d = np.exp(sph.log_univariate_tail(fam, z))
        if mode is Mode.WEIGHTED:
            th = theta * d if need_theta else np.zeros_like(theta)
            return np.stack([d, th, sq * np.exp(log_cumulative_generator(fam, 1, 0.5 * z * z))], axis=1)
        th = theta if need_theta else np.zeros_like(theta)
        return np.stack([d, th, sq * sph.tail_mean_ratio(fam, z)], axis=1)

    return columns


def basis(
    model: LSMEModel,
    q,
    mode=Mode.WEIGHTED,
    nodes: int = mx.DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
    need_theta: bool = True,
) -> Basis:
    """Quantile of the one-dimensional ``model`` and the three expectations at it.

    ``need_theta=False`` skips the ``theta`` column (all targets have
    ``beta = 0``); this matters in literal mode when ``E[Theta]`` is infinite.
    """
    model._require_1d()
    mode = Mode.parse(mode)
    qr = quantile_1d(model, q, tol, nodes)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", mx.QuadratureWarning)
        res = mx.expect_detailed(
            model.mixing,
            _basis_columns(model, qr.y_q, mode, need_theta),
            nodes,
            breaks=kinks(qr.y_q, model.mu[0], model.beta[0]),
        )
    tail, th, sc = (float(v) for v in res.value)
    if tail < TAIL_FLOOR:
        raise VanishingTailError(f"tail probability {tail:.3g} is below {TAIL_FLOOR:g}", tail=tail, y_q=qr.y_q)
    notes = tuple(str(w.message) for w in caught if issubclass(w.category, mx.QuadratureWarning))
    return Basis(qr.y_q, qr.q, mode, tail, th, sc, res.nodes, notes)


def tce_1d(model: LSMEModel, q, mode=Mode.WEIGHTED, nodes: int = mx.DEFAULT_NODES, tol: float = DEFAULT_TOL) -> TceOutcome:
    """``TCE_q(Y) = E[Y | Y > VaR_q(Y)]`` of a one-dimensional model."""
    b = basis(model, q, mode, nodes, tol, need_theta=bool(model.beta[0] != 0))
    value = float(b.combine(model.mu[0], model.beta[0], model.scale))
    return TceOutcome(value, b.y_q, b.mode, b.q, b.tail, b.nodes, b.warnings)


def tce_sum(model: LSMEModel, q, mode=Mode.WEIGHTED, nodes: int = mx.DEFAULT_NODES, tol: float = DEFAULT_TOL) -> TceOutcome:
    """TCE of the portfolio sum ``S = Y_1 + ... + Y_n``."""
    return tce_1d(aggregate(model), q, mode, nodes, tol)
