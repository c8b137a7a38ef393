"""Upper-orthant probabilities ``P(W_1 > t_1, ..., W_d > t_d)``.

``W = A X`` where ``X`` is spherical on R^d and ``A A^T = R`` is a
correlation matrix (``R = I`` in the spherical case).  Two kinds of spherical
law appear in the risk formulas: the *joint* law ``E_n(0, I, g_n)`` and the
*deleted* law of the remaining coordinates after one coordinate has been
integrated above its threshold, whose density is proportional to
``Gbar_n(|z|^2/2 + a)``.

Each law knows how to evaluate identity orthants deterministically and
exposes a radial CDF.  Correlated orthants use

* ``d = 1``: the identity evaluator (a single coordinate is never correlated);
* ``d = 2``: angular quadrature of ``F_R(hi(phi)) - F_R(lo(phi))``;
* ``d >= 3``: a separation-of-variables lattice rule for normal laws and
  radius-conditional Monte Carlo over fixed directions for the others.

Every evaluator returns a :class:`TailEstimate` carrying an error estimate;
Monte Carlo paths use fixed seeds so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np
from scipy import special
from scipy.interpolate import CubicHermiteSpline

from . import generators as gen
from .errors import NumericalFailure
from .generators import Kind

_LOG_DROP = 40.0  # integrand mass below exp(max - 40) is ignored
_DIRECTION_PAIRS = 8192
_LATTICE_POINTS = 1009
_LATTICE_SHIFTS = 12
_SEED = 0x15E


@dataclass(frozen=True)
class TailEstimate:
    """A probability together with an absolute error estimate.

    ``log_value`` is set by evaluators that can return the logarithm
    accurately after the probability itself has underflowed.
    """

    value: float
    error: float
    method: str
    log_value: Optional[float] = None

    def __float__(self):
        return float(self.value)

    @property
    def log(self) -> float:
        if self.log_value is not None:
            return float(self.log_value)
        return math.log(self.value) if self.value > 0 else -math.inf


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _gl_nodes(lo, hi, n):
    x, w = gauss_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


# ---------------------------------------------------------------------------
# Radial CDF by tabulation
# ---------------------------------------------------------------------------


class RadialTable:
    """Tabulated CDF of a radius with unnormalised log-density ``log_density``.

    The support is cut at ``r_max`` where the log-density has dropped 40 nats
    below its peak (so the discarded mass is far below 1e-12).  The CDF is a
    cubic Hermite interpolant through 2048 panel edges whose masses come from
    8-point Gauss-Legendre rules.
    """

    def __init__(self, log_density, panels: int = 2048):
        probe = np.concatenate([[0.0], np.geomspace(1e-6, 1e4, 4000)])
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = log_density(probe)
        lv = np.where(np.isfinite(lv), lv, -np.inf)
        top = lv.max()
        alive = np.nonzero(lv > top - _LOG_DROP - 10.0)[0]
        self.r_max = float(probe[min(alive[-1] + 1, len(probe) - 1)])
        edges = np.linspace(0.0, self.r_max, panels + 1)
        x, w = gauss_legendre(8)
        half = 0.5 * (edges[1] - edges[0])
        nodes = edges[:-1, None] + half * (x[None, :] + 1.0)
        with np.errstate(divide="ignore"):
            mass = (np.exp(log_density(nodes) - top) * w).sum(axis=1) * half
        cdf = np.concatenate([[0.0], np.cumsum(mass)])
        total = cdf[-1]
        with np.errstate(divide="ignore"):
            dens = np.exp(log_density(edges) - top)
        dens = np.where(np.isfinite(dens), dens, 0.0)
        self.edges = edges
        self.cdf_edges = cdf / total
        self._log_norm = top + math.log(total)
        self._log_density = log_density
        self._spline = CubicHermiteSpline(edges, self.cdf_edges, dens / total)

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(self._log_density(np.clip(r, 0.0, None)) - self._log_norm)
        return np.where((r > 0) & np.isfinite(out), out, 0.0)

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        inner = self._spline(np.clip(r, 0.0, self.r_max))
        out = np.where(r >= self.r_max, 1.0, np.clip(inner, 0.0, 1.0))
        return np.where(r <= 0.0, 0.0, out)

    def ppf(self, p):
        """Inverse CDF: linear start inside the right panel, then Newton steps."""
        p = np.asarray(p, dtype=float)
        idx = np.clip(np.searchsorted(self.cdf_edges, p, side="right") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[idx], self.edges[idx + 1]
        clo, chi = self.cdf_edges[idx], self.cdf_edges[idx + 1]
        span = np.where(chi > clo, chi - clo, 1.0)
        r = lo + (hi - lo) * np.clip((p - clo) / span, 0.0, 1.0)
        for _ in range(4):
            dens = self._spline(r, 1)
            step = np.where(dens > 0, (self._spline(r) - p) / np.where(dens > 0, dens, 1.0), 0.0)
            r = np.clip(r - step, lo, hi)
        return r


# ---------------------------------------------------------------------------
# One-dimensional integrals over a log-scale mixing variable
# ---------------------------------------------------------------------------


def _log_integral(logf, lo=-60.0, hi=60.0, upper_cap=690.0):
    """``log int exp(logf(x)) dx`` with GL-128 on the window where ``logf``
    is within 40 nats of its peak; also returns the GL-64 discrepancy.

    The window grows while the peak region touches its ends and shrinks while
    the peak region covers too few grid points (very sharp peaks arise for
    extreme thresholds)."""
    for _ in range(40):
        grid = np.linspace(lo, hi, 2401)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            vals = logf(grid)
        vals = np.where(np.isfinite(vals), vals, -np.inf)
        top = vals.max()
        if not np.isfinite(top):
            return -np.inf, 0.0
        alive = np.nonzero(vals >= top - _LOG_DROP)[0]
        grow_lo = alive[0] == 0 and lo > -5000.0
        grow_hi = alive[-1] == len(grid) - 1 and hi < upper_cap
        if grow_lo or grow_hi:
            width = hi - lo
            lo = lo - width if grow_lo else lo
            hi = min(hi + width, upper_cap) if grow_hi else hi
            continue
        if len(alive) >= 50 or grid[1] - grid[0] < 1e-12 * max(1.0, abs(grid[alive[0]])):
            break
        lo = grid[max(alive[0] - 1, 0)]
        hi = grid[min(alive[-1] + 1, len(grid) - 1)]
    a = grid[max(alive[0] - 1, 0)]
    b = grid[min(alive[-1] + 1, len(grid) - 1)]
    estimates = []
    for n in (128, 64):
        x, w = _gl_nodes(a, b, n)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = logf(x)
        v = np.where(np.isfinite(v), v, -np.inf)
        estimates.append(float((w * np.exp(v - top)).sum()))
    fine, coarse = estimates
    if fine <= 0:
        return -np.inf, 0.0
    return top + math.log(fine), abs(fine - coarse) / fine


class _ScaleMixtureOrthant:
    """``P(N > t * s(V))`` for ``N`` standard normal and a scalar mixing ``V``.

    ``log_weight(x)`` is the (unnormalised) log density of ``x = log V`` and
    ``log_scale(x)`` the log of the factor applied to the thresholds.
    """

    def __init__(self, log_weight, log_scale):
        self.log_weight = log_weight
        self.log_scale = log_scale
        self._log_z, self._z_err = _log_integral(log_weight)

    def __call__(self, t) -> TailEstimate:
        t = np.asarray(t, dtype=float)

        def logf(x):
            s = np.exp(self.log_scale(x))[:, None]
            return self.log_weight(x) + special.log_ndtr(-t[None, :] * s).sum(axis=1)

        log_num, num_err = _log_integral(logf)
        log_value = min(log_num - self._log_z, 0.0)
        value = math.exp(log_value)
        return TailEstimate(value, value * (num_err + self._z_err) + 1e-15, "scale-mixture", log_value)


def _log_chi2_weight(k):
    # density of x = log V for V ~ chi^2_k
    const = -k / 2.0 * math.log(2.0) - special.gammaln(k / 2.0)
    return lambda x: const + k / 2.0 * x - 0.5 * np.exp(x)


def _log_gig_weight(lam, chi, psi):
    # density of x = log T for T ~ GIG(lam, chi, psi), unnormalised
    return lambda x: lam * x - 0.5 * (chi * np.exp(-x) + psi * np.exp(x))


# ---------------------------------------------------------------------------
# Alternating Gaussian series (logistic laws)
# ---------------------------------------------------------------------------


def _gaussian_series_orthant(t, log_coef, base_sum) -> TailEstimate:
    """``sum_k (-1)^(k-1) c_k prod_i Phibar(sqrt(k) t_i) / base_sum``.

    ``c_k = exp(log_coef(k))`` and ``base_sum = sum_k (-1)^(k-1) c_k``.
    Negative thresholds are complemented (inclusion-exclusion), so every
    series that is actually summed decays and is completely monotone in k.
    """
    t = np.asarray(t, dtype=float)
    pos = np.abs(t[t > 0])
    neg = np.abs(t[t < 0])
    n_zero = int(np.sum(t == 0))
    k = np.arange(1, gen._CVZ_TERMS + 1, dtype=float)
    lc = log_coef(k)
    sqk = np.sqrt(k)[:, None]
    log_pos = special.log_ndtr(-sqk * pos[None, :]).sum(axis=1) if len(pos) else np.zeros_like(k)
    log_neg = special.log_ndtr(-sqk * neg[None, :]) if len(neg) else np.zeros((len(k), 0))
    # terms are accumulated relative to exp(ref), the scale of the first term,
    # so the logarithm stays available when the probability underflows
    total, ref = 0.0, None
    for size in range(len(neg) + 1):
        sign = -1.0 if size % 2 else 1.0
        for subset in combinations(range(len(neg)), size):
            if len(pos) == 0 and size == 0:
                ref = 0.0
                total += base_sum
                continue
            logs = lc + log_pos + (log_neg[:, list(subset)].sum(axis=1) if size else 0.0)
            shift = logs[0]
            if ref is None:
                ref = shift
            part = float(gen.alternating_sum(np.exp(logs - shift)))
            total += sign * math.exp(shift - ref) * part
    log_value = None
    if total > 0:
        log_value = min(ref + math.log(total) + n_zero * math.log(0.5) - math.log(base_sum), 0.0)
    value = math.exp(log_value) if log_value is not None else 0.0
    return TailEstimate(float(min(max(value, 0.0), 1.0)), 1e-13, "alternating-series", log_value)


# ---------------------------------------------------------------------------
# Spherical laws
# ---------------------------------------------------------------------------


class _Law:
    dim: int
    is_normal = False

    def orthant(self, t) -> TailEstimate:
        raise NotImplementedError

    def radial_cdf(self, r):
        raise NotImplementedError


class NormalLaw(_Law):
    is_normal = True

    def __init__(self, dim):
        self.dim = dim

    def orthant(self, t):
        t = np.asarray(t, dtype=float)
        log_value = float(special.log_ndtr(-t).sum())
        return TailEstimate(math.exp(log_value), 0.0, "exact", log_value)

    def radial_cdf(self, r):
        return special.gammainc(self.dim / 2.0, 0.5 * np.square(r))


class StudentLaw(_Law):
    """``scale * T`` with ``T`` multivariate Student-t with ``df`` degrees of freedom."""

    def __init__(self, dim, df, scale=1.0):
        self.dim, self.df, self.scale = dim, float(df), float(scale)
        if dim > 1:
            log_s = math.log(self.scale) + 0.5 * math.log(self.df)
            self._mix = _ScaleMixtureOrthant(_log_chi2_weight(self.df), lambda x: 0.5 * x - log_s)

    def orthant(self, t):
        t = np.asarray(t, dtype=float)
        if self.dim == 1:
            z = t[0] / self.scale
            return TailEstimate(float(special.stdtr(self.df, -z)), 0.0, "exact", float(log_student_tail(self.df, z)))
        return self._mix(t)

    def radial_cdf(self, r):
        r = np.asarray(r, dtype=float)
        x = np.square(np.where(np.isfinite(r), r, 0.0) / self.scale) / self.dim
        return np.where(np.isfinite(r), special.fdtr(self.dim, self.df, x), 1.0)


class LaplaceJointLaw(_Law):
    """Density proportional to ``exp(-|z|)``: a normal scale mixture with ``V ~ chi^2_(d+1)``."""

    def __init__(self, dim):
        self.dim = dim
        if dim > 1:
            self._mix = _ScaleMixtureOrthant(_log_chi2_weight(dim + 1.0), lambda x: -0.5 * x)

    def orthant(self, t):
        t = np.asarray(t, dtype=float)
        if self.dim == 1:
            z = float(t[0])
            val = 0.5 * math.exp(-z) if z >= 0 else -0.5 * math.expm1(z) + 0.5
            log_value = math.log(0.5) - z if z >= 0 else math.log(val)
            return TailEstimate(val, 0.0, "exact", log_value)
        return self._mix(t)

    def radial_cdf(self, r):
        return special.gammainc(self.dim, np.asarray(r, dtype=float))


class LaplaceDeletedLaw(_Law):
    """Density proportional to ``(1 + s) exp(-s)``, ``s = sqrt(|z|^2 + 2a)``.

    This is ``N / sqrt(T)`` with ``T ~ GIG(-(d+3)/2, 1, 2a)``.
    """

    def __init__(self, dim, a):
        self.dim, self.a = dim, float(a)
        lam = -(dim + 3.0) / 2.0
        self._mix = _ScaleMixtureOrthant(_log_gig_weight(lam, 1.0, 2.0 * self.a), lambda x: 0.5 * x)
        self._table = None

    def orthant(self, t):
        return self._mix(np.asarray(t, dtype=float))

    def radial_cdf(self, r):
        if self._table is None:
            d, a = self.dim, self.a

            def logf(r):
                s = np.sqrt(np.square(r) + 2.0 * a)
                return special.xlogy(d - 1.0, r) + np.log1p(s) - s

            self._table = RadialTable(logf)
        return self._table.cdf(r)


class LogisticJointLaw(_Law):
    def __init__(self, dim):
        self.dim = dim
        self._table = None
        if dim > 1:
            self._base = gen.dirichlet_eta(dim / 2.0 - 1.0)

    def orthant(self, t):
        t = np.asarray(t, dtype=float)
        if self.dim == 1:
            z = float(t[0])
            return TailEstimate(logistic_tail_1d(z), 1e-15, "exact", float(log_logistic_tail(z)))
        e = 1.0 - self.dim / 2.0
        return _gaussian_series_orthant(t, lambda k: e * np.log(k), self._base)

    @property
    def table(self):
        if self._table is None:
            d = self.dim
            fam = gen.LOGISTIC
            self._table = RadialTable(
                lambda r: special.xlogy(d - 1.0, r) + gen._log_unit_generator(fam, d, 0.5 * np.square(r))
            )
        return self._table

    def radial_cdf(self, r):
        return self.table.cdf(r)


class LogisticDeletedLaw(_Law):
    """Density proportional to ``Gbar_n(|z|^2/2 + a)`` for the logistic generator."""

    def __init__(self, dim, a):
        self.dim, self.a = dim, float(a)
        self._base = float(gen._lerch_series(math.exp(-self.a), dim / 2.0))
        self._table = None

    def orthant(self, t):
        a, h = self.a, self.dim / 2.0
        return _gaussian_series_orthant(t, lambda k: -(k - 1.0) * a - h * np.log(k), self._base)

    def radial_cdf(self, r):
        if self._table is None:
            d, a = self.dim, self.a
            fam = gen.LOGISTIC
            self._table = RadialTable(
                lambda r: special.xlogy(d - 1.0, r) + gen._log_unit_cumulative(fam, d + 1, 0.5 * np.square(r) + a)
            )
        return self._table.cdf(r)


# Univariate logistic-elliptical tail --------------------------------------


def log_student_tail(df, z):
    """``log P(T > z)`` for Student-t with ``df`` degrees of freedom."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        direct = np.log(special.stdtr(df, -z))
    # far tail: P(T > z) ~ c_1 df^((df-1)/2) z^-df
    log_c1 = special.gammaln((df + 1.0) / 2.0) - special.gammaln(df / 2.0) - 0.5 * math.log(df * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        asym = log_c1 + (df - 1.0) / 2.0 * math.log(df) - df * np.log(np.abs(z))
    return np.where(np.isfinite(direct), direct, asym)


def log_logistic_tail(z):
    """``log P(Z > z)`` for the univariate logistic-elliptical law."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        near = np.log(np.asarray(logistic_tail(np.minimum(z, 30.0))))
    # beyond z = 30 only the first two Gaussian terms of the series matter
    zz = np.maximum(z, 30.0)
    l1 = special.log_ndtr(-zz)
    l2 = 0.5 * math.log(2.0) + special.log_ndtr(-math.sqrt(2.0) * zz)
    far = math.log(_logistic_c1() * math.sqrt(2.0 * math.pi)) + l1 + np.log1p(-np.exp(l2 - l1))
    return np.where(z < 30.0, near, far)


@lru_cache(maxsize=None)
def _logistic_c1():
    return gen.normalizing_constant(gen.LOGISTIC, 1)


def logistic_tail(z):
    """``P(Z > z)`` for the univariate logistic-elliptical law (vectorised).

    For ``|z| < 2``: ``1/2 - c_1 int_0^|z| g``, by 40-point Gauss-Legendre.
    Beyond: ``c_1 sqrt(2 pi) sum_k (-1)^(k-1) sqrt(k) Phibar(sqrt(k) |z|)``,
    whose terms fall like ``exp(-2k)`` or faster.
    """
    z = np.asarray(z, dtype=float)
    c1 = _logistic_c1()
    az = np.abs(z).reshape(-1)
    out = np.empty_like(az)
    near = az < 2.0
    if np.any(near):
        x, w = gauss_legendre(40)
        half = 0.5 * az[near][:, None]
        nodes = half * (x[None, :] + 1.0)
        e = np.exp(-0.5 * nodes * nodes)
        out[near] = 0.5 - c1 * (half * w[None, :] * e / (1.0 + e) ** 2).sum(axis=1)
    far = ~near
    if np.any(far):
        k = np.arange(1, 31, dtype=float)[None, :]
        logs = 0.5 * np.log(k) + special.log_ndtr(-np.sqrt(k) * az[far][:, None])
        signs = np.where(k % 2 == 1, 1.0, -1.0)
        shift = logs[:, :1]
        with np.errstate(under="ignore"):
            series = (signs * np.exp(logs - shift)).sum(axis=1)
            out[far] = c1 * math.sqrt(2.0 * math.pi) * np.exp(shift[:, 0]) * series
    out = out.reshape(z.shape)
    out = np.where(z < 0, 1.0 - out, out)
    return out if out.ndim else float(out)


def logistic_tail_1d(z: float) -> float:
    return float(logistic_tail(float(z)))


# ---------------------------------------------------------------------------
# Law factories
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def joint_law(family: gen.GeneratorFamily, n: int) -> _Law:
    kind = family.kind
    if kind is Kind.NORMAL:
        return NormalLaw(n)
    if kind is Kind.STUDENT_T:
        return StudentLaw(n, family.m)
    if kind is Kind.LAPLACE:
        return LaplaceJointLaw(n)
    return LogisticJointLaw(n)


@lru_cache(maxsize=1024)
def deleted_law(family: gen.GeneratorFamily, n: int, a: float) -> _Law:
    """Law on R^(n-1) with density proportional to ``Gbar_n(|z|^2/2 + a)``."""
    d = n - 1
    kind = family.kind
    if kind is Kind.NORMAL:
        return NormalLaw(d)
    if kind is Kind.STUDENT_T:
        m = family.m
        return StudentLaw(d, m - 1.0, math.sqrt((m + 2.0 * a) / (m - 1.0)))
    if kind is Kind.LAPLACE:
        return LaplaceDeletedLaw(d, a)
    return LogisticDeletedLaw(d, a)


# ---------------------------------------------------------------------------
# Correlated orthants
# ---------------------------------------------------------------------------


def _canonical_order(corr, t):
    # Orthant probabilities are invariant under a simultaneous permutation of
    # (R, t); evaluating in a canonical order makes permuted inputs give
    # bit-identical answers even for the randomised rules.
    keys = (np.sort(corr, axis=1)[:, ::-1].T.tolist()[::-1]) + [corr.sum(axis=1), t]
    return np.lexsort(keys)


def correlated_orthant(law: _Law, corr, t) -> TailEstimate:
    t = np.asarray(t, dtype=float)
    d = len(t)
    if d != law.dim:
        raise ValueError(f"threshold length {d} does not match law dimension {law.dim}")
    if corr is None:
        corr = np.eye(d)
    corr = np.asarray(corr, dtype=float)
    order = _canonical_order(corr, t)
    t = t[order]
    corr = corr[np.ix_(order, order)]
    if d == 1 or np.all(corr[~np.eye(d, dtype=bool)] == 0.0):
        return law.orthant(t)
    chol = np.linalg.cholesky(corr)
    if d == 2:
        return _angular_orthant(law, chol, t)
    if law.is_normal:
        return _sov_normal_orthant(chol, t)
    return _directional_orthant(law, chol, t)


def _interval_probability(law, dvec, t):
    """``P(r d_i > t_i for all i)`` for each row of ``dvec``, with ``r ~ F_R``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = t[None, :] / dvec
    up = dvec > 0
    down = dvec < 0
    flat_fail = np.any((dvec == 0) & (t[None, :] >= 0), axis=1)
    lo = np.max(np.where(up, ratio, 0.0), axis=1)
    lo = np.maximum(lo, 0.0)
    hi = np.min(np.where(down, ratio, np.inf), axis=1)
    p = np.where(hi > lo, law.radial_cdf(hi) - law.radial_cdf(lo), 0.0)
    return np.where(flat_fail, 0.0, np.clip(p, 0.0, 1.0))


def _angular_orthant(law, chol, t) -> TailEstimate:
    breaks = [0.0, 2.0 * math.pi]
    vectors = [chol[0], chol[1], t[0] * chol[1] - t[1] * chol[0]]
    for v in vectors:
        if np.any(v != 0):
            base = math.atan2(v[1], v[0])
            breaks += [(base + 0.5 * math.pi) % (2 * math.pi), (base - 0.5 * math.pi) % (2 * math.pi)]
    breaks = np.unique(np.array(breaks))
    results = []
    for n in (48, 32):
        total = 0.0
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            if hi - lo < 1e-15:
                continue
            phi, w = _gl_nodes(lo, hi, n)
            u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            total += float((w * _interval_probability(law, u @ chol.T, t)).sum())
        results.append(total / (2.0 * math.pi))
    return TailEstimate(results[0], abs(results[0] - results[1]) + 1e-15, "angular")


@lru_cache(maxsize=16)
def _directions(d):
    rng = np.random.default_rng([_SEED, d])
    u = rng.standard_normal((_DIRECTION_PAIRS, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u.setflags(write=False)
    return u


def _radial_quantile(law, p):
    lo, hi = 0.0, 1.0
    while law.radial_cdf(hi) < p:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if law.radial_cdf(mid) < p else (lo, mid)
    return 0.5 * (lo + hi)


_CONTROL_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _control_scales(law):
    scales = getattr(law, "_control_scales", None)
    if scales is None:
        ref = NormalLaw(law.dim)
        scales = tuple(_radial_quantile(law, p) / _radial_quantile(ref, p) for p in _CONTROL_LEVELS)
        law._control_scales = scales
    return scales


def _directional_orthant(law, chol, t) -> TailEstimate:
    """Radius-conditional Monte Carlo over fixed directions.

    For each direction the admissible radii form an interval, so the
    conditional probability is exact.  Scaled normal laws, whose orthant
    probabilities come from the lattice rule, serve as control variates;
    their scales match the radial quantiles of ``law``.
    """
    d = len(t)
    u = _directions(d)
    dvec = u @ chol.T
    y = 0.5 * (_interval_probability(law, dvec, t) + _interval_probability(law, -dvec, t))
    ref = NormalLaw(d)
    corr = chol @ chol.T
    controls, means = [], []
    for s in _control_scales(law):
        controls.append(
            0.5 * (_interval_probability(ref, dvec * s, t) + _interval_probability(ref, -dvec * s, t))
        )
        means.append(_sov_normal_orthant(np.linalg.cholesky(corr), t / s).value)
    c = np.array(controls).T
    c_centered = c - c.mean(axis=0)
    coef, *_ = np.linalg.lstsq(c_centered, y - y.mean(), rcond=None)
    resid = y - c_centered @ coef
    value = float(y.mean() - (c.mean(axis=0) - np.array(means)) @ coef)
    err = float(resid.std(ddof=c.shape[1] + 1) / math.sqrt(len(y)))
    return TailEstimate(min(max(value, 0.0), 1.0), err, "directional-mc")


def _sov_normal_orthant(chol, t) -> TailEstimate:
    """Genz's separation of variables with a randomly shifted rank-1 lattice.

    ``P(W > t) = P(W < -t)`` by symmetry, which is the lower-orthant form the
    algorithm is usually written in.
    """
    d = len(t)
    b = -t
    gen_vec = np.sqrt(np.array([2, 3, 5, 7, 11, 13, 17, 19][: d - 1], dtype=float))
    rng = np.random.default_rng([_SEED, d, 1])
    shifts = rng.random((_LATTICE_SHIFTS, d - 1))
    j = np.arange(1, _LATTICE_POINTS + 1, dtype=float)[:, None]
    base = (j * gen_vec[None, :]) % 1.0
    means = []
    for s in shifts:
        w = (base + s) % 1.0
        w = np.abs(2.0 * w - 1.0)  # baker's transform
        e = special.ndtr(b[0] / chol[0, 0]) * np.ones(len(w))
        f = e.copy()
        y = np.zeros((len(w), d))
        for i in range(1, d):
            y[:, i - 1] = special.ndtri(np.clip(w[:, i - 1] * e, 1e-300, 1.0 - 1e-16))
            e = special.ndtr((b[i] - y[:, :i] @ chol[i, :i]) / chol[i, i])
            f = f * e
        means.append(f.mean())
    means = np.array(means)
    return TailEstimate(
        float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means))), "sov-lattice"
    )


def check_finite(est: TailEstimate, what: str) -> TailEstimate:
    if not np.isfinite(est.value):
        raise NumericalFailure(f"{what}: non-finite tail probability", estimate=est.value)
    return est
