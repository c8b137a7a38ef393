import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from conftest import FAMILIES, FAMILY_IDS, random_spd
from lsme.errors import DegeneratePairError, ValidationError
from lsme.generators import LAPLACE, LOGISTIC, NORMAL, student_t
from lsme.mixing import Discrete, Gamma, InverseGamma, PointMass
from lsme.model import LSMEModel, marginal
from lsme.multivariate import allocate, conditional_tce, conditional_tce_pair, mtce, pair_model
from lsme.oracle import mc_allocation, mc_mtce
from lsme.univariate import tce_1d, tce_sum

N2 = 2.0627128075074284  # standard normal TCE at 0.95


def model(fam, sigma, mu=None, beta=None, mix=PointMass(1.0)):
    n = len(sigma)
    mu = np.zeros(n) if mu is None else mu
    beta = np.zeros(n) if beta is None else beta
    return LSMEModel(fam, mu, np.asarray(sigma, dtype=float), beta, mix)


def bivariate_normal_mtce(rho, q1, q2):
    """E[X | X_1 > a, X_2 > b] for a standard bivariate normal, by one-dimensional quadrature."""
    a, b = special.ndtri(q1), special.ndtri(q2)
    s = math.sqrt(1 - rho * rho)

    def mass(x):
        return stats.norm.pdf(x) * special.ndtr(-(b - rho * x) / s)

    p, _ = integrate.quad(mass, a, np.inf, epsabs=0, epsrel=1e-13)
    m1, _ = integrate.quad(lambda x: x * mass(x), a, np.inf, epsabs=0, epsrel=1e-13)
    # by symmetry of roles
    p2 = lambda y: stats.norm.pdf(y) * special.ndtr(-(a - rho * y) / s)
    m2, _ = integrate.quad(lambda y: y * p2(y), b, np.inf, epsabs=0, epsrel=1e-13)
    return np.array([m1 / p, m2 / p])


# ---------------------------------------------------------------------------
# MTCE
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
@pytest.mark.parametrize("mode", ["weighted", "literal"])
def test_mtce_reduces_to_tce(fam, mode):
    m = LSMEModel.univariate(fam, Gamma(2.0), 0.2, 1.4, 0.3)
    assert abs(mtce(m, 0.95, mode).value[0] - tce_1d(m, 0.95, mode).value) <= 1e-8


def test_mtce_normal_identity():
    out = mtce(model(NORMAL, np.eye(2)), (0.95, 0.95))
    np.testing.assert_allclose(out.value, [N2, N2], atol=1e-7)
    assert out.joint_tail == pytest.approx(0.05**2, rel=1e-10)


@pytest.mark.parametrize("rho,q", [(0.5, (0.9, 0.9)), (-0.3, (0.8, 0.95)), (0.9, (0.95, 0.7))])
def test_mtce_correlated_normal_against_quadrature(rho, q):
    out = mtce(model(NORMAL, [[1, rho], [rho, 1]]), q)
    np.testing.assert_allclose(out.value, bivariate_normal_mtce(rho, *q), rtol=1e-7)


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
def test_modes_coincide_for_diagonal_sigma_at_point_mass(fam):
    m = model(fam, np.diag([1.0, 2.5, 0.7]), [0.1, -0.2, 0.3], [0.4, 0.0, -0.2], PointMass(1.5))
    w, l = mtce(m, 0.9, "weighted").value, mtce(m, 0.9, "literal").value
    np.testing.assert_allclose(w, l, atol=1e-8)


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
def test_mtce_exceeds_var(fam):
    m = model(fam, [[1, 0.3], [0.3, 2]], [0.5, -1], [0.2, 0.1], Gamma(2.0))
    out = mtce(m, (0.9, 0.8))
    assert np.all(out.value > out.var_vector)


@pytest.mark.parametrize(
    "fam,mix", [(NORMAL, Gamma(3.0, 2.0)), (LAPLACE, Discrete((0.5, 2.0), (0.6, 0.4)))], ids=["normal", "laplace"]
)
def test_mtce_permutation(fam, mix):
    rng = np.random.default_rng(3)
    m = model(fam, random_spd(rng, 3), rng.normal(size=3), rng.normal(size=3) * 0.3, mix)
    order = [2, 0, 1]
    base = mtce(m, (0.8, 0.85, 0.9)).value
    perm = mtce(m.permuted(order), np.array([0.8, 0.85, 0.9])[order]).value
    np.testing.assert_allclose(perm, base[order], atol=1e-9)


def test_mtce_bad_q_vector():
    with pytest.raises(ValidationError):
        mtce(model(NORMAL, np.eye(3)), (0.9, 0.9))


@pytest.mark.parametrize("fam", [NORMAL, student_t(5), LOGISTIC], ids=["normal", "t5", "logistic"])
def test_mtce_monte_carlo(fam):
    m = model(fam, [[1.0, 0.4], [0.4, 1.5]], [0.2, -0.1], [0.3, -0.2], Gamma(2.0, 1.0))
    est = mc_mtce(m, 0.8, 400_000, seed=11)
    assert np.all(np.abs(est.z_score(mtce(m, 0.8).value)) < 4)


# ---------------------------------------------------------------------------
# Pairs and allocation
# ---------------------------------------------------------------------------


def test_pair_model_entries():
    m = model(NORMAL, [[4, 1], [1, 9]], [1, 2], [0.5, -0.1])
    p = pair_model(m, 0)
    np.testing.assert_allclose(p.sigma, [[4, 5], [5, 15]])
    np.testing.assert_allclose(p.mu, [1, 3])
    np.testing.assert_allclose(p.beta, [0.5, 0.4])


def test_pair_model_degenerate():
    with pytest.raises(DegeneratePairError):
        pair_model(LSMEModel.univariate(NORMAL, PointMass()), 0)
    with pytest.raises(ValidationError):
        pair_model(model(NORMAL, np.eye(2)), 2)


def test_conditional_tce_pair_values():
    rho = 0.5
    m = model(NORMAL, [[1, rho], [rho, 1]])
    assert conditional_tce_pair(m, 0.95) == pytest.approx(rho * N2, abs=1e-9)
    indep = model(student_t(5), np.eye(2), [0.7, 0.0], [0.0, 0.4], Gamma(2.0))
    assert conditional_tce_pair(indep, 0.95) == pytest.approx(0.7, abs=1e-12)


@pytest.mark.parametrize("mode", ["weighted", "literal"])
def test_self_conditioning_is_tce(mode):
    y = LSMEModel.univariate(LAPLACE, Gamma(2.0), 0.3, 1.2, 0.4)
    got = conditional_tce(0.3, 0.4, 1.44, y, 0.9, mode)
    assert got == pytest.approx(tce_1d(y, 0.9, mode).value, abs=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
@pytest.mark.parametrize("mode", ["weighted", "literal"])
def test_allocation_additive(fam, mode):
    rng = np.random.default_rng(17)
    m = model(fam, random_spd(rng, 4), rng.normal(size=4), rng.normal(size=4) * 0.3, InverseGamma(3.0, 2.0))
    out = allocate(m, 0.95, mode)
    assert out.additivity_gap <= 1e-10
    assert abs(out.total - tce_sum(m, 0.95, mode).value) <= 1e-8


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
def test_allocation_matches_pairs(fam):
    rng = np.random.default_rng(5)
    m = model(fam, random_spd(rng, 3), rng.normal(size=3), rng.normal(size=3) * 0.3, Gamma(2.0))
    out = allocate(m, 0.9)
    pairs = [conditional_tce_pair(pair_model(m, k), 0.9) for k in range(3)]
    np.testing.assert_allclose(out.contributions, pairs, atol=1e-10)


def test_allocation_exchangeable():
    r = 0.3
    sigma = (1 - r) * np.eye(4) + r
    m = model(LOGISTIC, sigma, np.full(4, 0.2), np.full(4, 0.1), Gamma(2.0))
    c = allocate(m, 0.95).contributions
    assert np.ptp(c) <= 1e-10
    v = mtce(model(LOGISTIC, sigma[:2, :2], [0.2, 0.2], [0.1, 0.1], Gamma(2.0)), 0.9).value
    assert abs(v[0] - v[1]) <= 1e-10


def test_allocation_monte_carlo():
    rng = np.random.default_rng(2)
    m = model(NORMAL, random_spd(rng, 3), rng.normal(size=3), rng.normal(size=3) * 0.3, Gamma(2.0))
    est = mc_allocation(m, 0.9, 300_000, seed=4)
    assert np.all(np.abs(est.z_score(allocate(m, 0.9).contributions)) < 4)


def test_allocation_single_component_is_tce():
    m = LSMEModel.univariate(NORMAL, Gamma(2.0), 0.0, 1.0, 0.5)
    out = allocate(m, 0.95)
    assert out.contributions[0] == pytest.approx(tce_1d(m, 0.95).value, abs=1e-12)
    assert marginal(model(NORMAL, np.eye(2)), 1).n == 1


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
def test_pair_and_allocation_modes_coincide_at_point_mass(fam):
    rng = np.random.default_rng(9)
    m = model(fam, random_spd(rng, 3), rng.normal(size=3), 0.3 * rng.normal(size=3), PointMass(0.8))
    w, l = allocate(m, 0.95, "weighted"), allocate(m, 0.95, "literal")
    np.testing.assert_allclose(w.contributions, l.contributions, atol=1e-10)
    p = pair_model(m, 1)
    assert abs(conditional_tce_pair(p, 0.9, "weighted") - conditional_tce_pair(p, 0.9, "literal")) <= 1e-10


def test_literal_mtce_ignores_correlation():
    # the verbatim formula evaluates identity-correlation orthants, so with a
    # correlated scale matrix it misses the exact value even without mixing
    m = model(NORMAL, [[1, 0.5], [0.5, 1]])
    exact = bivariate_normal_mtce(0.5, 0.9, 0.9)
    assert np.max(np.abs(mtce(m, 0.9, "weighted").value - exact)) < 1e-7
    assert np.max(np.abs(mtce(m, 0.9, "literal").value - exact)) > 1e-2


@pytest.mark.parametrize("sigma", [np.eye(2), [[1.0, 0.6], [0.6, 2.0]]], ids=["identity", "correlated"])
def test_heavy_normal_mixture_is_student(sigma):
    # InverseGamma(nu/2, nu/2) mixing of a normal is Student-t with nu dof,
    # here with infinite variance (nu = 1.6)
    mixed = model(NORMAL, sigma, [0.1, -0.2], mix=InverseGamma(0.8, 0.8))
    direct = model(student_t(1.6), sigma, [0.1, -0.2])
    np.testing.assert_allclose(mtce(mixed, (0.95, 0.9)).value, mtce(direct, (0.95, 0.9)).value, rtol=1e-8)


@pytest.mark.parametrize("fam", FAMILIES, ids=FAMILY_IDS)
@pytest.mark.parametrize("mix", [InverseGamma(0.8, 1.0), Gamma(0.5, 1.0)], ids=["heavy", "spiky"])
def test_extreme_mixing_is_finite(fam, mix):
    m = model(fam, np.eye(2), mix=mix)
    for mode in ("weighted", "literal"):
        out = mtce(m, 0.99, mode)
        assert np.all(np.isfinite(out.value)) and out.warnings == ()
        assert abs(out.value[0] - out.value[1]) < 1e-9
