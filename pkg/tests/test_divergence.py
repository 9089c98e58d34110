import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gamma

from latinfo.divergence import (
    EstimatorConfig,
    EstimatorError,
    GaussianSpec,
    bias_constant,
    estimate_tsallis_knn,
    kl_gaussian,
    knn_distances,
    tsallis_gaussian,
)

import oracles


def quad_tsallis_1d(s1, s2, alpha):
    f = stats.norm(scale=math.sqrt(s1)).pdf
    g = stats.norm(scale=math.sqrt(s2)).pdf
    val, _ = integrate.quad(lambda x: f(x) ** alpha * g(x) ** (1 - alpha), -np.inf, np.inf)
    return (val - 1) / (alpha - 1)


@pytest.mark.parametrize("s1,s2", [(1.0, 2.0), (0.3, 1.0), (4.0, 0.5)])
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_tsallis_1d_against_quadrature(s1, s2, alpha):
    got = tsallis_gaussian(GaussianSpec([[s1]]), GaussianSpec([[s2]]), alpha)
    assert got == pytest.approx(quad_tsallis_1d(s1, s2, alpha), rel=1e-8, abs=1e-12)


def test_tsallis_2d_against_quadrature():
    cf = np.array([[1.0, 0.6], [0.6, 1.0]])
    f = stats.multivariate_normal(cov=cf).pdf
    g = stats.multivariate_normal(cov=np.eye(2)).pdf
    alpha = 0.5
    val, _ = integrate.dblquad(lambda y, x: f([x, y]) ** alpha * g([x, y]) ** (1 - alpha), -9, 9, -9, 9,
                               epsabs=1e-11)
    want = (val - 1) / (alpha - 1)
    assert tsallis_gaussian(GaussianSpec(cf), GaussianSpec(np.eye(2)), alpha) == pytest.approx(want, rel=1e-7)


def test_tsallis_matches_precision_form():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = rng.standard_normal((2, 4, 6))
        cf, cg = a @ a.T / 6 + 0.2 * np.eye(4), b @ b.T / 6 + 0.2 * np.eye(4)
        for alpha in (0.1, 0.5, 0.95):
            assert tsallis_gaussian(GaussianSpec(cf), GaussianSpec(cg), alpha) == pytest.approx(
                oracles.tsallis_precision(cf, cg, alpha), rel=1e-9)


def test_kl_against_quadrature_and_limit():
    s1, s2 = 0.7, 1.8
    f, g = stats.norm(scale=math.sqrt(s1)), stats.norm(scale=math.sqrt(s2))
    want, _ = integrate.quad(lambda x: f.pdf(x) * (f.logpdf(x) - g.logpdf(x)), -np.inf, np.inf)
    assert kl_gaussian(GaussianSpec([[s1]]), GaussianSpec([[s2]])) == pytest.approx(want, rel=1e-9)
    # Tsallis tends to KL as alpha -> 1
    near = tsallis_gaussian(GaussianSpec([[s1]]), GaussianSpec([[s2]]), 1 - 1e-6)
    assert near == pytest.approx(want, rel=1e-5)
    assert tsallis_gaussian(GaussianSpec([[s1]]), GaussianSpec([[s2]]), 1.0) == kl_gaussian(
        GaussianSpec([[s1]]), GaussianSpec([[s2]]))


def test_identical_arguments_give_exact_zero():
    spec = GaussianSpec([[1.0, 0.3], [0.3, 1.0]])
    assert tsallis_gaussian(spec, spec, 0.5) == 0.0
    assert kl_gaussian(spec, spec) == 0.0


def test_gaussian_spec_validation():
    with pytest.raises(ValueError, match="positive definite"):
        GaussianSpec([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        GaussianSpec([[1.0, 0.2], [0.1, 1.0]])
    with pytest.raises(ValueError):
        tsallis_gaussian(GaussianSpec([[1.0]]), GaussianSpec(np.eye(2)), 0.5)
    with pytest.raises(ValueError):
        tsallis_gaussian(GaussianSpec([[1.0]]), GaussianSpec([[2.0]]), 1.5)


def test_bias_constant():
    k, a = 5, 0.5
    assert bias_constant(k, a) == pytest.approx(gamma(k) ** 2 / (gamma(k - a + 1) * gamma(k + a - 1)))
    assert bias_constant(30, 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("k", [1, 3, 10])
def test_knn_distances_bruteforce(k):
    rng = np.random.default_rng(k)
    pts, qs = rng.standard_normal((200, 3)), rng.standard_normal((50, 3))
    np.testing.assert_allclose(knn_distances(pts, qs, k), oracles.brute_kth_distance(pts, qs, k, False))
    np.testing.assert_allclose(knn_distances(pts, pts, k, exclude_self=True),
                               oracles.brute_kth_distance(pts, pts, k, True))


def test_estimator_matches_direct_formula():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((300, 2)) @ np.array([[1.0, 0.5], [0.0, 0.8]])
    y = rng.standard_normal((250, 2))
    cfg = EstimatorConfig(alpha=0.4, k=7)
    rho = oracles.brute_kth_distance(x, x, 7, True)
    nu = oracles.brute_kth_distance(y, x, 7, False)
    ratio = (299 * rho**2) / (250 * nu**2)
    want = (np.mean(ratio ** 0.6) * bias_constant(7, 0.4) - 1) / (0.4 - 1)
    est = estimate_tsallis_knn(x, y, cfg)
    assert est.value == pytest.approx(want, rel=1e-12)
    assert (est.n_p, est.n_q, est.dim, est.k) == (300, 250, 2, 7)


def test_estimator_frozen_value():
    # frozen from the direct-formula oracle above on this fixed draw
    rng = np.random.default_rng(2024)
    x = rng.standard_normal((500, 2)) @ np.linalg.cholesky([[1.0, 0.7], [0.7, 1.0]]).T
    y = rng.standard_normal((500, 2))
    value = estimate_tsallis_knn(x, y, EstimatorConfig(alpha=0.5, k=10)).value
    rho = oracles.brute_kth_distance(x, x, 10, True)
    nu = oracles.brute_kth_distance(y, x, 10, False)
    direct = (np.mean((499 * rho**2 / (500 * nu**2)) ** 0.5) * bias_constant(10, 0.5) - 1) / -0.5
    assert value == pytest.approx(direct, rel=1e-12)
    assert value == pytest.approx(0.2382336019176281, rel=1e-12)


def test_estimator_consistency_trend():
    cov = np.array([[1.0, 0.6], [0.6, 1.0]])
    truth = tsallis_gaussian(GaussianSpec(cov), GaussianSpec(np.eye(2)), 0.5)
    errors = []
    for n in (200, 3200):
        est = []
        for s in range(8):
            rng = np.random.default_rng(s)
            x = rng.multivariate_normal(np.zeros(2), cov, n)
            y = rng.standard_normal((n, 2))
            est.append(estimate_tsallis_knn(x, y, EstimatorConfig(k=10)).value)
        errors.append(abs(np.mean(est) - truth))
    assert errors[1] < errors[0]
    assert errors[1] < 0.02


def test_same_distribution_near_zero():
    rng = np.random.default_rng(9)
    x, y = rng.standard_normal((2, 2000, 3))
    assert abs(estimate_tsallis_knn(x, y, EstimatorConfig()).value) < 0.05


def test_duplicates_raise_unless_jittered():
    rng = np.random.default_rng(0)
    x = np.repeat(rng.standard_normal((100, 2)), 2, axis=0)
    y = rng.standard_normal((200, 2))
    with pytest.raises(EstimatorError, match="duplicate"):
        estimate_tsallis_knn(x, y, EstimatorConfig(k=1))
    cfg = EstimatorConfig(k=1, tie_policy="jitter", seed=5)
    first = estimate_tsallis_knn(x, y, cfg).value
    assert math.isfinite(first)
    assert estimate_tsallis_knn(x, y, cfg).value == first


@pytest.mark.parametrize("kwargs", [
    {"alpha": 1.0}, {"alpha": 0.0}, {"k": 0}, {"k": 2.5}, {"tie_policy": "drop"},
    {"permutations": -1}, {"seed": -1}, {"tie_policy": "jitter", "jitter_scale": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EstimatorConfig(**kwargs)


def test_estimator_preconditions():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((2, 30, 2))
    with pytest.raises(EstimatorError, match="too large"):
        estimate_tsallis_knn(x, y, EstimatorConfig(k=30))
    with pytest.raises(EstimatorError, match="dimension"):
        estimate_tsallis_knn(x, y[:, :1], EstimatorConfig(k=3))
    bad = x.copy()
    bad[0, 0] = np.nan
    with pytest.raises(EstimatorError, match="non-finite"):
        estimate_tsallis_knn(bad, y, EstimatorConfig(k=3))
    err = EstimatorError("boom", term="12|34")
    assert "12|34" in str(err)
