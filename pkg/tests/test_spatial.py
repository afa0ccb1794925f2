import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from hrstat.errors import DegenerateDataError
from hrstat.spatial import diagonal_hr, sign_cov, spatial_median, spatial_sign, zeta1_hat

from oracles import median_nelder_mead


def test_spatial_sign_examples():
    np.testing.assert_array_equal(spatial_sign([0.0, 0.0, 0.0]), [0, 0, 0])
    np.testing.assert_allclose(spatial_sign([3.0, 4.0]), [0.6, 0.8])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_spatial_sign_unit_and_homogeneous(x, c):
    x = np.array(x)
    if np.linalg.norm(x) < 1e-6:
        return
    u = spatial_sign(x)
    assert abs(np.linalg.norm(u) - 1) < 1e-12
    np.testing.assert_allclose(spatial_sign(c * x), u, atol=1e-12)


def test_spatial_median_trivial_cases():
    np.testing.assert_array_equal(spatial_median([[1.0, 2.0, 3.0]]), [1, 2, 3])
    X = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
    np.testing.assert_allclose(spatial_median(X), [0, 0], atol=1e-12)


def test_spatial_median_matches_derivative_free_oracle(rng):
    X = rng.standard_normal((20, 5))
    mu, info = spatial_median(X, tol=1e-10, max_iter=10_000, return_info=True)
    assert info.converged
    np.testing.assert_allclose(mu, median_nelder_mead(X), atol=1e-5)


def test_spatial_median_at_data_point():
    # The middle point has zero pull from the other two: it is the median.
    X = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    mu, info = spatial_median(X, return_info=True)
    assert info.converged
    np.testing.assert_allclose(mu, [0, 0], atol=1e-12)


def test_spatial_median_reports_nonconvergence(rng):
    X = rng.standard_normal((30, 3))
    mu, info = spatial_median(X, tol=1e-15, max_iter=2, return_info=True)
    assert not info.converged and info.iterations == 2


def test_spatial_median_equivariance(rng):
    X = rng.standard_normal((40, 4))
    b = rng.standard_normal(4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    m = spatial_median(X, tol=1e-12, max_iter=5000)
    np.testing.assert_allclose(spatial_median(X + b, tol=1e-12, max_iter=5000), m + b, atol=1e-8)
    np.testing.assert_allclose(spatial_median(X @ q.T, tol=1e-12, max_iter=5000), q @ m, atol=1e-8)


def test_sign_cov_examples(rng):
    u = np.array([[3.0, 4.0]])
    S = sign_cov(u, np.zeros(2))
    np.testing.assert_allclose(S, np.outer([0.6, 0.8], [0.6, 0.8]))
    np.testing.assert_allclose(sign_cov(np.eye(2), np.zeros(2)), 0.5 * np.eye(2))
    with pytest.raises(DegenerateDataError):
        sign_cov(np.ones((3, 2)), np.ones(2))


@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 10_000))
def test_sign_cov_trace_one_and_psd(n, p, seed):
    X = np.random.default_rng(seed).standard_normal((n, p))
    S = sign_cov(X, np.zeros(p))
    assert abs(np.trace(S) - 1) < 1e-12
    assert np.linalg.eigvalsh(S)[0] > -1e-12


def test_sign_cov_uniform_sphere(rng):
    Z = rng.standard_normal((100_000, 10))
    S = sign_cov(Z, np.zeros(10))
    assert np.max(np.abs(S - np.eye(10) / 10)) < 3e-3


def test_zeta1_examples(rng):
    X = 2.0 * np.eye(3)
    assert zeta1_hat(X, np.zeros(3), np.eye(3)).zeta1_hat == pytest.approx(0.5)
    Z = rng.standard_normal((50, 4))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    assert zeta1_hat(Z, np.zeros(4), np.eye(4)).zeta1_hat == pytest.approx(1.0)
    # Scaling the whitening matrix by c scales the radii by c.
    z = zeta1_hat(Z, np.zeros(4), 3.0 * np.eye(4)).zeta1_hat
    assert z == pytest.approx(1.0 / 3.0, rel=1e-14)
    with pytest.raises(DegenerateDataError):
        zeta1_hat(np.zeros((2, 3)), np.zeros(3), np.eye(3))


def test_zeta1_gaussian_chi_moment(rng):
    # E 1/chi_100 from the gamma-function formula: 0.1007579 (frozen).
    oracle = np.exp(special.gammaln(49.5) - special.gammaln(50.0)) / np.sqrt(2.0)
    assert oracle == pytest.approx(0.1007579, abs=1e-7)
    X = rng.standard_normal((100_000, 100))
    assert abs(zeta1_hat(X, np.zeros(100), np.eye(100)).zeta1_hat - oracle) < 1e-3


def test_diagonal_hr_p1_is_sample_median(rng):
    x = rng.standard_normal(101)
    ls = diagonal_hr(x[:, None])
    assert ls.converged
    assert abs(ls.mu[0] - np.median(x)) < 1e-6


def test_diagonal_hr_symmetric_data():
    X = np.vstack([np.eye(3), -np.eye(3)])
    ls = diagonal_hr(X)
    np.testing.assert_allclose(ls.mu, 0.0, atol=1e-12)


def test_diagonal_hr_scales(rng):
    X = rng.standard_normal((2000, 3)) * np.array([1.0, 2.0, 3.0])
    ls = diagonal_hr(X)
    ratio = ls.d_diag / ls.d_diag[0]
    np.testing.assert_allclose(ratio, [1, 4, 9], rtol=0.15)
    assert abs(ls.d_diag.sum() - 3) < 1e-10


def test_diagonal_hr_scalar_invariance(rng):
    X = stats.t(3).rvs((80, 6), random_state=rng) + 0.3
    D = np.array([0.1, 1.0, 5.0, 2.0, 0.5, 30.0])
    a = diagonal_hr(X, tol=1e-10, max_iter=2000)
    b = diagonal_hr(X * D, tol=1e-10, max_iter=2000)
    np.testing.assert_allclose(b.mu, D * a.mu, atol=1e-6 * np.max(np.abs(D * a.mu)))


def test_diagonal_hr_constant_column(rng):
    X = rng.standard_normal((10, 3))
    X[:, 1] = 4.0
    with pytest.raises(DegenerateDataError):
        diagonal_hr(X)
