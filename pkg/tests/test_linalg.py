import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hrstat.errors import ContractViolation, SingularMatrixError
from hrstat.linalg import band, default_eps_pd, log_det, psd_project, sym_eigen, sym_inv, sym_sqrt, sym_sqrt_pair

from conftest import random_spd


def sym_matrices(max_p=8):
    return st.integers(1, max_p).flatmap(
        lambda p: arrays(np.float64, (p, p), elements=st.floats(-10, 10, allow_nan=False, width=64))
    ).map(lambda a: 0.5 * (a + a.T))


def test_sym_eigen_identity_and_diagonal():
    w, v = sym_eigen(np.eye(3))
    np.testing.assert_allclose(w, 1.0)
    np.testing.assert_allclose(v @ v.T, np.eye(3), atol=1e-14)
    w, v = sym_eigen(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(w, [4.0, 1.0])
    np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]], atol=1e-14)


def test_sym_eigen_rejects_asymmetric():
    with pytest.raises(ContractViolation):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(sym_matrices())
def test_sym_eigen_reconstruction(m):
    w, v = sym_eigen(m)
    assert np.all(np.diff(w) <= 0)
    rec = (v * w) @ v.T
    scale = max(np.linalg.norm(m), 1e-300)
    assert np.linalg.norm(rec - m) <= 1e-10 * scale + 1e-300


def test_sym_sqrt_examples(rng):
    np.testing.assert_allclose(sym_sqrt(np.eye(4)), np.eye(4), atol=1e-15)
    np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    m = random_spd(rng, 10)
    r = sym_sqrt(m)
    assert np.linalg.norm(r @ r - m) <= 1e-8 * np.linalg.norm(m)
    assert np.linalg.eigvalsh(r)[0] > 0
    np.testing.assert_allclose(r @ m, m @ r, atol=1e-8 * np.linalg.norm(m))


def test_sym_sqrt_pair_and_inverse(rng):
    m = random_spd(rng, 7, cond=100)
    half, ihalf = sym_sqrt_pair(m)
    np.testing.assert_allclose(half @ ihalf, np.eye(7), atol=1e-10)
    np.testing.assert_allclose(sym_inv(m) @ m, np.eye(7), atol=1e-10)


def test_sym_sqrt_singular():
    with pytest.raises(SingularMatrixError):
        sym_sqrt(np.diag([1.0, 0.0]))
    with pytest.raises(SingularMatrixError):
        sym_inv(np.diag([1.0, -1.0]))


def test_band_examples():
    m = np.array([[1.0, 2, 3], [2, 4, 5], [3, 5, 6]])
    np.testing.assert_array_equal(band(m, 1), [[1, 2, 0], [2, 4, 5], [0, 5, 6]])
    np.testing.assert_array_equal(band(m, 0), np.diag(np.diag(m)))
    np.testing.assert_array_equal(band(m, 2), m)
    with pytest.raises(ContractViolation):
        band(m, -1)


@given(sym_matrices(), st.integers(0, 8), st.integers(0, 8))
def test_band_idempotent_and_composes(m, h1, h2):
    b = band(m, h1)
    np.testing.assert_array_equal(band(b, h1), b)
    np.testing.assert_array_equal(band(b, h2), band(m, min(h1, h2)))
    np.testing.assert_array_equal(b, b.T)


def test_psd_project_examples(rng):
    out = psd_project(np.diag([1.0, -0.5]), 1e-8)
    np.testing.assert_allclose(out, np.diag([1.0, 1e-8]), atol=1e-15)
    m = random_spd(rng, 5)
    np.testing.assert_array_equal(psd_project(m, 1e-8), m)


def test_psd_project_matches_eigen_oracle(rng):
    a = rng.standard_normal((6, 6))
    m = 0.5 * (a + a.T)
    out = psd_project(m, 1e-8)
    w, v = np.linalg.eigh(m)
    oracle = (v * np.maximum(w, 1e-8)) @ v.T
    np.testing.assert_allclose(out, oracle, atol=1e-12)
    assert np.linalg.eigvalsh(out)[0] >= 1e-8 * (1 - 1e-6)
    # Frobenius distance equals the size of the eigenvalue correction.
    corr = np.sqrt(np.sum((np.maximum(w, 1e-8) - w) ** 2))
    assert abs(np.linalg.norm(out - m) - corr) < 1e-10


@given(sym_matrices())
def test_psd_project_is_projection(m):
    eps = 1e-6
    once = psd_project(m, eps)
    twice = psd_project(once, eps)
    np.testing.assert_allclose(twice, once, atol=1e-9 * max(1.0, np.abs(m).max()))


def test_log_det_examples(rng):
    assert log_det(np.eye(5)) == 0.0
    assert abs(log_det(np.diag([2.0, 3.0])) - np.log(6.0)) < 1e-14
    m = random_spd(rng, 10)
    w, _ = sym_eigen(m)
    assert abs(log_det(m) - np.sum(np.log(w))) < 1e-9
    with pytest.raises(SingularMatrixError):
        log_det(np.diag([1.0, -2.0]))


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_log_det_of_square(p, seed):
    a = random_spd(np.random.default_rng(seed), p, cond=50)
    ld = log_det(a)
    assert abs(log_det(a @ a) - 2 * ld) <= 1e-8 * max(1.0, abs(ld))


def test_default_eps_pd_scale():
    assert default_eps_pd(np.eye(4) * 3) == pytest.approx(3e-8)
