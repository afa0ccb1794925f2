"""Dense symmetric-matrix kernels.

Matrices are plain ``numpy`` arrays of shape ``(p, p)``. Functions never
mutate their inputs.
"""

import numpy as np

from .errors import ContractViolation, SingularMatrixError

SYM_RTOL = 1e-12


def default_eps_pd(m):
    """Scale-relative eigenvalue floor, ``1e-8 * trace(m) / dim``."""
    m = np.asarray(m, dtype=float)
    scale = abs(np.trace(m)) / m.shape[0]
    return 1e-8 * (scale if scale > 0 else 1.0)


def check_symmetric(m, rtol=SYM_RTOL):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ContractViolation(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation("matrix has non-finite entries")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.T)) > rtol * max(scale, 1e-300):
        raise ContractViolation("matrix is not symmetric")
    return m


def symmetrize(m):
    return 0.5 * (m + m.T)


def sym_eigen(m):
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray, shape (p,)
        Sorted in descending order.
    eigenvectors : ndarray, shape (p, p)
        Orthogonal; column ``k`` pairs with ``eigenvalues[k]``.
    """
    m = check_symmetric(m)
    w, v = np.linalg.eigh(symmetrize(m))
    return w[::-1].copy(), v[:, ::-1].copy()


def _from_eigen(w, v):
    return symmetrize((v * w) @ v.T)


def sym_sqrt(m, eps_pd=None):
    """Symmetric positive square root of an SPD matrix."""
    w, v = sym_eigen(m)
    if eps_pd is None:
        eps_pd = default_eps_pd(m)
    if w[-1] < eps_pd:
        raise SingularMatrixError(
            f"smallest eigenvalue {w[-1]:.3e} is below the floor {eps_pd:.3e}"
        )
    return _from_eigen(np.sqrt(w), v)


def sym_sqrt_pair(m, eps_pd=None):
    """Return ``(m^{1/2}, m^{-1/2})`` from one eigendecomposition."""
    w, v = sym_eigen(m)
    if eps_pd is None:
        eps_pd = default_eps_pd(m)
    if w[-1] < eps_pd:
        raise SingularMatrixError(
            f"smallest eigenvalue {w[-1]:.3e} is below the floor {eps_pd:.3e}"
        )
    r = np.sqrt(w)
    return _from_eigen(r, v), _from_eigen(1.0 / r, v)


def sym_inv(m, eps_pd=None):
    """Inverse of an SPD matrix through its eigendecomposition."""
    w, v = sym_eigen(m)
    if eps_pd is None:
        eps_pd = default_eps_pd(m)
    if w[-1] < eps_pd:
        raise SingularMatrixError(
            f"smallest eigenvalue {w[-1]:.3e} is below the floor {eps_pd:.3e}"
        )
    return _from_eigen(1.0 / w, v)


def band(m, h):
    """Zero every entry more than ``h`` places off the diagonal."""
    if h < 0:
        raise ContractViolation("bandwidth must be non-negative")
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    idx = np.arange(p)
    keep = np.abs(idx[:, None] - idx[None, :]) <= h
    return np.where(keep, m, 0.0)


def psd_project(m, eps_pd=None):
    """Clamp eigenvalues from below at ``eps_pd``.

    A matrix that is already SPD with smallest eigenvalue at least
    ``eps_pd`` is returned unchanged (as a copy).
    """
    m = check_symmetric(m)
    if eps_pd is None:
        eps_pd = default_eps_pd(m)
    if eps_pd <= 0:
        raise ContractViolation("eps_pd must be positive")
    w, v = sym_eigen(m)
    if w[-1] >= eps_pd:
        return m.copy()
    return _from_eigen(np.maximum(w, eps_pd), v)


def log_det(m):
    """Log-determinant of an SPD matrix."""
    m = check_symmetric(m)
    try:
        c = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("log_det requires a positive definite matrix") from None
    return 2.0 * float(np.sum(np.log(np.diag(c))))
