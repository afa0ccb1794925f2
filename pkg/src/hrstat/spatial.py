"""Spatial-sign primitives.

Sign map, sign covariance, spatial median, the inverse-radius moment
estimate, and the diagonal (coordinate-scale) location/scale iteration
used by the MAX2/SUM2 statistics.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateDataError


@dataclass(frozen=True)
class LocationScale:
    mu: np.ndarray
    d_diag: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ZetaEstimates:
    zeta1_hat: float
    n_used: int


@dataclass(frozen=True)
class MedianInfo:
    iterations: int
    converged: bool
    stationarity: float


def as_data(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ContractViolation(f"data must be a non-empty n x p matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ContractViolation("data contain NaN or infinite values")
    return X


def _zero_tol(R):
    # R: row norms of centred data
    med = float(np.median(R))
    return 1e-12 * (med if med > 0 else 1.0)


def spatial_sign(x, tol_zero=0.0):
    """``x / ||x||``, or the zero vector when ``||x|| <= tol_zero``."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm <= tol_zero or nrm == 0.0:
        return np.zeros_like(x)
    return x / nrm


def row_signs(E, tol_zero=None):
    """Spatial signs and radii of the rows of ``E``.

    Rows with norm at or below ``tol_zero`` get a zero sign and are flagged
    in the returned mask.
    """
    r = np.sqrt(np.einsum("ij,ij->i", E, E))
    if tol_zero is None:
        tol_zero = _zero_tol(r)
    ok = r > tol_zero
    U = np.zeros_like(E)
    U[ok] = E[ok] / r[ok, None]
    return U, r, ok


def spatial_median(X, tol=1e-6, max_iter=200, return_info=False, start=None):
    """Minimiser of ``sum_i ||X_i - mu||`` by the Weiszfeld fixed point.

    The iteration stops once the mean spatial sign at the current point has
    Euclidean norm at most ``tol``. Reaching ``max_iter`` is not an error:
    the last iterate is returned and ``info.converged`` is False.

    Parameters
    ----------
    X : array_like, shape (n, p)
    tol : float
        Stationarity tolerance on ``||n^{-1} sum U(X_i - mu)||``.
    max_iter : int
    return_info : bool
        Also return a :class:`MedianInfo`.
    start : array_like, optional
        Starting point; the coordinatewise median by default.
    """
    X = as_data(X)
    n, p = X.shape
    mu = np.median(X, axis=0) if start is None else np.array(start, dtype=float)
    R0 = np.linalg.norm(X - mu, axis=1)
    tol_zero = _zero_tol(R0)

    converged = False
    stat = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        U, r, ok = row_signs(X - mu, tol_zero)
        g = U.sum(axis=0)
        stat = np.linalg.norm(g) / n
        at_point = not ok.all()
        if at_point:
            # Sitting on data point(s): optimal iff the pull of the other
            # points does not exceed the multiplicity of this one.
            mult = int((~ok).sum())
            if ok.sum() == 0 or np.linalg.norm(g) <= mult:
                stat = max(np.linalg.norm(g) - mult, 0.0) / n
                converged = True
                break
            mu = mu.copy()
            mu[0] += tol_zero
            continue
        if stat <= tol:
            converged = True
            break
        mu = mu + g / np.sum(1.0 / r)

    if return_info:
        return mu, MedianInfo(iterations=it, converged=converged, stationarity=float(stat))
    return mu


def sign_cov(X, mu):
    """Average outer product of the spatial signs of ``X_i - mu``."""
    X = as_data(X)
    mu = np.asarray(mu, dtype=float)
    U, _, ok = row_signs(X - mu)
    if not ok.any():
        raise DegenerateDataError("every centred row is zero; sign covariance undefined")
    S = U.T @ U / X.shape[0]
    return 0.5 * (S + S.T)


def zeta1_hat(X, mu, omega_sqrt):
    """Mean inverse whitened radius ``n^{-1} sum ||omega_sqrt (X_i - mu)||^{-1}``."""
    X = as_data(X)
    E = (X - np.asarray(mu, dtype=float)) @ np.asarray(omega_sqrt, dtype=float)
    r = np.sqrt(np.einsum("ij,ij->i", E, E))
    if np.any(r <= 0.0) or np.any(r <= 1e-12 * np.median(r)):
        raise DegenerateDataError("a whitened radius is zero")
    return ZetaEstimates(zeta1_hat=float(np.mean(1.0 / r)), n_used=X.shape[0])


def diagonal_hr(X, tol=1e-6, max_iter=200):
    """Joint location and diagonal scatter from the three-step iteration.

    Each sweep standardises the residuals by the current diagonal scale,
    takes a Weiszfeld step for the location, and rescales every coordinate
    so that ``p * mean(U_j^2) -> 1``. The diagonal is renormalised to sum to
    ``p`` after every sweep, which fixes the scale indeterminacy of the
    scatter without affecting the location fixed point.
    """
    X = as_data(X)
    n, p = X.shape
    if n < 2:
        raise ContractViolation("diagonal_hr needs at least two rows")
    spread = np.ptp(X, axis=0)
    if np.any(spread == 0.0):
        bad = np.flatnonzero(spread == 0.0).tolist()
        raise DegenerateDataError(f"constant coordinate(s) {bad[:10]}")

    mu = np.median(X, axis=0)
    d = X.var(axis=0, ddof=1)
    d = d * (p / d.sum())
    R0 = np.linalg.norm((X - mu) / np.sqrt(d), axis=1)
    tol_zero = _zero_tol(R0)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        sd = np.sqrt(d)
        U, r, ok = row_signs((X - mu) / sd, tol_zero)
        if not ok.all():
            mult = int((~ok).sum())
            g = U.sum(axis=0)
            if ok.sum() == 0 or np.linalg.norm(g) <= mult:
                step = np.zeros(p)
            else:
                step = sd * g / np.sum(1.0 / r[ok])
        else:
            step = sd * U.sum(axis=0) / np.sum(1.0 / r)
        mu_new = mu + step
        d_new = p * d * np.mean(U * U, axis=0)
        if np.any(d_new <= 0.0):
            raise DegenerateDataError("a coordinate scale collapsed to zero")
        d_new *= p / d_new.sum()

        scale = np.median(r) / np.sqrt(p)
        dmu = np.max(np.abs(step)) / (np.max(np.abs(mu)) + scale)
        dd = np.max(np.abs(d_new / d - 1.0))
        mu, d = mu_new, d_new
        if dmu < tol and dd < tol:
            converged = True
            break

    return LocationScale(mu=mu, d_diag=d, iterations=it, converged=converged)
