"""HR location and scatter: the joint spatial-median and sign-scatter fixed point.

``hr_estimate`` is the high-dimensional version: spatial-median and
SGLASSO initialisation, then alternating location and banded scatter
updates with the scatter renormalised to trace ``p``. ``hr_classic`` is the
unbanded iteration, only defined for ``n > p``; it is kept as an oracle for
small problems.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ContractViolation, DegenerateDataError, DimensionError
from .linalg import band, default_eps_pd, psd_project, sym_eigen
from .sglasso import SglassoConfig, lambda_default, sglasso
from .spatial import as_data, row_signs, sign_cov, spatial_median


@dataclass(frozen=True)
class HrConfig:
    bandwidth: int = 3
    tol: float = 1e-4
    max_iter: int = 100
    lam: Optional[float] = None
    lambda_c1: float = 1.0
    lambda_c2: float = 0.5
    eps_pd: Optional[float] = None
    median_tol: float = 1e-6
    median_max_iter: int = 200
    # Only the starting point depends on the SGLASSO fit, so a looser
    # solve is enough here.
    sglasso: SglassoConfig = field(default_factory=lambda: SglassoConfig(tol=1e-4, kkt_tol=1e-3))

    def __post_init__(self):
        if self.bandwidth < 0:
            raise ContractViolation("bandwidth must be non-negative")
        if not self.tol > 0:
            raise ContractViolation("tol must be positive")
        if self.max_iter < 1:
            raise ContractViolation("max_iter must be at least 1")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class HrEstimate:
    mu: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray
    omega_sqrt: np.ndarray
    iterations: int
    converged: bool
    bandwidth: Optional[int]
    lam: Optional[float] = None
    psd_projections: int = 0
    stationarity: list = field(default_factory=list, repr=False)
    omega_init: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def p(self):
        return self.mu.shape[0]


def _finish(mu, sigma, **kw):
    w, v = sym_eigen(sigma)
    if w[-1] <= 0:
        raise DegenerateDataError("final scatter estimate is not positive definite")
    omega = (v / w) @ v.T
    omega_sqrt = (v / np.sqrt(w)) @ v.T
    return HrEstimate(
        mu=mu,
        sigma=sigma,
        omega=0.5 * (omega + omega.T),
        omega_sqrt=0.5 * (omega_sqrt + omega_sqrt.T),
        **kw,
    )


def _roots(sigma):
    w, v = sym_eigen(sigma)
    if w[-1] <= 0:
        raise DegenerateDataError("scatter iterate lost positive definiteness")
    r = np.sqrt(w)
    half = (v * r) @ v.T
    ihalf = (v / r) @ v.T
    return 0.5 * (half + half.T), 0.5 * (ihalf + ihalf.T)


def _is_pd(m, eps):
    try:
        np.linalg.cholesky(m - eps * np.eye(m.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def _normalise(sigma, p):
    sigma = 0.5 * (sigma + sigma.T)
    return sigma * (p / np.trace(sigma))


def hr_estimate(X, config=None, omega_start=None):
    """High-dimensional HR estimate of location and scatter.

    Parameters
    ----------
    X : array_like, shape (n, p)
    config : HrConfig, optional
    omega_start : ndarray, optional
        Warm start handed to the SGLASSO solver. The penalised problem is
        strictly convex, so this changes run time, not the solution.

    Returns
    -------
    HrEstimate
        ``sigma`` has trace ``p``; ``omega`` and ``omega_sqrt`` are computed
        once from the final ``sigma``.

    Notes
    -----
    Iteration stops when the sup-norm change of the location (relative to
    its size plus the typical coordinate spread of the whitened residuals),
    the relative Frobenius change of the scatter, and the norm of the mean
    spatial sign all fall below ``config.tol``.
    """
    cfg = config or HrConfig()
    X = as_data(X)
    n, p = X.shape
    if n < 3 or p < 2:
        raise ContractViolation(f"hr_estimate needs n >= 3 and p >= 2, got n={n}, p={p}")

    mu = spatial_median(X, tol=cfg.median_tol, max_iter=cfg.median_max_iter)
    s0 = sign_cov(X, mu)
    lam = cfg.lam if cfg.lam is not None else lambda_default(n, p, cfg.lambda_c1, cfg.lambda_c2)
    omega0 = sglasso(s0, p, lam, cfg.sglasso, start=omega_start).omega
    w, v = sym_eigen(omega0)
    sigma = _normalise((v / w) @ v.T, p)

    n_proj = 0
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        half, ihalf = _roots(sigma)
        U, r, ok = row_signs((X - mu) @ ihalf)
        if not ok.any():
            raise DegenerateDataError("all whitened residuals are zero")
        g = U.sum(axis=0) / n
        grad = float(np.linalg.norm(g))
        history.append(grad)
        step = half @ g / (np.sum(1.0 / r[ok]) / n)
        mu_new = mu + step

        B = band(U.T @ U / n, cfg.bandwidth)
        B = 0.5 * (B + B.T)
        eps = cfg.eps_pd if cfg.eps_pd is not None else default_eps_pd(B)
        if not _is_pd(B, eps):
            B = psd_project(B, eps)
            n_proj += 1
        sigma_new = _normalise(p * half @ B @ half, p)
        # Near-singular bands can compound across iterations; keep the
        # iterate itself above the floor as well.
        eps_s = cfg.eps_pd if cfg.eps_pd is not None else default_eps_pd(sigma_new)
        if not _is_pd(sigma_new, eps_s):
            sigma_new = _normalise(psd_project(sigma_new, eps_s), p)
            n_proj += 1

        scale = float(np.median(r)) / np.sqrt(p)
        d_mu = np.max(np.abs(step)) / (np.max(np.abs(mu)) + scale)
        d_sigma = np.linalg.norm(sigma_new - sigma) / np.linalg.norm(sigma)
        mu, sigma = mu_new, sigma_new
        if d_mu < cfg.tol and d_sigma < cfg.tol and grad < cfg.tol:
            converged = True
            break

    return _finish(
        mu,
        sigma,
        iterations=it,
        converged=converged,
        bandwidth=cfg.bandwidth,
        lam=float(lam),
        psd_projections=n_proj,
        stationarity=history,
        omega_init=omega0,
    )


def hr_classic(X, tol=1e-6, max_iter=1000):
    """Unbanded HR iteration; requires ``n > p``.

    Stops at the first iterate where ``||n^{-1} sum U_i|| <= tol`` and
    ``||(p/n) sum U_i U_i' - I||_F <= p * tol``, and returns that iterate.
    """
    X = as_data(X)
    n, p = X.shape
    if n <= p:
        raise DimensionError(
            f"hr_classic needs n > p (got n={n}, p={p}); use hr_estimate for high dimensions"
        )
    if n < 3:
        raise ContractViolation("hr_classic needs at least three rows")

    mu = spatial_median(X, tol=min(tol, 1e-8), max_iter=2000)
    sigma = _normalise(p * sign_cov(X, mu), p)
    eye = np.eye(p)
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        half, ihalf = _roots(sigma)
        U, r, ok = row_signs((X - mu) @ ihalf)
        g = U.sum(axis=0) / n
        S = U.T @ U / n
        grad = float(np.linalg.norm(g))
        history.append(grad)
        if grad <= tol and np.linalg.norm(p * S - eye) <= p * tol:
            converged = True
            break
        mu = mu + half @ g / (np.sum(1.0 / r[ok]) / n)
        sigma = _normalise(p * half @ S @ half, p)

    return _finish(
        mu,
        sigma,
        iterations=it,
        converged=converged,
        bandwidth=None,
        stationarity=history,
    )


def whitened_radii(X, est):
    """``||omega_sqrt (X_i - mu)||`` for every row."""
    X = as_data(X)
    E = (X - est.mu) @ est.omega_sqrt
    r = np.sqrt(np.einsum("ij,ij->i", E, E))
    if np.any(r <= 1e-12 * max(float(np.median(r)), 1e-300)):
        raise DegenerateDataError("a whitened radius is zero")
    return r
