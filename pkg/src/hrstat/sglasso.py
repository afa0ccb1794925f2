"""Graphical lasso on the scaled spatial-sign covariance.

Solves::

    min_{Theta > 0}  tr(p S Theta) - log|Theta| + lam * ||Theta||_1

with ``S`` the spatial-sign covariance (trace one). The penalty covers the
diagonal by default; since ``theta_ii > 0`` that part equals
``lam * tr(Theta)`` and is folded into the linear term.

The solver is primal block coordinate descent over columns: for column
``j`` the off-diagonal block solves a lasso whose quadratic form is
``Theta_11^{-1}`` (read off the maintained inverse ``W`` by a rank-one
downdate) and the diagonal entry is then set in closed form. Every block
step is an exact minimisation, so the objective never increases and
``Theta`` stays positive definite.
"""

from dataclasses import dataclass, field
import math

import numba
import numpy as np

from .errors import ContractViolation, NoConvergenceError
from .linalg import check_symmetric, log_det


@dataclass(frozen=True)
class SglassoConfig:
    penalize_diagonal: bool = True
    tol: float = 1e-6
    kkt_tol: float = 1e-5
    max_sweeps: int = 500
    inner_tol: float = 1e-9
    max_inner: int = 1000


@dataclass(frozen=True)
class PrecisionEstimate:
    omega: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    iterations: int
    objective_trace: list = field(default_factory=list, repr=False)


def lambda_default(n, p, c1=1.0, c2=0.5):
    """``c1 * sqrt(log(p) / n) + c2 / sqrt(p)``."""
    if n < 2 or p < 2:
        raise ContractViolation("lambda_default needs n >= 2 and p >= 2")
    if c1 < 0 or c2 < 0:
        raise ContractViolation("c1 and c2 must be non-negative")
    return c1 * math.sqrt(math.log(p) / n) + c2 / math.sqrt(p)


@numba.njit(cache=True, nogil=True)
def _sweep(A, W, Theta, lam, inner_tol, max_inner):
    p = A.shape[0]
    max_change = 0.0
    theta = np.empty(p)
    grad = np.empty(p)
    v = np.empty(p)
    w12 = np.empty(p)
    for j in range(p):
        a22 = A[j, j]
        w22 = W[j, j]
        for i in range(p):
            w12[i] = W[i, j]
            theta[i] = Theta[i, j]
        w12[j] = 0.0
        theta[j] = 0.0

        # v = Theta_11^{-1} theta with Theta_11^{-1} = W_11 - w12 w12' / w22
        for i in range(p):
            v[i] = 0.0
        wt = 0.0
        for k in range(p):
            if theta[k] != 0.0:
                wt += w12[k] * theta[k]
                for i in range(p):
                    v[i] += W[i, k] * theta[k]
        for i in range(p):
            v[i] -= w12[i] * wt / w22
        v[j] = 0.0
        for i in range(p):
            grad[i] = A[i, j] + a22 * v[i]
        grad[j] = 0.0

        for _ in range(max_inner):
            dmax = 0.0
            for k in range(p):
                if k == j:
                    continue
                qkk = a22 * (W[k, k] - w12[k] * w12[k] / w22)
                old = theta[k]
                z = qkk * old - grad[k]
                if z > lam:
                    new = (z - lam) / qkk
                elif z < -lam:
                    new = (z + lam) / qkk
                else:
                    new = 0.0
                delta = new - old
                if delta != 0.0:
                    theta[k] = new
                    c = a22 * delta
                    f = w12[k] / w22
                    for i in range(p):
                        grad[i] += c * (W[i, k] - w12[i] * f)
                    grad[j] = 0.0
                    ad = abs(delta)
                    if ad > dmax:
                        dmax = ad
            if dmax < inner_tol:
                break

        # fresh v for the new theta
        for i in range(p):
            v[i] = 0.0
        wt = 0.0
        for k in range(p):
            if theta[k] != 0.0:
                wt += w12[k] * theta[k]
                for i in range(p):
                    v[i] += W[i, k] * theta[k]
        for i in range(p):
            v[i] -= w12[i] * wt / w22
        v[j] = 0.0
        quad = 0.0
        for i in range(p):
            quad += theta[i] * v[i]
        t22 = 1.0 / a22 + quad

        # W <- inverse of the updated Theta
        for r in range(p):
            if r == j:
                continue
            for s in range(p):
                if s == j:
                    continue
                W[r, s] += -w12[r] * w12[s] / w22 + a22 * v[r] * v[s]
        for i in range(p):
            if i != j:
                W[i, j] = -a22 * v[i]
                W[j, i] = -a22 * v[i]
        W[j, j] = a22

        for i in range(p):
            if i == j:
                continue
            ch = abs(theta[i] - Theta[i, j])
            if ch > max_change:
                max_change = ch
            Theta[i, j] = theta[i]
            Theta[j, i] = theta[i]
        ch = abs(t22 - Theta[j, j])
        if ch > max_change:
            max_change = ch
        Theta[j, j] = t22
    return max_change


def sglasso_objective(s_scaled, theta, lam):
    """``tr(s_scaled theta) - log|theta| + lam * sum |theta_ij|``."""
    try:
        c = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    return float(np.sum(s_scaled * theta) - logdet + lam * np.abs(theta).sum())


def kkt_residual(s_scaled, theta, lam, penalize_diagonal=True, w=None):
    """Largest violation of the subgradient optimality conditions."""
    if w is None:
        w = np.linalg.inv(theta)
    G = s_scaled - w
    nz = theta != 0.0
    resid = np.where(nz, np.abs(G + lam * np.sign(theta)), np.maximum(np.abs(G) - lam, 0.0))
    if not penalize_diagonal:
        resid[np.diag_indices_from(resid)] = np.abs(np.diag(G))
    return float(resid.max())


def sglasso(s_hat, p, lam, config=None, start=None):
    """Sparse precision estimate from a spatial-sign covariance.

    Parameters
    ----------
    s_hat : ndarray, shape (p, p)
        Spatial-sign covariance; positive semidefinite with trace close to 1.
    p : int
        Dimension; the fitted matrix is ``p * s_hat``.
    lam : float
        Penalty level, strictly positive.
    config : SglassoConfig, optional
    start : ndarray, optional
        Warm-start precision matrix (must be SPD).

    Returns
    -------
    PrecisionEstimate

    Raises
    ------
    NoConvergenceError
        When ``config.max_sweeps`` is exhausted; ``err.best`` holds the last
        iterate as a :class:`PrecisionEstimate`.
    """
    cfg = config or SglassoConfig()
    s_hat = check_symmetric(s_hat, rtol=1e-10)
    if s_hat.shape[0] != p:
        raise ContractViolation(f"s_hat is {s_hat.shape[0]}x{s_hat.shape[0]} but p={p}")
    if not lam > 0:
        raise ContractViolation("lam must be positive")
    if np.linalg.eigvalsh(s_hat)[0] < -1e-10 * max(np.trace(s_hat), 1.0):
        raise ContractViolation("s_hat is not positive semidefinite")

    S = p * 0.5 * (s_hat + s_hat.T)
    A = S + lam * np.eye(p) if cfg.penalize_diagonal else S.copy()
    if np.any(np.diag(A) <= 0):
        raise ContractViolation("zero diagonal entry in the scaled sign covariance")
    A = np.ascontiguousarray(A)

    if start is None:
        Theta = np.diag(1.0 / np.diag(A))
        W = np.diag(np.diag(A)).astype(float)
    else:
        Theta = np.array(start, dtype=float)
        W = np.linalg.inv(Theta)
        W = 0.5 * (W + W.T)

    obj = sglasso_objective(S, Theta, lam)
    trace = [obj]
    kkt = np.inf
    for sweep in range(1, cfg.max_sweeps + 1):
        change = _sweep(A, W, Theta, lam, cfg.inner_tol, cfg.max_inner)
        obj = sglasso_objective(S, Theta, lam)
        trace.append(obj)
        if change < cfg.tol:
            W = np.linalg.inv(Theta)
            W = 0.5 * (W + W.T)
            kkt = kkt_residual(S, Theta, lam, cfg.penalize_diagonal, w=W)
            if kkt < cfg.kkt_tol:
                return PrecisionEstimate(Theta.copy(), float(lam), obj, kkt, sweep, trace)

    kkt = kkt_residual(S, Theta, lam, cfg.penalize_diagonal)
    best = PrecisionEstimate(Theta.copy(), float(lam), obj, kkt, cfg.max_sweeps, trace)
    raise NoConvergenceError(
        f"sglasso did not converge in {cfg.max_sweeps} sweeps (KKT residual {kkt:.2e})",
        best=best,
        residual=kkt,
    )


def select_lambda_cv(X, mu, lambdas, n_folds=5, config=None, seed=0):
    """Pick the penalty minimising out-of-fold ``tr(p S_val Theta) - log|Theta|``.

    Folds are a seeded random partition of the rows.
    """
    from .spatial import as_data, sign_cov

    X = as_data(X)
    n, p = X.shape
    if n_folds < 2 or n_folds > n:
        raise ContractViolation("need 2 <= n_folds <= n")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, n_folds)
    lambdas = np.asarray(sorted(lambdas), dtype=float)
    losses = np.zeros(len(lambdas))
    for k in range(n_folds):
        val = folds[k]
        train = np.concatenate([folds[i] for i in range(n_folds) if i != k])
        s_tr = sign_cov(X[train], mu)
        s_val = p * sign_cov(X[val], mu)
        start = None
        # Largest penalty first so each warm start is sparser than its target.
        for idx in range(len(lambdas) - 1, -1, -1):
            est = sglasso(s_tr, p, lambdas[idx], config, start=start)
            start = est.omega
            losses[idx] += np.sum(s_val * est.omega) - log_det(est.omega)
    return float(lambdas[int(np.argmin(losses))]), losses / n_folds
