"""One-sample location tests built on the HR estimate.

Four base statistics:

* ``MAX``  -- sup-norm of the whitened HR location, Gumbel calibrated.
* ``SUM``  -- quadratic form of the HR location, normal calibrated.
* ``MAX2`` -- sup-norm of the coordinatewise standardised spatial median.
* ``SUM2`` -- U-statistic of inner products of coordinatewise standardised signs.

and three Cauchy combinations: ``CC1`` (MAX, SUM), ``CC2`` (MAX2, SUM2) and
``CC3`` (all four, equal weights). By default every base statistic is
calibrated with a parametric bootstrap that reruns the whole pipeline on
Gaussian data drawn with the estimated scatter.
"""

from dataclasses import dataclass, field
import math
import warnings
from typing import Optional

import numpy as np
from scipy import stats

from .errors import (
    CalibrationError,
    ContractViolation,
    HrstatError,
    NoConvergenceError,
)
from .hr import HrConfig, hr_estimate
from .linalg import sym_eigen
from .rng import DEFAULT_SEED, stream
from .spatial import as_data, diagonal_hr, row_signs

METHODS = ("MAX", "SUM", "MAX2", "SUM2", "CC1", "CC2", "CC3")
BASE_METHODS = ("MAX", "SUM", "MAX2", "SUM2")
COMBINATIONS = {
    "CC1": (("MAX", 0.5), ("SUM", 0.5)),
    "CC2": (("MAX2", 0.5), ("SUM2", 0.5)),
    "CC3": (("MAX", 0.25), ("SUM", 0.25), ("MAX2", 0.25), ("SUM2", 0.25)),
}
CALIBRATIONS = ("bootstrap", "asymptotic")

_P_LO = np.finfo(float).tiny
_P_HI = 1.0 - np.finfo(float).epsneg
CAUCHY_CLAMP = 1e-15


@dataclass(frozen=True)
class GumbelParams:
    """Mean and variance of the limit law ``F(x) = exp(-e^{-x/2} / sqrt(pi))``."""

    mu0: float = -math.log(math.pi) + 2.0 * np.euler_gamma
    sigma0_sq: float = 2.0 * math.pi**2 / 3.0

    @property
    def sigma0(self):
        return math.sqrt(self.sigma0_sq)


GUMBEL = GumbelParams()


def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float) / 2.0) / math.sqrt(math.pi))


def gumbel_sf(x):
    """``1 - gumbel_cdf(x)`` without cancellation in the upper tail."""
    return -np.expm1(-np.exp(-np.asarray(x, dtype=float) / 2.0) / math.sqrt(math.pi))


def gumbel_quantile(q):
    """Inverse of :func:`gumbel_cdf`: ``-log(pi) - 2 log(-log q)``."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ContractViolation("gumbel_quantile needs q in (0, 1)")
    out = -math.log(math.pi) - 2.0 * np.log(-np.log(q))
    return float(out) if out.ndim == 0 else out


def _open_unit(p):
    return float(min(max(p, _P_LO), _P_HI))


# -- statistics ---------------------------------------------------------------


def t_max(mu_hat, omega_sqrt, zeta1_hat, n, p):
    """``n * ||omega_sqrt mu||_inf^2 * zeta1^2 * p - 2 log p + log log p``."""
    if p < 3:
        raise ContractViolation("t_max needs p >= 3 so that log log p is defined")
    z = np.asarray(omega_sqrt) @ np.asarray(mu_hat, dtype=float)
    m = float(np.max(np.abs(z)))
    return n * m * m * zeta1_hat**2 * p - 2.0 * math.log(p) + math.log(math.log(p))


def t_sum(mu_hat, omega, zeta1_hat, n, p):
    """``sqrt(2p)/2 * (n zeta1^2 mu' omega mu - 1)``."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    q = float(mu_hat @ np.asarray(omega) @ mu_hat)
    return math.sqrt(2.0 * p) / 2.0 * (n * zeta1_hat**2 * q - 1.0)


def _diag_signs(X, d):
    U, _, _ = row_signs(X / np.sqrt(d))
    return U


def t_sum2(X, ls=None, leave_two_out=False, diag_tol=1e-6, diag_max_iter=200):
    """Average pairwise inner product of coordinatewise standardised signs.

    ``ls`` is a precomputed :func:`diagonal_hr` result. With
    ``leave_two_out`` the scale for pair ``(i, j)`` is re-estimated without
    rows ``i`` and ``j``; this costs ``n(n-1)/2`` fits and is limited to
    ``n <= 60``.
    """
    X = as_data(X)
    n = X.shape[0]
    if n < 2:
        raise ContractViolation("t_sum2 needs at least two rows")
    if leave_two_out:
        if n > 60:
            raise ContractViolation("leave-two-out T_SUM2 is limited to n <= 60")
        total = 0.0
        idx = np.arange(n)
        for i in range(n - 1):
            for j in range(i + 1, n):
                keep = (idx != i) & (idx != j)
                d = diagonal_hr(X[keep], diag_tol, diag_max_iter).d_diag
                U = _diag_signs(X[[i, j]], d)
                total += float(U[0] @ U[1])
        return 2.0 * total / (n * (n - 1))
    if ls is None:
        ls = diagonal_hr(X, diag_tol, diag_max_iter)
    U = _diag_signs(X, ls.d_diag)
    s = U.sum(axis=0)
    return float((s @ s - np.einsum("ij,ij->", U, U)) / (n * (n - 1)))


def t_max2(X, zeta1_hat, ls=None, diag_tol=1e-6, diag_max_iter=200):
    """``n zeta1^2 p ||D^{-1/2} mu||_inf^2 (1 - n^{-1/2})`` from the diagonal HR fit.

    ``zeta1_hat`` must be the mean inverse radius of the residuals
    standardised by the same diagonal scale (see :func:`diagonal_zeta1`).
    """
    X = as_data(X)
    n, p = X.shape
    if ls is None:
        ls = diagonal_hr(X, diag_tol, diag_max_iter)
    m = float(np.max(np.abs(ls.mu / np.sqrt(ls.d_diag))))
    return n * zeta1_hat**2 * p * m * m * (1.0 - 1.0 / math.sqrt(n))


def diagonal_zeta1(X, ls):
    E = (X - ls.mu) / np.sqrt(ls.d_diag)
    r = np.sqrt(np.einsum("ij,ij->i", E, E))
    return float(np.mean(1.0 / r[r > 0]))


def sum2_null_sd(X, ls):
    """Estimated null standard deviation of ``T_SUM2``.

    Uses the unbiased estimate of ``E (V_i' V_j)^2`` from the off-diagonal
    Gram entries of the standardised signs.
    """
    n = X.shape[0]
    U = _diag_signs(X, ls.d_diag)
    G = U @ U.T
    off = (np.sum(G * G) - np.sum(np.diag(G) ** 2)) / (n * (n - 1))
    return math.sqrt(2.0 * off / (n * (n - 1)))


# -- calibration ----------------------------------------------------------------


def p_value_sum(T, mu, sd):
    """``1 - Phi((T - mu) / sd)``."""
    if not sd > 0:
        raise CalibrationError(f"non-positive calibration SD {sd!r}")
    return _open_unit(stats.norm.sf((T - mu) / sd))


def p_value_max(T, mu, sd):
    """``1 - F(sigma0 (T - mu) / sd + mu0)`` with ``F`` the Gumbel limit law."""
    if not sd > 0:
        raise CalibrationError(f"non-positive calibration SD {sd!r}")
    return _open_unit(gumbel_sf(GUMBEL.sigma0 * (T - mu) / sd + GUMBEL.mu0))


def cauchy_combine(p_values, weights=None):
    """Cauchy combination ``1 - G(sum_k w_k tan((0.5 - p_k) pi))``.

    p-values at 0 or 1 are clamped to ``[1e-15, 1 - 1e-15]`` with a
    ``RuntimeWarning``. The sum is exactly rounded, so the result does not
    depend on the order of the inputs.
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise ContractViolation("need at least one p-value")
    w = np.full(p.size, 1.0 / p.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != p.shape:
        raise ContractViolation("weights and p-values differ in length")
    if np.any(w <= 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ContractViolation("weights must be positive and sum to one")
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ContractViolation("p-values must lie in [0, 1]")
    if np.any((p < CAUCHY_CLAMP) | (p > 1 - CAUCHY_CLAMP)):
        warnings.warn("p-values clamped to [1e-15, 1 - 1e-15] before combination", RuntimeWarning)
        p = np.clip(p, CAUCHY_CLAMP, 1 - CAUCHY_CLAMP)
    return _cauchy_sf(cauchy_statistic(p, w))


def cauchy_statistic(p, w):
    # tan((0.5 - p) pi) = cot(p pi); reflect so the argument stays small.
    p = np.asarray(p, dtype=float)
    small = np.minimum(p, 1.0 - p)
    terms = np.sign(0.5 - p) / np.tan(small * math.pi)
    terms[p == 0.5] = 0.0
    return math.fsum(np.asarray(w, dtype=float) * terms)


def _cauchy_sf(t):
    return float(math.atan2(1.0, t) / math.pi)


# -- orchestration ------------------------------------------------------------


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # keep pytest from collecting this class

    calibration: str = "bootstrap"
    boot_m: int = 50
    hr: HrConfig = field(default_factory=HrConfig)
    diag_tol: float = 1e-6
    diag_max_iter: int = 200
    sum2_leave_two_out: bool = False
    warm_start: bool = True

    def __post_init__(self):
        if self.calibration not in CALIBRATIONS:
            raise ContractViolation(f"calibration must be one of {CALIBRATIONS}")
        if self.boot_m < 2:
            raise ContractViolation("bootstrap size M must be at least 2")


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    method: str
    statistic: float
    p_value: float
    calibration: str
    boot_mean: Optional[float] = None
    boot_sd: Optional[float] = None
    alpha_reject: Optional[bool] = None


@dataclass(frozen=True)
class BaseStatistics:
    values: dict
    est: object
    diag: object
    zeta1: float
    zeta1_diag: float
    sum2_sd: float


@dataclass(frozen=True)
class BootstrapMoments:
    mean: dict
    sd: dict
    replicates: dict = field(repr=False)
    n_failed: int = 0

    # The four named moments of the SUM/MAX pair.
    @property
    def muS(self):
        return self.mean["SUM"]

    @property
    def sdS(self):
        return self.sd["SUM"]

    @property
    def muM(self):
        return self.mean["MAX"]

    @property
    def sdM(self):
        return self.sd["MAX"]

    def __iter__(self):
        # Unpacks as (muS, sdS, muM, sdM).
        return iter((self.muS, self.sdS, self.muM, self.sdM))


def base_statistics(X, config=None, omega_start=None):
    """All four base statistics from one HR fit and one diagonal fit."""
    cfg = config or TestConfig()
    X = as_data(X)
    n, p = X.shape
    est = hr_estimate(X, cfg.hr, omega_start=omega_start)
    E = (X - est.mu) @ est.omega_sqrt
    r = np.sqrt(np.einsum("ij,ij->i", E, E))
    if np.any(r <= 0):
        raise HrstatError("zero whitened radius")
    zeta1 = float(np.mean(1.0 / r))
    ls = diagonal_hr(X, cfg.diag_tol, cfg.diag_max_iter)
    zeta1_diag = diagonal_zeta1(X, ls)
    values = {
        "MAX": t_max(est.mu, est.omega_sqrt, zeta1, n, p),
        "SUM": t_sum(est.mu, est.omega, zeta1, n, p),
        "MAX2": t_max2(X, zeta1_diag, ls),
        "SUM2": t_sum2(
            X, ls, cfg.sum2_leave_two_out, cfg.diag_tol, cfg.diag_max_iter
        ),
    }
    return BaseStatistics(values, est, ls, zeta1, zeta1_diag, sum2_null_sd(X, ls))


def bootstrap_calibrate(omega_hat, n, M=50, seed=DEFAULT_SEED, config=None, key=(), streams=None,
                        omega_start=None):
    """Bootstrap null moments of the base statistics.

    Each replicate draws ``n`` rows from ``N(0, omega_hat^{-1})`` on its own
    substream ``(seed, *key, b, attempt)`` and recomputes every statistic.
    A failed replicate (estimation error or non-convergence) is retried once
    on a fresh substream, then skipped. Fewer than ``0.8 M`` successes raise
    :class:`CalibrationError`.

    ``streams`` overrides the replicate indices ``b`` (``range(M)`` by
    default); repeating an index repeats the replicate exactly.
    """
    cfg = config or TestConfig()
    if M < 2:
        raise ContractViolation("M must be at least 2")
    w, v = sym_eigen(omega_hat)
    if w[-1] <= 0:
        raise ContractViolation("omega_hat must be positive definite")
    root = (v / np.sqrt(w)) @ v.T
    root = 0.5 * (root + root.T)
    p = root.shape[0]
    if streams is None:
        streams = range(M)
    streams = list(streams)
    if len(streams) != M:
        raise ContractViolation("need one stream index per replicate")

    reps = {m: [] for m in BASE_METHODS}
    failed = 0
    for b in streams:
        for attempt in range(2):
            rng = stream(seed, *key, b, attempt)
            Z = rng.standard_normal((n, p)) @ root
            try:
                bs = base_statistics(Z, cfg, omega_start=omega_start)
            except (HrstatError, NoConvergenceError, np.linalg.LinAlgError):
                continue
            if not bs.est.converged:
                continue
            for m in BASE_METHODS:
                reps[m].append(bs.values[m])
            break
        else:
            failed += 1
    ok = M - failed
    if ok < 0.8 * M:
        raise CalibrationError(f"only {ok} of {M} bootstrap replicates succeeded")
    reps = {m: np.asarray(v_) for m, v_ in reps.items()}
    mean = {m: float(np.mean(v_)) for m, v_ in reps.items()}
    sd = {m: float(np.std(v_, ddof=1)) for m, v_ in reps.items()}
    return BootstrapMoments(mean=mean, sd=sd, replicates=reps, n_failed=failed)


def asymptotic_p_values(bs, p):
    v = bs.values
    shift = 2.0 * math.log(p) - math.log(math.log(p))
    return {
        "MAX": _open_unit(gumbel_sf(v["MAX"])),
        "SUM": _open_unit(stats.norm.sf(v["SUM"])),
        "MAX2": _open_unit(gumbel_sf(v["MAX2"] - shift)),
        "SUM2": _open_unit(stats.norm.sf(v["SUM2"] / bs.sum2_sd)) if bs.sum2_sd > 0 else 0.5,
    }


def moment_p_values(values, mean, sd):
    """p-values from location/scale moments (bootstrap or simulated null)."""
    out = {}
    for m in BASE_METHODS:
        if m not in values:
            continue
        if m in ("MAX", "MAX2"):
            out[m] = p_value_max(values[m], mean[m], sd[m])
        else:
            out[m] = p_value_sum(values[m], mean[m], sd[m])
    return out


def combine(pvals):
    """Cauchy-combined p-values and statistics for CC1, CC2, CC3."""
    out = {}
    for cc, parts in COMBINATIONS.items():
        ps = np.clip([pvals[m] for m, _ in parts], CAUCHY_CLAMP, 1 - CAUCHY_CLAMP)
        ws = [w for _, w in parts]
        t = cauchy_statistic(ps, ws)
        out[cc] = (t, _open_unit(_cauchy_sf(t)))
    return out


@dataclass(frozen=True)
class Evaluation:
    """Statistics and p-values of all seven methods on one data set."""

    statistics: dict
    p_values: dict
    base: BaseStatistics
    boot: Optional[BootstrapMoments] = None
    cc_boot: dict = field(default_factory=dict)


def evaluate(X, config=None, seed=DEFAULT_SEED, key=()):
    """Compute every statistic and p-value, sharing one fit and one bootstrap."""
    cfg = config or TestConfig()
    X = as_data(X)
    n, p = X.shape
    if n < 4:
        raise ContractViolation("location tests need n >= 4")

    bs = base_statistics(X, cfg)
    cc_boot = {}
    if cfg.calibration == "bootstrap":
        start = bs.est.omega_init if cfg.warm_start else None
        boot = bootstrap_calibrate(bs.est.omega, n, cfg.boot_m, seed, cfg, key=key, omega_start=start)
        pv = moment_p_values(bs.values, boot.mean, boot.sd)
        reps = boot.replicates
        rep_cc = {c: [] for c in COMBINATIONS}
        for i in range(len(reps["MAX"])):
            rp = moment_p_values({m: reps[m][i] for m in BASE_METHODS}, boot.mean, boot.sd)
            for c, (t, _) in combine(rp).items():
                rep_cc[c].append(t)
        cc_boot = {c: (float(np.mean(v)), float(np.std(v, ddof=1))) for c, v in rep_cc.items()}
    else:
        boot = None
        pv = asymptotic_p_values(bs, p)
    stats_ = dict(bs.values)
    for c, (t, pc) in combine(pv).items():
        stats_[c] = t
        pv[c] = pc
    return Evaluation(stats_, pv, bs, boot, cc_boot)


def run_tests(X, methods=METHODS, alpha=0.05, seed=DEFAULT_SEED, config=None, key=()):
    """Run several location tests on ``X`` sharing one fit and one bootstrap.

    Parameters
    ----------
    X : array_like, shape (n, p)
        Observations; the null hypothesis is a zero location.
    methods : sequence of str
        Any of ``METHODS``.
    alpha : float
        Level used for ``TestReport.alpha_reject`` (reject iff ``p < alpha``).
    seed : int
        Seed of the bootstrap substreams.
    config : TestConfig, optional
    key : tuple of int
        Extra substream path, so callers can nest independent bootstraps.

    Returns
    -------
    dict
        ``method -> TestReport`` for each requested method.
    """
    cfg = config or TestConfig()
    methods = [m.upper() for m in methods]
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ContractViolation(f"unknown method(s) {sorted(unknown)}; choose from {METHODS}")
    if not 0 < alpha < 1:
        raise ContractViolation("alpha must lie in (0, 1)")
    ev = evaluate(X, cfg, seed, key)

    reports = {}
    for m in methods:
        if ev.boot is None:
            bm = (None, None)
        elif m in BASE_METHODS:
            bm = (ev.boot.mean[m], ev.boot.sd[m])
        else:
            bm = ev.cc_boot[m]
        pval = ev.p_values[m]
        reports[m] = TestReport(
            method=m,
            statistic=float(ev.statistics[m]),
            p_value=float(pval),
            calibration=cfg.calibration,
            boot_mean=bm[0],
            boot_sd=bm[1],
            alpha_reject=bool(pval < alpha),
        )
    return reports


def one_sample_test(X, method="CC3", alpha=0.05, M=50, seed=DEFAULT_SEED, config=None):
    """Test ``H0: mu = 0`` with a single method; see :func:`run_tests`."""
    cfg = config or TestConfig()
    if M != cfg.boot_m:
        cfg = TestConfig(**{**cfg.__dict__, "boot_m": M})
    return run_tests(X, [method], alpha, seed, cfg)[method.upper()]
