"""Robust quadratic discriminant analysis from HR estimates (HRQDA).

Each class is summarised by its HR location and precision. The precision
is rescaled from the trace-``p`` scatter convention to the covariance
scale with the unbiased trace estimate, giving ``omega_tilde``. A point is
assigned to class 1 when

    (x - mu2)' W2 (x - mu2) - (x - mu1)' W1 (x - mu1) >= c * (log|W2| - log|W1|)

with ``W_k = omega_tilde_k``; ``c = 0`` gives the minimum Mahalanobis
distance rule and ``c = 1`` the Gaussian QDA rule.
"""

from dataclasses import dataclass, field
import json
import warnings

import numpy as np

from .errors import ContractViolation, HrstatError
from .hr import HrConfig, hr_estimate
from .linalg import log_det
from .spatial import as_data

MODEL_FORMAT = "hrstat-qda"
MODEL_VERSION = 1
DEFAULT_C_GRID = np.round(np.arange(41) * 0.05, 10)
TRACE_FLOOR = 1e-12


def trace_hat(X):
    """Trace of the unbiased sample covariance of ``X``, floored at 1e-12."""
    X = as_data(X)
    n = X.shape[0]
    if n < 2:
        raise ContractViolation("trace_hat needs at least two rows")
    xbar = X.mean(axis=0)
    t = np.einsum("ij,ij->", X, X) / (n - 1) - n / (n - 1) * float(xbar @ xbar)
    return max(float(t), TRACE_FLOOR)


@dataclass(frozen=True)
class QdaModel:
    mu1: np.ndarray
    mu2: np.ndarray
    omega_tilde1: np.ndarray
    omega_tilde2: np.ndarray
    logdet_ratio: float
    c_hat: float
    c_method: str = "grid"
    train_diag: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.mu1.shape[0]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "p": int(self.p),
            "mu1": self.mu1.tolist(),
            "mu2": self.mu2.tolist(),
            "omega_tilde1": self.omega_tilde1.tolist(),
            "omega_tilde2": self.omega_tilde2.tolist(),
            "logdet_ratio": float(self.logdet_ratio),
            "c_hat": float(self.c_hat),
            "c_method": self.c_method,
            "train_diag": self.train_diag,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ContractViolation("not an HRQDA model document")
        if d.get("version") != MODEL_VERSION:
            raise ContractViolation(f"unsupported model version {d.get('version')!r}")
        p = int(d["p"])
        arrs = {}
        for key, shape in (("mu1", (p,)), ("mu2", (p,)), ("omega_tilde1", (p, p)), ("omega_tilde2", (p, p))):
            a = np.asarray(d[key], dtype=float)
            if a.shape != shape:
                raise ContractViolation(f"{key} has shape {a.shape}, expected {shape}")
            arrs[key] = a
        return cls(
            logdet_ratio=float(d["logdet_ratio"]),
            c_hat=float(d["c_hat"]),
            c_method=d.get("c_method", "grid"),
            train_diag=d.get("train_diag", {}),
            **arrs,
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ContractViolation("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    acc: float
    spec: float
    sens: float
    mcc: float
    undefined: tuple = ()

    def __iter__(self):
        return iter((self.acc, self.spec, self.sens, self.mcc))


def _quad(D, W):
    return np.einsum("ij,jk,ik->i", D, W, D)


def _delta_sq(X, mu1, mu2, w1, w2):
    X = np.atleast_2d(X)
    return _quad(X - mu2, w2) - _quad(X - mu1, w1)


def discriminant(model, x):
    """``Delta^2(x) - c_hat * logdet_ratio``; non-negative means class 1.

    Accepts a single point or an ``(m, p)`` array and returns a float or an
    array accordingly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.p:
        raise ContractViolation(f"point has dimension {X.shape[1]}, model has {model.p}")
    out = _delta_sq(X, model.mu1, model.mu2, model.omega_tilde1, model.omega_tilde2)
    out = out - model.c_hat * model.logdet_ratio
    return float(out[0]) if single else out


def classify(model, X):
    """Labels 1 or 2 for the rows of ``X`` (ties go to class 1)."""
    d = np.atleast_1d(discriminant(model, X))
    return np.where(d >= 0, 1, 2)


def _class_error(delta1, delta2, c, logdet_ratio):
    thr = c * logdet_ratio
    e1 = np.mean(delta1 < thr)
    e2 = np.mean(delta2 >= thr)
    return 0.5 * (e1 + e2)


def estimate_c(mu1, mu2, w1, w2, logdet_ratio, X1, X2, grid=None):
    """Grid value of ``c`` with the smallest average class error on ``(X1, X2)``.

    The error is the unweighted mean of the two class-conditional error
    rates; ties go to the smallest ``c``.
    """
    grid = DEFAULT_C_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ContractViolation("grid must be non-empty, non-negative and sorted")
    d1 = _delta_sq(X1, mu1, mu2, w1, w2)
    d2 = _delta_sq(X2, mu1, mu2, w1, w2)
    errs = np.array([_class_error(d1, d2, c, logdet_ratio) for c in grid])
    return float(grid[int(np.argmin(errs))])


def _fit_class(X, cfg, tag):
    try:
        est = hr_estimate(X, cfg)
    except HrstatError as exc:
        raise type(exc)(f"class {tag}: {exc}") from exc
    p = X.shape[1]
    w = (p / trace_hat(X)) * est.omega
    diag = {"iterations": est.iterations, "converged": bool(est.converged),
            "psd_projections": est.psd_projections}
    if not est.converged:
        warnings.warn(f"HR estimate for class {tag} did not converge", RuntimeWarning)
    return est.mu, 0.5 * (w + w.T), diag


def hrqda_train(X1, X2, config=None, c_grid=None, c=None, cv_folds=None, seed=0):
    """Fit an HRQDA classifier.

    Parameters
    ----------
    X1, X2 : array_like
        Training rows of class 1 and class 2 (same number of columns).
    config : HrConfig, optional
        Settings for both HR fits.
    c_grid : array_like, optional
        Candidate cutoffs; defaults to ``0, 0.05, ..., 2``.
    c : float, optional
        Fixed cutoff; skips the search.
    cv_folds : int, optional
        Pick ``c`` by K-fold cross-validation instead of training error.
    seed : int
        Fold assignment seed for ``cv_folds``.

    Returns
    -------
    QdaModel
    """
    cfg = config or HrConfig()
    X1 = as_data(X1)
    X2 = as_data(X2)
    if X1.shape[1] != X2.shape[1]:
        raise ContractViolation("classes have different numbers of columns")
    if X1.shape[0] < 3 or X2.shape[0] < 3:
        raise ContractViolation("each class needs at least three rows")

    mu1, w1, diag1 = _fit_class(X1, cfg, 1)
    mu2, w2, diag2 = _fit_class(X2, cfg, 2)
    ratio = log_det(w2) - log_det(w1)

    if c is not None:
        c_hat, method = float(c), "fixed"
        if c_hat < 0:
            raise ContractViolation("c must be non-negative")
    elif cv_folds:
        c_hat, method = _cv_c(X1, X2, cfg, c_grid, cv_folds, seed), "cv"
    else:
        c_hat, method = estimate_c(mu1, mu2, w1, w2, ratio, X1, X2, c_grid), "grid"
    return QdaModel(mu1, mu2, w1, w2, float(ratio), c_hat, method, {"class1": diag1, "class2": diag2})


def _cv_c(X1, X2, cfg, grid, k, seed):
    grid = DEFAULT_C_GRID if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    f1 = np.array_split(rng.permutation(X1.shape[0]), k)
    f2 = np.array_split(rng.permutation(X2.shape[0]), k)
    errs = np.zeros(grid.size)
    for i in range(k):
        tr1 = np.setdiff1d(np.arange(X1.shape[0]), f1[i])
        tr2 = np.setdiff1d(np.arange(X2.shape[0]), f2[i])
        m1, w1, _ = _fit_class(X1[tr1], cfg, 1)
        m2, w2, _ = _fit_class(X2[tr2], cfg, 2)
        ratio = log_det(w2) - log_det(w1)
        d1 = _delta_sq(X1[f1[i]], m1, m2, w1, w2)
        d2 = _delta_sq(X2[f2[i]], m1, m2, w1, w2)
        errs += [_class_error(d1, d2, c, ratio) for c in grid]
    return float(grid[int(np.argmin(errs))])


def confusion(y_true, y_pred, positive=1):
    """Confusion counts with ``positive`` as the positive class label."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ContractViolation("label arrays differ in length")
    pt = y_true == positive
    pp = y_pred == positive
    return ConfusionCounts(
        tp=int(np.sum(pt & pp)),
        tn=int(np.sum(~pt & ~pp)),
        fp=int(np.sum(~pt & pp)),
        fn=int(np.sum(pt & ~pp)),
    )


def _ratio(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


def metrics(counts):
    """Accuracy, specificity, sensitivity and Matthews correlation.

    A metric with a zero denominator is reported as 0 and its name is listed
    in ``Metrics.undefined``.
    """
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    if counts.total == 0:
        raise ContractViolation("all confusion counts are zero")
    acc = (tp + tn) / counts.total
    spec, bad_spec = _ratio(tn, tn + fp)
    sens, bad_sens = _ratio(tp, tp + fn)
    den = float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn)
    mcc, bad_mcc = _ratio(float(tp * tn - fp * fn), np.sqrt(den))
    mcc = float(np.clip(mcc, -1.0, 1.0))
    undefined = tuple(n for n, b in (("spec", bad_spec), ("sens", bad_sens), ("mcc", bad_mcc)) if b)
    return Metrics(float(acc), float(spec), float(sens), mcc, undefined)
