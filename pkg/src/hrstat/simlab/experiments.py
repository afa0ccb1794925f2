"""Monte-Carlo drivers: empirical size, size-corrected power, HRQDA accuracy.

Replication ``r`` of a cell draws its data from the substream
``(seed, cell, r, attempt)``, where ``cell`` is a checksum of the cell
description. A replication whose estimation fails is redrawn once on the
next ``attempt`` and then excluded; a cell with more than 5% exclusions is
flagged invalid. Work is spread over a thread pool but results are reduced
in replication order, so the thread count never changes the output.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import io
import json
import math
import re
import zlib

import numpy as np

from ..errors import CalibrationError, ContractViolation, HrstatError, NoConvergenceError
from ..onesample import (
    BASE_METHODS,
    COMBINATIONS,
    METHODS,
    TestConfig,
    base_statistics,
    combine,
    evaluate,
    moment_p_values,
)
from ..qda import classify, confusion, hrqda_train, metrics
from ..rng import DEFAULT_SEED, stream
from ..linalg import sym_sqrt
from .generators import DistSpec, alt_mean, gen_elliptical, make_cov, make_qda_cov

FAILURE_LIMIT = 0.05
SIZE_METHODS = ("MAX", "SUM", "CC1", "CC3")
POWER_CALIBRATIONS = ("null-moments", "bootstrap", "asymptotic")
CSV_COLUMNS = ("model", "dist", "n", "p", "method", "rate", "mc_se", "n_reps", "n_failed")
_FAILURES = (HrstatError, NoConvergenceError, CalibrationError, np.linalg.LinAlgError)


@dataclass
class SimRow:
    model: str
    dist: str
    n: int
    p: int
    method: str
    rate: float
    mc_se: float
    n_reps: int
    n_failed: int
    valid: bool = True
    extra: dict = field(default_factory=dict)


@dataclass
class SimReport:
    """Result of one experiment: a row per (cell, method) plus the config echo.

    ``details`` holds per-replication arrays (statistics, p-values) for
    downstream checks; it is not written to CSV.
    """

    kind: str
    config: dict
    rows: list
    details: dict = field(default_factory=dict, repr=False)

    def row(self, method, **match):
        for r in self.rows:
            if r.method == method and all(r.extra.get(k) == v for k, v in match.items()):
                return r
        raise KeyError(method)

    def rate(self, method, **match):
        return self.row(method, **match).rate

    def to_csv(self):
        extra_cols = sorted({k for r in self.rows for k in r.extra})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + extra_cols + ["valid"])
        for r in self.rows:
            vals = [r.model, r.dist, r.n, r.p, r.method, _fmt(r.rate), _fmt(r.mc_se), r.n_reps, r.n_failed]
            vals += [_fmt(r.extra.get(k, "")) for k in extra_cols]
            w.writerow(vals + [int(r.valid)])
        return buf.getvalue()

    def to_dict(self):
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.update(d.pop("extra"))
            rows.append(d)
        return {"kind": self.kind, "config": self.config, "rows": rows}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_json_default)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def cell_key(*parts):
    """Stable 32-bit key of a cell description, used as an RNG path element."""
    return zlib.crc32("|".join(str(x) for x in parts).encode())


def _map(fn, items, threads):
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _dist(dist):
    return dist if isinstance(dist, DistSpec) else DistSpec(str(dist).lower())


def _binom_se(rate, n):
    return math.sqrt(rate * (1.0 - rate) / n) if n > 0 else float("nan")


def _retry(fn, seed, cell, r):
    """Run ``fn(rng, attempt)`` on up to two substreams; None if both fail."""
    for attempt in range(2):
        try:
            return fn(stream(seed, cell, r, attempt), attempt)
        except _FAILURES:
            continue
    return None


# -- size ---------------------------------------------------------------------


def size_experiment(dist, cov_model, n=100, p=120, alpha=0.05, n_reps=500, methods=SIZE_METHODS,
                    seed=DEFAULT_SEED, config=None, threads=1):
    """Empirical null rejection rates of the location tests.

    Parameters
    ----------
    dist : str or DistSpec
        ``"normal"``, ``"t3"`` or ``"mixture"``.
    cov_model : str
        Scatter model ``"I"`` to ``"IV"``.
    n, p : int
        Sample size and dimension.
    alpha : float
        Nominal level in ``(0, 1]``; a test rejects when its p-value is below it.
    n_reps : int
        Number of replications, at least 100.
    methods : sequence of str
    seed : int
    config : TestConfig, optional
        Calibration and estimator settings (bootstrap with ``M = 50`` by default).
    threads : int

    Returns
    -------
    SimReport
        One row per method; ``details`` holds per-replication p-values and
        statistics of all seven methods (NaN for excluded replications).
    """
    spec = _dist(dist)
    cfg = config or TestConfig()
    methods = [m.upper() for m in methods]
    if set(methods) - set(METHODS):
        raise ContractViolation(f"unknown methods {methods}")
    if n_reps < 100:
        raise ContractViolation("size experiments need at least 100 replications")
    if not 0 < alpha <= 1:
        raise ContractViolation("alpha must lie in (0, 1]")
    sigma, _ = make_cov(cov_model, p)
    root = sym_sqrt(sigma)
    cell = cell_key("size", cov_model, spec.family, spec.scale_norm, n, p)

    def one(r):
        def attempt(rng, a):
            X = gen_elliptical(spec, None, sigma, n, rng, root)
            return evaluate(X, cfg, seed, key=(cell, r, a))
        return _retry(attempt, seed, cell, r)

    results = _map(one, range(n_reps), threads)
    pv = {m: np.array([np.nan if e is None else e.p_values[m] for e in results]) for m in METHODS}
    st = {m: np.array([np.nan if e is None else e.statistics[m] for e in results]) for m in METHODS}
    ok = np.array([e is not None for e in results])
    n_ok = int(ok.sum())
    n_failed = n_reps - n_ok
    valid = n_failed <= FAILURE_LIMIT * n_reps
    rows = []
    for m in methods:
        rate = float(np.mean(pv[m][ok] < alpha)) if n_ok else float("nan")
        rows.append(SimRow(str(cov_model), spec.family, n, p, m, rate, _binom_se(rate, n_ok),
                           n_ok, n_failed, valid))
    echo = _echo(cfg, kind="size", dist=spec.family, scale_norm=spec.scale_norm, model=str(cov_model),
                 n=n, p=p, alpha=alpha, n_reps=n_reps, methods=methods, seed=seed)
    return SimReport("size", echo, rows, {"p_values": pv, "statistics": st, "ok": ok})


# -- power --------------------------------------------------------------------


def _scores(values, mean=None, sd=None, pvals=None):
    """Statistics oriented so that large values reject, for all seven methods."""
    if pvals is None:
        pvals = moment_p_values(values, mean, sd)
    out = {m: values[m] for m in BASE_METHODS}
    for c, (t, _) in combine(pvals).items():
        out[c] = t
    return out


def power_experiment(dist, cov_model, n=100, p=120, alpha=0.05, kappa=1.5, s_grid=(1,), n_reps=300,
                     methods=("MAX", "SUM", "CC1"), n_null=2000, seed=DEFAULT_SEED, config=None,
                     calibration="null-moments", threads=1):
    """Size-corrected power against sparse or dense location shifts.

    The critical value of each method is the ``1 - alpha`` quantile of its
    statistic over ``n_null`` null replications; power is the fraction of
    alternative replications above it. Cauchy-combined methods need
    p-values of the base statistics. ``calibration`` chooses them:

    ``"null-moments"`` (default)
        Moment formulas with the mean and SD of the simulated null
        statistics, so no per-replication bootstrap is run.
    ``"bootstrap"``
        A parametric bootstrap per replication (slow).
    ``"asymptotic"``
        The limiting distributions.

    Returns
    -------
    SimReport
        One row per ``(s, method)``, with ``s``, ``kappa`` and the critical
        value in the extra columns.
    """
    spec = _dist(dist)
    if calibration not in POWER_CALIBRATIONS:
        raise ContractViolation(f"calibration must be one of {POWER_CALIBRATIONS}")
    if n_null < 500:
        raise ContractViolation("need at least 500 null replications")
    if not 0 < alpha < 1:
        raise ContractViolation("alpha must lie in (0, 1)")
    methods = [m.upper() for m in methods]
    base_cfg = config or TestConfig()
    if calibration == "null-moments":
        cfg = base_cfg
    else:
        cfg = TestConfig(**{**base_cfg.__dict__, "calibration": calibration})
    sigma, _ = make_cov(cov_model, p)
    root = sym_sqrt(sigma)

    def run(cell, mu, reps):
        def one(r):
            def attempt(rng, a):
                X = gen_elliptical(spec, mu, sigma, n, rng, root)
                if calibration == "null-moments":
                    return base_statistics(X, cfg).values
                ev = evaluate(X, cfg, seed, key=(cell, r, a))
                return (ev.statistics, ev.p_values)
            return _retry(attempt, seed, cell, r)
        return _map(one, range(reps), threads)

    null_cell = cell_key("power-null", cov_model, spec.family, spec.scale_norm, n, p)
    null = run(null_cell, None, n_null)
    null_ok = [x for x in null if x is not None]
    null_failed = n_null - len(null_ok)

    if calibration == "null-moments":
        arr = {m: np.array([v[m] for v in null_ok]) for m in BASE_METHODS}
        mean = {m: float(arr[m].mean()) for m in BASE_METHODS}
        sd = {m: float(arr[m].std(ddof=1)) for m in BASE_METHODS}

        def score(x):
            return _scores(x, mean, sd)
    else:
        mean = sd = None

        def score(x):
            stats_, pv = x
            return {m: stats_[m] for m in METHODS}

    null_scores = [score(x) for x in null_ok]
    crit = {m: float(np.quantile([s_[m] for s_ in null_scores], 1.0 - alpha)) for m in methods}

    rows = []
    details = {"critical": crit, "null_mean": mean, "null_sd": sd, "alt_scores": {}}
    for s in s_grid:
        s = int(s)
        mu = alt_mean(kappa, s, n, p, root)
        cell = cell_key("power-alt", cov_model, spec.family, spec.scale_norm, n, p, kappa, s)
        alt = run(cell, mu, n_reps)
        alt_ok = [score(x) for x in alt if x is not None]
        n_failed = n_reps - len(alt_ok)
        valid = n_failed <= FAILURE_LIMIT * n_reps and null_failed <= FAILURE_LIMIT * n_null
        details["alt_scores"][s] = {m: np.array([a[m] for a in alt_ok]) for m in methods}
        for m in methods:
            rate = float(np.mean(details["alt_scores"][s][m] > crit[m])) if alt_ok else float("nan")
            rows.append(SimRow(str(cov_model), spec.family, n, p, m, rate, _binom_se(rate, len(alt_ok)),
                               len(alt_ok), n_failed, valid,
                               {"s": s, "kappa": float(kappa), "critical": crit[m],
                                "null_failed": null_failed}))
    echo = _echo(base_cfg, kind="power", dist=spec.family, scale_norm=spec.scale_norm,
                 model=str(cov_model), n=n, p=p, alpha=alpha, kappa=kappa, s_grid=[int(s) for s in s_grid],
                 n_reps=n_reps, n_null=n_null, methods=methods, seed=seed, power_calibration=calibration)
    return SimReport("power", echo, rows, details)


# -- classification -------------------------------------------------------------


def qda_experiment(dist, qda_cov_model, p=120, n1=100, n2=100, n_reps=50, mu1=None, mu2=None,
                   n_test1=None, n_test2=None, seed=DEFAULT_SEED, config=None, identical=False,
                   threads=1):
    """Test-set accuracy of HRQDA over independent train/test draws.

    Defaults follow the usual two-class setting: ``mu1 = 0`` and
    ``mu2 = 0.1 * 1``, test sets as large as the training sets. With
    ``identical=True`` class 2 uses class 1's law (a no-signal check).

    Returns
    -------
    SimReport
        Rows ``acc``, ``spec``, ``sens`` and ``mcc`` with the mean over
        replications as ``rate`` and the SD in the ``sd`` column.
    """
    spec = _dist(dist)
    (s1, _), (s2, _) = make_qda_cov(qda_cov_model, p)
    mu1 = np.zeros(p) if mu1 is None else np.asarray(mu1, dtype=float)
    mu2 = np.full(p, 0.1) if mu2 is None else np.asarray(mu2, dtype=float)
    if identical:
        s2, mu2 = s1, mu1
    n_test1 = n1 if n_test1 is None else n_test1
    n_test2 = n2 if n_test2 is None else n_test2
    r1, r2 = sym_sqrt(s1), sym_sqrt(s2)
    hr_cfg = config.hr if isinstance(config, TestConfig) else config
    cell = cell_key("qda", qda_cov_model, spec.family, spec.scale_norm, p, n1, n2, identical)
    y = np.r_[np.ones(n_test1, dtype=int), np.full(n_test2, 2)]

    def one(r):
        def attempt(rng, a):
            X1 = gen_elliptical(spec, mu1, s1, n1, rng, r1)
            X2 = gen_elliptical(spec, mu2, s2, n2, rng, r2)
            T1 = gen_elliptical(spec, mu1, s1, n_test1, rng, r1)
            T2 = gen_elliptical(spec, mu2, s2, n_test2, rng, r2)
            model = hrqda_train(X1, X2, hr_cfg)
            return metrics(confusion(y, classify(model, np.vstack([T1, T2])))), model.c_hat
        return _retry(attempt, seed, cell, r)

    results = _map(one, range(n_reps), threads)
    ok = [x for x in results if x is not None]
    n_failed = n_reps - len(ok)
    valid = n_failed <= FAILURE_LIMIT * n_reps
    table = np.array([list(m) for m, _ in ok]) if ok else np.empty((0, 4))
    rows = []
    for j, name in enumerate(("acc", "spec", "sens", "mcc")):
        col = table[:, j]
        rate = float(col.mean()) if ok else float("nan")
        sd = float(col.std(ddof=1)) if len(ok) > 1 else float("nan")
        se = _binom_se(min(max(rate, 0.0), 1.0), len(ok)) if name != "mcc" else sd / math.sqrt(max(len(ok), 1))
        rows.append(SimRow(str(qda_cov_model), spec.family, n1 + n2, p, name, rate, se, len(ok),
                           n_failed, valid, {"sd": sd}))
    echo = _echo(config if isinstance(config, TestConfig) else TestConfig(), kind="qda", dist=spec.family,
                 scale_norm=spec.scale_norm, model=str(qda_cov_model), p=p, n1=n1, n2=n2, n_test1=n_test1,
                 n_test2=n_test2, n_reps=n_reps, seed=seed, identical=identical)
    details = {"metrics": table, "c_hat": np.array([c for _, c in ok])}
    return SimReport("qda", echo, rows, details)


# -- helpers ----------------------------------------------------------------------


def are_moment_ratio(dist, p=120, n_draws=100_000, seed=DEFAULT_SEED, chunk=10_000):
    """Monte-Carlo ``E(1/r)^2 * E(r^2)`` for radii of ``dist`` with identity scatter.

    This is the efficiency factor of the spatial-median-based location
    test relative to the mean-based one; it is 1 for the normal family in
    the large-``p`` limit and larger for heavy tails.
    """
    spec = _dist(dist)
    eye = np.eye(p)
    inv_sum = sq_sum = 0.0
    done = 0
    k = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        Z = gen_elliptical(spec, None, eye, m, stream(seed, cell_key("are", spec.family, p), k), eye)
        r2 = np.einsum("ij,ij->i", Z, Z)
        inv_sum += float(np.sum(1.0 / np.sqrt(r2)))
        sq_sum += float(np.sum(r2))
        done += m
        k += 1
    return (inv_sum / n_draws) ** 2 * (sq_sum / n_draws)


def _echo(cfg, **kw):
    d = dict(kw)
    d["calibration"] = cfg.calibration
    d["boot_m"] = cfg.boot_m
    d["sum2_leave_two_out"] = cfg.sum2_leave_two_out
    hr = cfg.hr
    d["bandwidth"] = hr.bandwidth
    d["lambda_c1"] = hr.lambda_c1
    d["lambda_c2"] = hr.lambda_c2
    d["lambda"] = hr.lam
    d["hr_tol"] = hr.tol
    return d


# -- presets ------------------------------------------------------------------

_PRESET = re.compile(
    r"^(?P<kind>table1|fig1|table2)-model(?P<model>iv|iii|ii|i)-(?P<dist>normal|t3|mixture)-p(?P<p>\d+)$"
)


def preset(name):
    """Experiment settings for a named preset.

    Names look like ``table1-modelI-normal-p120`` (size), ``fig1-modelII-t3-p120``
    (power at ``s = 1`` and ``s = p``) or ``table2-modelI-normal-p120``
    (classification).
    """
    m = _PRESET.match(name.strip().lower())
    if not m:
        raise ContractViolation(
            f"unknown preset {name!r}; expected e.g. table1-modelI-normal-p120, "
            "fig1-modelII-t3-p120 or table2-modelIII-t3-p120"
        )
    model = m["model"].upper()
    p = int(m["p"])
    out = {"dist": m["dist"], "p": p}
    if m["kind"] == "table1":
        out.update(kind="size", cov_model=model, n=100, n_reps=500, methods=list(SIZE_METHODS))
    elif m["kind"] == "fig1":
        out.update(kind="power", cov_model=model, n=100, n_reps=300, kappa=1.5, s_grid=[1, p],
                   methods=["MAX", "SUM", "CC1"], n_null=2000)
    else:
        if model == "IV":
            raise ContractViolation("classification presets use models I to III")
        out.update(kind="qda", qda_cov_model=model, n1=100, n2=100, n_reps=50)
    return out


def run_preset(name, overrides=None, seed=DEFAULT_SEED, config=None, threads=1):
    """Run a preset with optional keyword overrides (for example ``n_reps``)."""
    settings = preset(name)
    settings.update(overrides or {})
    kind = settings.pop("kind")
    fn = {"size": size_experiment, "power": power_experiment, "qda": qda_experiment}[kind]
    return fn(seed=seed, config=config, threads=threads, **settings)
