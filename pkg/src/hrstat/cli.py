"""``hrstat`` command-line interface.

Exit codes: 0 success, 1 bad input data, 2 estimation failure, 3 bad
configuration or arguments.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    CalibrationError,
    ContractViolation,
    DegenerateDataError,
    DimensionError,
    HrstatError,
    ModelError,
    NoConvergenceError,
    SingularMatrixError,
)
from .hr import HrConfig, hr_estimate
from .io import DataFormatError, dumps_json, load_config, load_csv, load_labels, write_text
from .onesample import METHODS, TestConfig, run_tests
from .qda import QdaModel, classify, confusion, hrqda_train, metrics
from .rng import DEFAULT_SEED
from .simlab.experiments import preset, run_preset

EXIT_OK, EXIT_DATA, EXIT_ESTIMATION, EXIT_CONFIG = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# Options that may also come from a config file, with their converters.
_OPTIONS = {
    "input": str,
    "labels": str,
    "method": str,
    "alpha": float,
    "lambda_c1": float,
    "lambda_c2": float,
    "bandwidth": int,
    "tol": float,
    "boot_m": int,
    "reps": int,
    "seed": int,
    "threads": int,
    "out": str,
    "format": str,
    "preset": str,
    "model": str,
    "calibration": str,
    "header": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}
_DEFAULTS = {
    "method": "CC3",
    "alpha": 0.05,
    "lambda_c1": 1.0,
    "lambda_c2": 0.5,
    "bandwidth": 3,
    "tol": 1e-4,
    "boot_m": 50,
    "seed": DEFAULT_SEED,
    "format": "json",
    "calibration": "bootstrap",
    "header": False,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hrstat",
        description="High-dimensional HR estimation, location tests and robust QDA.",
    )
    parser.add_argument("--version", action="version", version=f"hrstat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat 'key = value' file; flags override it")
        p.add_argument("--input", help="CSV data file")
        p.add_argument("--header", action="store_const", const=True, default=None,
                       help="the CSV files have a header row")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, help="worker threads (default: $HRSTAT_THREADS or 1)")
        p.add_argument("--lambda-c1", type=float, dest="lambda_c1")
        p.add_argument("--lambda-c2", type=float, dest="lambda_c2")
        p.add_argument("--bandwidth", type=int)
        p.add_argument("--tol", type=float)
        return p

    common(sub.add_parser("estimate", help="HR location and scatter of a data set"))
    t = common(sub.add_parser("test", help="one-sample location test of H0: mu = 0"))
    t.add_argument("--method", help=f"comma-separated subset of {', '.join(METHODS)} or 'all'")
    t.add_argument("--alpha", type=float)
    t.add_argument("--boot-m", type=int, dest="boot_m")
    t.add_argument("--calibration", choices=("bootstrap", "asymptotic"))

    q = common(sub.add_parser("qda-train", help="fit an HRQDA classifier"))
    q.add_argument("--labels", help="label file (one column of 1/2); default: last input column")
    p = common(sub.add_parser("qda-predict", help="classify rows with a saved HRQDA model"))
    p.add_argument("--model", help="model JSON written by qda-train")
    p.add_argument("--labels", help="true labels, to report metrics")

    s = common(sub.add_parser("simulate", help="run a Monte-Carlo experiment preset"))
    s.add_argument("--preset", help="e.g. table1-modelI-normal-p120")
    s.add_argument("--reps", type=int)
    s.add_argument("--boot-m", type=int, dest="boot_m")
    s.add_argument("--alpha", type=float)
    s.add_argument("--calibration", choices=("bootstrap", "asymptotic"))
    return parser


def resolve(args):
    """Merge defaults, the config file and flags (in increasing priority)."""
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            raw = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except ContractViolation as exc:
            raise ConfigError(str(exc)) from exc
        for key, value in raw.items():
            if key not in _OPTIONS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                opts[key] = _OPTIONS[key](value)
            except ValueError:
                raise ConfigError(f"bad value {value!r} for config key {key!r}") from None
    for key in _OPTIONS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    if opts.get("threads") is None:
        env = os.environ.get("HRSTAT_THREADS")
        try:
            opts["threads"] = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"HRSTAT_THREADS must be an integer, got {env!r}") from None
    _check(opts)
    return opts


def _check(o):
    if not 0 < o["alpha"] < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if o["lambda_c1"] < 0 or o["lambda_c2"] < 0:
        raise ConfigError("lambda constants must be non-negative")
    if o["bandwidth"] < 0:
        raise ConfigError("bandwidth must be non-negative")
    if not o["tol"] > 0:
        raise ConfigError("tol must be positive")
    if o["boot_m"] < 2:
        raise ConfigError("boot-m must be at least 2")
    if o["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if o.get("reps") is not None and o["reps"] < 1:
        raise ConfigError("reps must be positive")
    if o["format"] not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    if o["calibration"] not in ("bootstrap", "asymptotic"):
        raise ConfigError("calibration must be bootstrap or asymptotic")


def _hr_config(o):
    return HrConfig(bandwidth=o["bandwidth"], tol=o["tol"], lambda_c1=o["lambda_c1"], lambda_c2=o["lambda_c2"])


def _test_config(o):
    return TestConfig(calibration=o["calibration"], boot_m=o["boot_m"], hr=_hr_config(o))


def _need(o, key):
    if not o.get(key):
        raise ConfigError(f"--{key.replace('_', '-')} is required")
    return o[key]


def _read(path, o, **kw):
    if not os.path.exists(path):
        raise ConfigError(f"input file {path!r} does not exist")
    return load_csv(path, has_header=o["header"], **kw)


def _emit(o, text):
    if o.get("out"):
        write_text(o["out"], text)
    else:
        sys.stdout.write(text)


def _echo(o, command):
    keys = ("alpha", "bandwidth", "boot_m", "calibration", "lambda_c1", "lambda_c2", "method",
            "seed", "threads", "tol", "input", "labels", "model", "preset", "reps")
    d = {k: o.get(k) for k in keys}
    d["command"] = command
    return d


def _csv_rows(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    return "\n".join(lines) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_estimate(o):
    X = _read(_need(o, "input"), o)
    est = hr_estimate(X, _hr_config(o))
    if o["format"] == "csv":
        rows = [["mu", i, "", v] for i, v in enumerate(est.mu.tolist())]
        rows += [["sigma", i, j, est.sigma[i, j]] for i in range(est.p) for j in range(est.p)]
        return _csv_rows(["quantity", "i", "j", "value"], rows)
    return dumps_json({
        "config": _echo(o, "estimate"),
        "n": X.shape[0],
        "p": est.p,
        "mu": est.mu,
        "sigma": est.sigma,
        "omega": est.omega,
        "lambda": est.lam,
        "iterations": est.iterations,
        "converged": est.converged,
        "psd_projections": est.psd_projections,
    })


def _methods(spec):
    if spec.strip().lower() == "all":
        return list(METHODS)
    ms = [m.strip().upper() for m in spec.split(",") if m.strip()]
    bad = [m for m in ms if m not in METHODS]
    if bad or not ms:
        raise ConfigError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return ms


def cmd_test(o):
    X = _read(_need(o, "input"), o)
    methods = _methods(o["method"])
    reports = run_tests(X, methods, o["alpha"], o["seed"], _test_config(o))
    if o["format"] == "csv":
        cols = ["method", "statistic", "p_value", "calibration", "boot_mean", "boot_sd", "alpha_reject"]
        return _csv_rows(cols, [[getattr(reports[m], c) for c in cols] for m in methods])
    return dumps_json({
        "config": _echo(o, "test"),
        "n": X.shape[0],
        "p": X.shape[1],
        "reports": [reports[m].__dict__ for m in methods],
    })


def _xy(o):
    path = _need(o, "input")
    if o.get("labels"):
        X = _read(path, o)
        y = load_labels(o["labels"])
        if len(y) != X.shape[0]:
            raise DataFormatError(f"{len(y)} labels for {X.shape[0]} rows")
        return X, y
    return _read(path, o, label_column=True)


def cmd_qda_train(o):
    X, y = _xy(o)
    model = hrqda_train(X[y == 1], X[y == 2], _hr_config(o))
    d = model.to_dict()
    d["config"] = _echo(o, "qda-train")
    return dumps_json(d)


def cmd_qda_predict(o):
    path = _need(o, "model")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read model file: {exc}") from exc
    try:
        model = QdaModel.from_json(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid model file: {exc}") from exc
    if o.get("labels"):
        X, y = _xy(o)
    else:
        X, y = _read(_need(o, "input"), o), None
    if X.shape[1] != model.p:
        raise DataFormatError(f"input has {X.shape[1]} columns, model expects {model.p}")
    pred = classify(model, X)
    out = {"config": _echo(o, "qda-predict"), "predictions": pred}
    if y is not None:
        m = metrics(confusion(y, pred, positive=1))
        out["metrics"] = {"acc": m.acc, "spec": m.spec, "sens": m.sens, "mcc": m.mcc,
                          "undefined": list(m.undefined)}
    if o["format"] == "csv":
        return _csv_rows(["row", "label"], [[i + 1, int(v)] for i, v in enumerate(pred)])
    return dumps_json(out)


def cmd_simulate(o):
    name = _need(o, "preset")
    try:
        settings = preset(name)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc
    overrides = {}
    if o.get("reps"):
        overrides["n_reps"] = o["reps"]
    if settings["kind"] in ("size", "power"):
        overrides["alpha"] = o["alpha"]
    cfg = _test_config(o)
    report = run_preset(name, overrides, seed=o["seed"], config=cfg, threads=o["threads"])
    report.config["preset"] = name
    if o["format"] == "csv":
        return report.to_csv()
    return report.to_json() + "\n"


COMMANDS = {
    "estimate": cmd_estimate,
    "test": cmd_test,
    "qda-train": cmd_qda_train,
    "qda-predict": cmd_qda_predict,
    "simulate": cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; map those onto the config code.
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        o = resolve(args)
        text = COMMANDS[args.command](o)
        _emit(o, text)
    except ConfigError as exc:
        print(f"hrstat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, DimensionError, OSError) as exc:
        print(f"hrstat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"hrstat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateDataError, SingularMatrixError, NoConvergenceError, CalibrationError) as exc:
        print(f"hrstat: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ContractViolation as exc:
        print(f"hrstat: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HrstatError as exc:
        print(f"hrstat: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
