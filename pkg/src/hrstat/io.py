"""Reading data sets, writing reports, flat config files and gene screening."""

import csv
import json
import math
import warnings

import numpy as np
from scipy import stats

from .errors import ContractViolation, HrstatError


class DataFormatError(HrstatError, ValueError):
    """Malformed input file."""


def load_csv(path, has_header=False, label_column=False):
    """Read a numeric CSV file.

    Parameters
    ----------
    path : str or path-like
    has_header : bool
        Skip the first row.
    label_column : bool
        Treat the last column as integer class labels (1 or 2).

    Returns
    -------
    ndarray or (ndarray, ndarray)
        The ``n x p`` float64 matrix, plus the labels when ``label_column``.

    Raises
    ------
    DataFormatError
        For an empty file, ragged rows, or a cell that is not a finite
        number; the message names the 1-based row and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    start = 1 if has_header else 0
    body = [(i + 1, r) for i, r in enumerate(rows) if i >= start and any(c.strip() for c in r)]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    width = len(body[0][1])
    out = np.empty((len(body), width))
    for k, (lineno, r) in enumerate(body):
        if len(r) != width:
            raise DataFormatError(f"{path}: row {lineno} has {len(r)} fields, expected {width}")
        for j, cell in enumerate(r):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric value {cell.strip()!r} at row {lineno}, column {j + 1}"
                ) from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: non-finite value at row {lineno}, column {j + 1}")
            out[k, j] = v
    if not label_column:
        return out
    if width < 2:
        raise DataFormatError(f"{path}: need at least one feature column besides the labels")
    labels = out[:, -1]
    bad = ~np.isin(labels, (1.0, 2.0))
    if bad.any():
        lineno = body[int(np.argmax(bad))][0]
        raise DataFormatError(f"{path}: label at row {lineno}, column {width} must be 1 or 2")
    return out[:, :-1], labels.astype(int)


def load_labels(path):
    """Read a single column of 1/2 labels."""
    arr = load_csv(path)
    if arr.shape[1] != 1:
        raise DataFormatError(f"{path}: label file must have exactly one column")
    lab = arr[:, 0]
    if not np.all(np.isin(lab, (1.0, 2.0))):
        raise DataFormatError(f"{path}: labels must be 1 or 2")
    return lab.astype(int)


def write_csv(path, X, header=None):
    """Write a matrix with 17 significant digits so it reloads bit for bit."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in X:
            w.writerow(["%.17g" % v for v in row])


def dumps_json(obj):
    """JSON text with sorted keys; numpy scalars and arrays are converted."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Keys are normalised to lower case with ``-`` replaced by ``_``. Values
    stay strings; the caller converts them.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolation(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ContractViolation(f"config line {lineno}: empty key")
        key = key.lower().replace("-", "_")
        if key in out:
            raise ContractViolation(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def screen_genes(X1, X2, p_threshold=0.01):
    """Columns whose Welch two-sample t-test has p-value below ``p_threshold``.

    Columns that are constant in both classes are dropped with a warning.
    Returns the kept indices in ascending order.
    """
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != X2.shape[1]:
        raise ContractViolation("classes have different numbers of columns")
    if X1.shape[0] < 2 or X2.shape[0] < 2:
        raise ContractViolation("each class needs at least two rows")
    flat = (np.ptp(X1, axis=0) == 0) & (np.ptp(X2, axis=0) == 0)
    if flat.any():
        warnings.warn(f"{int(flat.sum())} column(s) constant in both classes were excluded", RuntimeWarning)
    keep = np.zeros(X1.shape[1], dtype=bool)
    cols = np.flatnonzero(~flat)
    if cols.size:
        _, pv = stats.ttest_ind(X1[:, cols], X2[:, cols], equal_var=False)
        keep[cols] = np.nan_to_num(pv, nan=1.0) < p_threshold
    return np.flatnonzero(keep)
