import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hrstat.errors import ContractViolation
from hrstat.io import DataFormatError, dumps_json, load_csv, load_labels, parse_config, screen_genes, write_csv


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_simple(tmp_path):
    np.testing.assert_array_equal(load_csv(_write(tmp_path, "1,2\n3,4\n")), [[1, 2], [3, 4]])


def test_load_header(tmp_path):
    X = load_csv(_write(tmp_path, "a,b\n1,2\n3,4\n"), has_header=True)
    np.testing.assert_array_equal(X, [[1, 2], [3, 4]])
    assert X.dtype == np.float64


def test_non_numeric_names_row_and_column(tmp_path):
    with pytest.raises(DataFormatError, match=r"row 3, column 2"):
        load_csv(_write(tmp_path, "1,2\n3,4\n5,abc\n"))


@pytest.mark.parametrize("text,pattern", [
    ("", "no data"),
    ("1,2\n3\n", "row 2 has 1 fields"),
    ("1,nan\n", "non-finite"),
    ("1,inf\n", "non-finite"),
])
def test_load_errors(tmp_path, text, pattern):
    with pytest.raises(DataFormatError, match=pattern):
        load_csv(_write(tmp_path, text))


def test_label_column(tmp_path):
    X, y = load_csv(_write(tmp_path, "1,2,1\n3,4,2\n"), label_column=True)
    np.testing.assert_array_equal(X, [[1, 2], [3, 4]])
    assert y.tolist() == [1, 2]
    with pytest.raises(DataFormatError, match="row 2, column 3"):
        load_csv(_write(tmp_path, "1,2,1\n3,4,3\n"), label_column=True)


def test_load_labels(tmp_path):
    assert load_labels(_write(tmp_path, "1\n2\n2\n")).tolist() == [1, 2, 2]
    with pytest.raises(DataFormatError):
        load_labels(_write(tmp_path, "1,2\n"))


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_bit_identical(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(path, X)
    Y = load_csv(path)
    assert Y.tobytes() == np.ascontiguousarray(X).tobytes()


def test_dumps_json_sorted_and_numpy():
    text = dumps_json({"b": np.float64(1.5), "a": np.arange(2), "c": np.bool_(True)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "1.5" in text and text.endswith("\n")


def test_parse_config():
    cfg = parse_config("# comment\nalpha = 0.1\nboot-M = 20  # trailing\n\n")
    assert cfg == {"alpha": "0.1", "boot_m": "20"}
    with pytest.raises(ContractViolation, match="duplicate"):
        parse_config("a = 1\na = 2\n")
    with pytest.raises(ContractViolation, match="line 1"):
        parse_config("just text\n")


def test_screen_identical_columns_excluded(rng):
    X1 = rng.standard_normal((20, 3))
    X2 = X1.copy()
    assert screen_genes(X1, X2).size == 0


def test_screen_separated_column_kept(rng):
    X1 = rng.standard_normal((50, 3))
    X2 = rng.standard_normal((50, 3))
    X2[:, 1] += 10
    assert screen_genes(X1, X2).tolist() == [1]


def test_screen_constant_columns_warn(rng):
    X1 = np.c_[np.ones(10), rng.standard_normal(10)]
    X2 = np.c_[np.ones(10), rng.standard_normal(10) + 20]
    with pytest.warns(RuntimeWarning, match="constant"):
        assert screen_genes(X1, X2).tolist() == [1]


def test_screen_null_retention(rng):
    m = 10_000
    X1 = rng.standard_normal((30, m))
    X2 = rng.standard_normal((30, m))
    frac = screen_genes(X1, X2).size / m
    assert abs(frac - 0.01) < 3 * np.sqrt(0.01 * 0.99 / m)


def test_screen_validation(rng):
    with pytest.raises(ContractViolation):
        screen_genes(rng.standard_normal((1, 3)), rng.standard_normal((5, 3)))
    with pytest.raises(ContractViolation):
        screen_genes(rng.standard_normal((5, 3)), rng.standard_normal((5, 4)))
