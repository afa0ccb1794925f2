import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrstat.errors import ContractViolation
from hrstat.qda import (
    DEFAULT_C_GRID,
    ConfusionCounts,
    QdaModel,
    classify,
    confusion,
    discriminant,
    estimate_c,
    hrqda_train,
    metrics,
    trace_hat,
)
from hrstat.simlab.generators import DistSpec, gen_elliptical, make_qda_cov

from oracles import gaussian_bayes_labels, unbiased_cov_trace


def _model(mu1, mu2, w1, w2, c=1.0):
    from hrstat.linalg import log_det
    return QdaModel(np.asarray(mu1, float), np.asarray(mu2, float), np.asarray(w1, float),
                    np.asarray(w2, float), log_det(w2) - log_det(w1), c)


def test_trace_hat_examples(rng):
    assert trace_hat(np.array([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx(2.0)
    assert trace_hat(np.ones((5, 3))) == pytest.approx(1e-12)
    X = rng.standard_normal((10_000, 50))
    assert abs(trace_hat(X) - 50) < 1.5
    with pytest.raises(ContractViolation):
        trace_hat(np.ones((1, 3)))


@given(st.integers(2, 30), st.integers(1, 8), st.integers(0, 10_000))
def test_trace_hat_matches_unbiased_covariance(n, p, seed):
    X = np.random.default_rng(seed).standard_normal((n, p)) * 3 + 1
    assert abs(trace_hat(X) - unbiased_cov_trace(X)) < 1e-10 * max(1.0, unbiased_cov_trace(X))


def test_discriminant_hand_example():
    m = _model([0, 0], [2, 0], np.eye(2), np.eye(2))
    assert discriminant(m, [0.0, 0.0]) == pytest.approx(4.0)
    assert classify(m, np.array([[0.0, 0.0], [2.0, 0.0]])).tolist() == [1, 2]
    with pytest.raises(ContractViolation):
        discriminant(m, [0.0, 0.0, 0.0])


def test_identical_classes_go_to_class_one(rng):
    X = rng.standard_normal((30, 6))
    model = hrqda_train(X, X.copy())
    assert model.logdet_ratio == 0.0
    Q = rng.standard_normal((20, 6))
    np.testing.assert_array_equal(discriminant(model, Q), 0.0)
    assert np.all(classify(model, Q) == 1)


def test_estimate_c_zero_ratio_returns_grid_min(rng):
    X1 = rng.standard_normal((20, 3))
    X2 = rng.standard_normal((20, 3)) + 1
    assert estimate_c(np.zeros(3), np.ones(3), np.eye(3), np.eye(3), 0.0, X1, X2) == 0.0


def test_estimate_c_unique_minimiser():
    # One dimension, W1 = 1 and W2 = 4: Delta(x) = 4 (x - m2)^2 - x^2, ratio = log 4.
    # Points are placed so only c = 1 (threshold log 4) separates them.
    w1, w2 = np.eye(1), 4 * np.eye(1)
    mu1, mu2 = np.zeros(1), np.zeros(1)
    ratio = np.log(4.0)

    def delta(x):
        return 4 * x**2 - x**2

    # Choose class-1 points with Delta just above log 4 and class-2 points just below.
    hi = np.sqrt((ratio + 0.01) / 3)
    lo = np.sqrt((ratio - 0.01) / 3)
    X1 = np.array([[hi], [-hi]])
    X2 = np.array([[lo], [-lo]])
    assert delta(hi) > ratio > delta(lo)
    c = estimate_c(mu1, mu2, w1, w2, ratio, X1, X2)
    assert c == 1.0


def test_default_grid():
    assert DEFAULT_C_GRID.size == 41
    assert DEFAULT_C_GRID[0] == 0.0 and DEFAULT_C_GRID[-1] == 2.0


def test_estimate_c_grid_validation(rng):
    X = rng.standard_normal((5, 2))
    with pytest.raises(ContractViolation):
        estimate_c(np.zeros(2), np.zeros(2), np.eye(2), np.eye(2), 0.0, X, X, grid=[])
    with pytest.raises(ContractViolation):
        estimate_c(np.zeros(2), np.zeros(2), np.eye(2), np.eye(2), 0.0, X, X, grid=[1.0, 0.5])


def test_known_parameter_rule_matches_bayes_oracle(rng):
    p = 5
    mu1, mu2 = np.zeros(p), np.full(p, 0.3)
    s1 = 0.6 ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    s2 = np.diag(np.linspace(0.5, 2.0, p))
    model = _model(mu1, mu2, np.linalg.inv(s1), np.linalg.inv(s2), c=1.0)
    n = 5000
    X = np.vstack([rng.multivariate_normal(mu1, s1, n), rng.multivariate_normal(mu2, s2, n)])
    y = np.r_[np.ones(n, int), np.full(n, 2)]
    err_rule = np.mean(classify(model, X) != y)
    err_bayes = np.mean(gaussian_bayes_labels(X, mu1, s1, mu2, s2) != y)
    assert abs(err_rule - err_bayes) < 0.01


def test_label_swap_duality(rng):
    X1 = rng.standard_normal((40, 6))
    X2 = rng.standard_normal((40, 6)) * 1.5 + 0.4
    a = hrqda_train(X1, X2, c=1.0)
    b = hrqda_train(X2, X1, c=1.0)
    Q = rng.standard_normal((100, 6))
    da, db = discriminant(a, Q), discriminant(b, Q)
    np.testing.assert_allclose(da, -db, atol=1e-8 * np.max(np.abs(da)))
    nz = np.abs(da) > 1e-8
    assert np.all(classify(a, Q)[nz] != classify(b, Q)[nz])


def test_common_scaling_invariance(rng):
    X1 = rng.standard_normal((40, 5))
    X2 = rng.standard_normal((40, 5)) * 1.3 + 0.5
    Q = rng.standard_normal((100, 5))
    a = hrqda_train(X1, X2, c=1.0)
    b = hrqda_train(4.0 * X1, 4.0 * X2, c=1.0)
    np.testing.assert_array_equal(classify(a, Q), classify(b, 4.0 * Q))


def test_model_json_round_trip(rng):
    X1 = rng.standard_normal((30, 4))
    X2 = rng.standard_normal((30, 4)) + 0.5
    m = hrqda_train(X1, X2)
    text = m.to_json()
    back = QdaModel.from_json(text)
    np.testing.assert_array_equal(back.omega_tilde1, m.omega_tilde1)
    assert back.c_hat == m.c_hat and back.logdet_ratio == m.logdet_ratio
    d = json.loads(text)
    assert d["version"] == 1 and list(d) == sorted(d)
    d["version"] = 99
    with pytest.raises(ContractViolation):
        QdaModel.from_dict(d)


def test_cross_validated_c(rng):
    X1 = rng.standard_normal((30, 4))
    X2 = rng.standard_normal((30, 4)) * 2
    m = hrqda_train(X1, X2, cv_folds=3)
    assert m.c_method == "cv" and m.c_hat in DEFAULT_C_GRID


def test_metrics_examples():
    m = metrics(ConfusionCounts(50, 50, 0, 0))
    assert tuple(m) == (1.0, 1.0, 1.0, 1.0)
    m = metrics(ConfusionCounts(tp=10, tn=10, fp=10, fn=10))
    assert m.mcc == 0.0
    m = metrics(ConfusionCounts(tp=5, tn=0, fp=0, fn=0))
    assert m.spec == 0.0 and "spec" in m.undefined and "mcc" in m.undefined
    with pytest.raises(ContractViolation):
        metrics(ConfusionCounts(0, 0, 0, 0))


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_mcc_bounds(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    m = metrics(ConfusionCounts(tp, tn, fp, fn))
    assert -1 <= m.mcc <= 1
    for v in (m.acc, m.spec, m.sens):
        assert 0 <= v <= 1
    if m.mcc == 1.0:
        assert fp == 0 and fn == 0


def test_confusion_counts():
    c = confusion([1, 1, 2, 2, 1], [1, 2, 2, 1, 1])
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 1, 1)


def test_hrqda_model_i_normal_accuracy():
    (s1, _), (s2, _) = make_qda_cov("I", 60)
    rng = np.random.default_rng(0)
    mu2 = np.full(60, 0.1)
    spec = DistSpec("normal")
    X1, X2 = gen_elliptical(spec, None, s1, 100, rng), gen_elliptical(spec, mu2, s2, 100, rng)
    T = np.vstack([gen_elliptical(spec, None, s1, 100, rng), gen_elliptical(spec, mu2, s2, 100, rng)])
    y = np.r_[np.ones(100, int), np.full(100, 2)]
    m = hrqda_train(X1, X2)
    assert metrics(confusion(y, classify(m, T))).acc > 0.9
