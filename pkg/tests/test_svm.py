import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mibci.svm import SvmConfig, SvmModel, hinge_objective, svm_decision, svm_predict, svm_train


def _blobs(seed=0, n=100, gap=2.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) < n // 2, -1.0, 1.0)
    X = rng.normal(scale=0.3, size=(n, 2))
    X[:, 0] += gap * y
    return X, y


def test_separable_blobs_fit_perfectly():
    X, y = _blobs()
    m = svm_train(X, y)
    assert np.mean(svm_predict(m, X) == y) == 1.0


def test_label_flip_symmetry():
    X, y = _blobs(1)
    a, b = svm_train(X, y), svm_train(X, -y)
    assert np.max(np.abs(a.weights + b.weights)) <= 1e-9
    assert abs(a.bias + b.bias) <= 1e-9
    assert np.array_equal(svm_predict(a, X + 0.01), -svm_predict(b, X + 0.01))


def test_bit_reproducible():
    X, y = _blobs(2)
    a, b = svm_train(X, y, seed=5), svm_train(X, y, seed=5)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias


@given(st.integers(0, 10_000))
def test_duplicating_rows_keeps_decision_function(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 3))
    y = np.where(rng.random(30) < 0.5, -1.0, 1.0)
    y[:2] = [-1, 1]
    a = svm_train(X, y)
    b = svm_train(np.vstack([X, X]), np.concatenate([y, y]))
    assert np.max(np.abs(svm_decision(a, X) - svm_decision(b, X))) <= 1e-9


@given(st.integers(0, 10_000), st.sampled_from([0.1, 1.0, 10.0]))
def test_objective_non_increasing_at_checkpoints(seed, C):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(10, 60)), int(rng.integers(1, 6))
    X = rng.standard_normal((n, d)) * rng.uniform(0.2, 4)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[:2] = [-1, 1]
    trace = []
    m = svm_train(X, y, C=C, trace=trace)
    obj = [hinge_objective(w, b, X, y, 1.0 / C) for w, b in trace]
    assert len(obj) == 200
    assert all(b <= a for a, b in zip(obj, obj[1:]))
    assert hinge_objective(m.weights, m.bias, X, y, 1.0 / C) <= obj[0]


@given(st.integers(0, 10_000))
def test_margin_one_separable_reaches_full_accuracy(seed):
    rng = np.random.default_rng(seed)
    n = 60
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[:2] = [-1, 1]
    u = rng.standard_normal(3)
    u /= np.linalg.norm(u)
    X = rng.standard_normal((n, 3))
    X -= np.outer(X @ u, u)  # orthogonal part carries no label information
    X += np.outer(y * rng.uniform(1.0, 2.5, n), u)
    m = svm_train(X, y)
    assert np.all(svm_predict(m, X) == y)


def test_sign_zero_is_positive():
    m = SvmModel(np.zeros(2), 0.0, SvmConfig())
    assert svm_predict(m, np.random.default_rng(0).standard_normal((5, 2))).tolist() == [1] * 5


def test_positive_side_predicts_plus_one():
    m = SvmModel(np.array([1.0, 0.0]), 0.0, SvmConfig())
    assert svm_predict(m, np.array([[0.5, -3.0]])).tolist() == [1]


def test_zero_weight_zero_columns_do_not_change_predictions():
    X, y = _blobs(3)
    m = svm_train(X, y)
    m2 = svm_train(np.column_stack([X, np.zeros(len(y))]), y)
    assert m2.weights[-1] == 0.0
    assert np.array_equal(svm_predict(m, X), svm_predict(m2, np.column_stack([X, np.zeros(len(y))])))


def test_dimension_mismatch():
    X, y = _blobs()
    with pytest.raises(ValueError):
        svm_predict(svm_train(X, y), np.zeros((3, 5)))


def test_single_class_rejected():
    with pytest.raises(ValueError):
        svm_train(np.zeros((4, 2)), np.ones(4))


def test_non_pm1_labels_rejected():
    with pytest.raises(ValueError):
        svm_train(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
