import numpy as np
import pytest

from budget_tree.data import BasisConfig, expand_basis
from budget_tree.logistic import LogisticModel, error_indicator, loss_and_grad, train_logistic

from oracles import finite_diff

B1 = BasisConfig(1, False, True)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        n, d, C = rng.integers(3, 9), rng.integers(1, 5), rng.integers(2, 5)
        Z = rng.normal(size=(n, d))
        y = rng.integers(0, C, n)
        W = rng.normal(size=(C, d))
        l2 = float(rng.choice([0.0, 1e-4, 0.1]))
        _, g = loss_and_grad(W, Z, y, l2)
        fd = finite_diff(lambda w: loss_and_grad(w, Z, y, l2)[0], W)
        worst = max(worst, float(np.max(np.abs(g - fd))))
    assert worst <= 1e-6


def test_separable_1d():
    X = np.array([[-1.0], [1.0]])
    m = train_logistic(X, np.array([0, 1]), 2, B1, l2=1e-4)
    assert (m.predict(X) == [0, 1]).all()
    assert m.predict(np.array([-1.0])) == 0
    assert m.train_error == 0.0


def test_single_class_everywhere():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 2))
    m = train_logistic(X, np.zeros(20, dtype=int), 2, B1, l2=1e-4)
    assert (m.predict(X) == 0).all()
    assert np.all(np.isfinite(m.weights)) and np.abs(m.weights).max() < 1e3


def test_zero_weights_tie_goes_to_class_zero():
    m = LogisticModel(np.zeros((3, 2)), (0,), (0,), B1)
    assert m.predict(np.array([0.7])) == 0


def test_softmax_sums_to_one_and_batch_matches_single():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 3, 30)
    m = train_logistic(X, y, 3, BasisConfig(2, False, True), l2=1e-3, columns=(0, 1, 2))
    P = m.predict_proba(X)
    assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12
    batch = m.predict(X)
    assert all(batch[i] == m.predict(X[i]) for i in range(len(X)))


def test_l2_shrinks_weights():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=40) > 0).astype(int)
        small = train_logistic(X, y, 2, B1, l2=1e-3)
        large = train_logistic(X, y, 2, B1, l2=1e-1)
        assert np.linalg.norm(large.weights) < np.linalg.norm(small.weights)


def test_error_indicator_matches_train_error():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    m = train_logistic(X, y, 2, B1, l2=1e-4)
    ind = error_indicator(m, X, y)
    assert set(np.unique(ind)) <= {0, 1}
    assert ind.mean() == pytest.approx(m.train_error, abs=1e-15)


def test_zero_weight_basis_dims_do_not_change_predictions():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(25, 2))
    W = rng.normal(size=(3, 3))
    m = LogisticModel(W, (0,), (0, 1), B1)
    Z = expand_basis(X, B1)
    Zp = np.column_stack([Z, rng.normal(size=(25, 2))])
    Wp = np.column_stack([W, np.zeros((3, 2))])
    assert (np.argmax(Zp @ Wp.T, axis=1) == m.predict(X)).all()


def test_dimension_mismatch():
    m = LogisticModel(np.zeros((2, 2)), (0,), (0,), B1)
    with pytest.raises(ValueError):
        m.predict(np.zeros((3, 2)))
