"""Multinomial logistic regression used for leaf and oracle classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .data import BasisConfig, expand_basis
from .errors import TrainingDivergence

GTOL = 1e-6
MAX_ITER = 500


def loss_and_grad(W, Z, y, l2):
    """Mean multinomial log-loss plus ``l2/2 * ||W||^2`` and its gradient.

    ``W`` is C x B, ``Z`` the N x B basis matrix, ``y`` integer labels.
    """
    n = Z.shape[0]
    S = Z @ W.T
    lse = logsumexp(S, axis=1)
    loss = (lse.sum() - S[np.arange(n), y].sum()) / n + 0.5 * l2 * np.sum(W * W)
    P = np.exp(S - lse[:, None])
    P[np.arange(n), y] -= 1.0
    grad = P.T @ Z / n + l2 * W
    return loss, grad


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # C x B
    subset: tuple  # sensor ids the model reads
    columns: tuple  # feature columns, in the order fed to the basis
    basis: BasisConfig
    train_error: float = float("nan")

    @property
    def n_classes(self):
        return self.weights.shape[0]

    def features(self, X_full):
        """Restrict full feature rows to this model's columns and expand."""
        X_full = np.atleast_2d(np.asarray(X_full, dtype=float))
        return self.expand(X_full[:, list(self.columns)])

    def expand(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} features, got {X.shape[1]}")
        return expand_basis(X, self.basis)

    def decision_scores(self, X):
        return self.expand(X) @ self.weights.T

    def predict_proba(self, X):
        S = self.decision_scores(X)
        return np.exp(S - logsumexp(S, axis=1, keepdims=True))

    def predict(self, X):
        x = np.asarray(X, dtype=float)
        # argmax returns the first maximum: ties go to the smallest class id
        pred = np.argmax(self.decision_scores(x), axis=1)
        return int(pred[0]) if x.ndim == 1 else pred

    def predict_full(self, X_full):
        return np.argmax(self.features(X_full) @ self.weights.T, axis=1)

    def to_json(self):
        return {
            "subset": list(self.subset),
            "columns": list(self.columns),
            "basis": self.basis.to_json(),
            "weights": self.weights.tolist(),
            "train_error": self.train_error,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            np.array(doc["weights"], dtype=float),
            tuple(doc["subset"]),
            tuple(doc["columns"]),
            BasisConfig.from_json(doc["basis"]),
            float(doc.get("train_error", float("nan"))),
        )


def train_logistic(X, y, n_classes: int, basis: BasisConfig, l2: float = 1e-4,
                   subset=(), columns=None, max_iter: int = MAX_ITER) -> LogisticModel:
    """Fit on ``X`` (already restricted to the subset's columns).

    L-BFGS from zero weights, stopping when the gradient infinity-norm drops
    to 1e-6 or after ``max_iter`` iterations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    if columns is None:
        columns = tuple(range(X.shape[1]))
    if X.shape[1] != len(columns):
        raise ValueError("X width does not match columns")
    Z = expand_basis(X, basis)
    C, B = n_classes, Z.shape[1]
    state = {"it": 0}

    def fun(w):
        loss, g = loss_and_grad(w.reshape(C, B), Z, y, l2)
        if not np.isfinite(loss):
            raise TrainingDivergence(state["it"], float(np.linalg.norm(w)))
        return loss, g.ravel()

    def count(_):
        state["it"] += 1

    res = minimize(fun, np.zeros(C * B), jac=True, method="L-BFGS-B", callback=count,
                   options={"maxiter": max_iter, "gtol": GTOL, "ftol": 0.0, "maxcor": 20})
    W = res.x.reshape(C, B)
    W.setflags(write=False)
    pred = np.argmax(Z @ W.T, axis=1)
    err = float(np.mean(pred != y)) if len(y) else float("nan")
    return LogisticModel(W, tuple(int(s) for s in subset), tuple(int(c) for c in columns), basis, err)


def fit_subset(X_full, y, n_classes, sensors, subset, basis, l2=1e-4, max_iter=MAX_ITER):
    """Train a model reading exactly the columns of the sensor ids in ``subset``."""
    subset = tuple(sorted(subset))
    cols = tuple(sensors.columns(subset))
    X_full = np.asarray(X_full, dtype=float)
    return train_logistic(X_full[:, list(cols)], y, n_classes, basis, l2, subset, cols, max_iter)


def error_indicator(model: LogisticModel, X, y):
    """1 where the prediction is wrong, 0 where it is right."""
    pred = model.predict(X)
    return (np.asarray(pred) != np.asarray(y)).astype(int)
