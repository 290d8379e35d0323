"""Savings, leaf risks and the three equivalent/upper-bounding forms of the tree risk.

* ``product_risk``: sum over leaves of leaf risk times the product of path
  indicators.  Direct, used as the oracle.
* ``max_form_risk``: R_max - sum_k pi_k + max_k (w_pk . 1[g>0] + w_nk . 1[g<=0]).
  Equal to the product form for every sign assignment.
* ``surrogate_risk``: the max form with 1[g>0] -> max(1+g, 0) and
  1[g<=0] -> max(1-g, 0).  Convex in g and never below the max form.

All functions work with float arrays and with object arrays of
``fractions.Fraction`` for exact checks.  Passing ``i=None`` evaluates every
example at once (signs / g values then have one row per example).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import TreeStructure


@dataclass(frozen=True)
class SavingsMatrix:
    pi: np.ndarray  # N x K
    r_max: object
    alpha: float

    @property
    def n(self):
        return self.pi.shape[0]

    def leaf_risk(self):
        return self.r_max - self.pi


@dataclass(frozen=True)
class WeightVectors:
    wp: np.ndarray  # N x K x (K-1); multiplies 1[g_j > 0]
    wn: np.ndarray  # N x K x (K-1); multiplies 1[g_j <= 0]


def savings_from_errors(errors, tree: TreeStructure, costs, alpha) -> SavingsMatrix:
    """pi_k^i = 1[f_k correct on i] + alpha * cost of the sensors leaf k never acquires."""
    errors = np.asarray(errors)
    costs = np.asarray(costs)
    unused = np.array([sum(costs[m] for m in tree.complement(k)) for k in range(tree.K)])
    correct = 1 - errors
    if errors.dtype == object or costs.dtype == object:
        correct = correct.astype(object)
        unused = unused.astype(object)
    pi = correct + alpha * unused[None, :]
    r_max = 1 + alpha * sum(costs)
    return SavingsMatrix(pi, r_max, alpha)


def savings(models, tree: TreeStructure, X_full, y, alpha, costs) -> SavingsMatrix:
    """Savings of each (example, leaf) pair with the leaf classifiers held fixed."""
    y = np.asarray(y)
    errors = np.column_stack([(m.predict_full(X_full) != y).astype(int) for m in models])
    return savings_from_errors(errors, tree, np.asarray(costs, dtype=float), float(alpha))


def shift_savings(sav: SavingsMatrix) -> SavingsMatrix:
    """Subtract each example's smallest saving from its row.

    Every exact risk form moves by the same per-example constant, so the
    routing that minimizes the empirical risk is unchanged.  The hinge
    surrogate, however, stops charging for examples on which all leaves
    are equally good.
    """
    pi = sav.pi - sav.pi.min(axis=1, keepdims=True)
    return SavingsMatrix(pi, sav.r_max, sav.alpha)


def _membership(tree: TreeStructure, sets, dtype):
    M = np.zeros((tree.K, tree.K - 1), dtype=np.int64)
    for j, s in enumerate(sets):
        M[list(s), j] = 1
    return M.astype(dtype) if dtype == object else M


def build_weights(tree: TreeStructure, sav: SavingsMatrix) -> WeightVectors:
    """Lost-savings weights: (w_nk)_j = N_kj * sum_{l in Cp_j} pi_l, (w_pk)_j = P_kj * sum_{l in Cn_j} pi_l."""
    pi = sav.pi
    obj = pi.dtype == object
    dt = object if obj else float
    sum_p = pi @ _membership(tree, tree.Cp, dt)  # N x (K-1)
    sum_n = pi @ _membership(tree, tree.Cn, dt)
    P = tree.P.astype(dt)
    N = tree.N.astype(dt)
    wn = N[None, :, :] * sum_p[:, None, :]
    wp = P[None, :, :] * sum_n[:, None, :]
    return WeightVectors(wp, wn)


def _select(a, i):
    return a if i is None else a[i]


def product_risk(tree: TreeStructure, sav: SavingsMatrix, signs, i=None):
    pi = _select(sav.pi, i)
    G = tree.states(signs)
    risk = sav.r_max - pi
    if pi.dtype == object:
        G = G.astype(object)
    return (risk * G).sum(axis=-1)


def _terms(weights: WeightVectors, i, a, b):
    wp, wn = _select(weights.wp, i), _select(weights.wn, i)
    if wp.dtype == object:
        a, b = a.astype(object), b.astype(object)
    # (..., K, K-1) . (..., K-1) -> (..., K)
    return (wp * a[..., None, :]).sum(axis=-1) + (wn * b[..., None, :]).sum(axis=-1)


def max_form_terms(tree, sav, weights, signs, i=None):
    pos = np.asarray(signs) > 0
    return _terms(weights, i, pos.astype(np.int64), (~pos).astype(np.int64))


def max_form_risk(tree: TreeStructure, sav: SavingsMatrix, weights: WeightVectors, signs, i=None):
    pi = _select(sav.pi, i)
    terms = max_form_terms(tree, sav, weights, signs, i)
    return sav.r_max - pi.sum(axis=-1) + terms.max(axis=-1)


def hinges(g):
    g = np.asarray(g, dtype=float)
    return np.maximum(1.0 + g, 0.0), np.maximum(1.0 - g, 0.0)


def surrogate_terms(weights: WeightVectors, g, i=None):
    a, b = hinges(g)
    return _terms(weights, i, a, b)


def surrogate_risk(tree: TreeStructure, sav: SavingsMatrix, weights: WeightVectors, g_values, i=None):
    pi = np.asarray(_select(sav.pi, i), dtype=float)
    terms = surrogate_terms(weights, g_values, i)
    return float(sav.r_max) - pi.sum(axis=-1) + terms.max(axis=-1)
