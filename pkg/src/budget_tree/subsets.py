"""Greedy discovery of the K sensor subsets that become the tree's leaves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import BasisConfig, SensorSpec
from .errors import AllSubsetsEmpty
from .logistic import LogisticModel, fit_subset

log = logging.getLogger(__name__)

SEARCH_BASIS = BasisConfig(degree=1, homogeneous=False, include_bias=True)
STRICT_TOL = 1e-9


def leaf_risks(errors, costs, alpha):
    """Per-example risk of each leaf: errors (n, K) plus alpha * leaf cost (K,)."""
    return np.asarray(errors, dtype=float) + alpha * np.asarray(costs, dtype=float)[None, :]


def collection_loss(subsets, models, X_full, y, alpha, sensors: SensorSpec) -> float:
    """Mean over examples of the best leaf's error-plus-cost.

    ``models[k]`` may be None for an empty subset, which then acts as a leaf
    that is always wrong and costs nothing.
    """
    y = np.asarray(y)
    n = len(y)
    cols = []
    for S, m in zip(subsets, models):
        if not S:
            cols.append(np.ones(n))
        else:
            err = (m.predict_full(X_full) != y).astype(float)
            cols.append(err + alpha * sensors.cost(S))
    return float(np.mean(np.min(np.column_stack(cols), axis=1)))


@dataclass
class SubsetCollection:
    subsets: list  # frozensets of sensor ids, nonempty and distinct
    oracle_models: list
    alpha: float
    loss: float  # validation loss when the search stopped (empty slots still counting as error-1 leaves)
    final_loss: float  # validation loss of the returned subsets alone
    history: list = field(default_factory=list)  # loss after each accepted step, starting from the empty collection

    @property
    def K(self):
        return len(self.subsets)

    def to_json(self, sensors: SensorSpec):
        return {
            "alpha": self.alpha,
            "subsets": [[sensors.names[m] for m in sorted(S)] for S in self.subsets],
            "loss": self.loss,
            "final_loss": self.final_loss,
            "history": self.history,
        }


class _Oracle:
    """Trains and caches one search classifier per distinct subset."""

    def __init__(self, train_X, train_y, val_X, val_y, n_classes, sensors, basis, l2):
        self.train_X, self.train_y = train_X, train_y
        self.val_X, self.val_y = val_X, np.asarray(val_y)
        self.n_classes, self.sensors, self.basis, self.l2 = n_classes, sensors, basis, l2
        self.models: dict[frozenset, LogisticModel] = {}
        self.errors: dict[frozenset, np.ndarray] = {}

    def model(self, S):
        if S not in self.models:
            m = fit_subset(self.train_X, self.train_y, self.n_classes, self.sensors, S, self.basis, self.l2)
            self.models[S] = m
            self.errors[S] = (m.predict_full(self.val_X) != self.val_y).astype(float)
        return self.models[S]

    def risk(self, S, alpha):
        if not S:
            return np.ones(len(self.val_y))
        self.model(S)
        return self.errors[S] + alpha * self.sensors.cost(S)


def greedy_select(train, val, sensors: SensorSpec, K: int, alpha: float, candidate_budget=None,
                  basis: BasisConfig = SEARCH_BASIS, l2: float = 1e-4, n_classes=None,
                  revisit_passes: int = 3) -> SubsetCollection:
    """Grow subsets S_1..S_K one sensor at a time while the validation loss strictly drops.

    ``train``/``val`` are standardized Datasets.  Candidates per step are the
    ``candidate_budget`` cheapest sensors not yet in S_k (all when None);
    ties between equally good candidates go to the smallest sensor id.

    After the forward pass, up to ``revisit_passes`` sweeps regrow each S_k
    from empty with the other subsets held fixed; a regrown subset replaces
    the old one only if the collection loss strictly drops.  A sweep with no
    replacement ends the search.  ``revisit_passes=0`` is the single pass.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if val.n == 0:
        raise ValueError("subset search needs a non-empty validation split")
    n_classes = n_classes or train.n_classes
    oracle = _Oracle(train.examples, train.labels, val.examples, val.labels, n_classes, sensors, basis, l2)
    L = sensors.L
    budget = L if candidate_budget is None else max(1, int(candidate_budget))
    costs = sensors.costs

    subsets = [frozenset() for _ in range(K)]
    risks = [oracle.risk(S, alpha) for S in subsets]

    def loss_with(k, risk_k):
        others = [r for i, r in enumerate(risks) if i != k]
        return float(np.mean(np.min(np.column_stack(others + [risk_k]), axis=1)))

    def grow(k, S, current):
        """Greedy additions to S in slot k; returns (S, its risk column, loss after each addition)."""
        risk, steps = oracle.risk(S, alpha), []
        while True:
            pool = sorted((m for m in range(L) if m not in S), key=lambda m: (costs[m], m))[:budget]
            best_j, best_loss = None, np.inf
            for j in sorted(pool):
                cand = loss_with(k, oracle.risk(S | {j}, alpha))
                if cand < best_loss:
                    best_j, best_loss = j, cand
            if best_j is None or not best_loss < current - STRICT_TOL:
                return S, risk, steps
            S = S | {best_j}
            risk = oracle.risk(S, alpha)
            current = best_loss
            steps.append(current)
            log.debug("subset %d <- sensor %d, loss %.6f", k, best_j, current)

    current = loss_with(0, risks[0])
    history = [current]
    for k in range(K):
        S, risk, steps = grow(k, subsets[k], current)
        if steps:
            subsets[k], risks[k], current = S, risk, steps[-1]
            history.extend(steps)

    for _ in range(revisit_passes):
        changed = False
        for k in range(K):
            S, risk, steps = grow(k, frozenset(), loss_with(k, oracle.risk(frozenset(), alpha)))
            loss = steps[-1] if steps else np.inf
            if loss < current - STRICT_TOL:
                log.debug("subset %d regrown as %s, loss %.6f", k, sorted(S), loss)
                subsets[k], risks[k], current = S, risk, loss
                history.append(current)
                changed = True
        if not changed:
            break

    final = []
    for S in subsets:
        if S and S not in final:
            final.append(S)
    if not final:
        raise AllSubsetsEmpty(
            f"no sensor reduced the loss at alpha={alpha:g}; every sensor costs more than it saves "
            "(try a smaller alpha, i.e. a larger 1/alpha)"
        )
    models = [oracle.model(S) for S in final]
    final_loss = float(np.mean(np.min(np.column_stack([oracle.risk(S, alpha) for S in final]), axis=1)))
    return SubsetCollection(final, models, alpha, current, final_loss, history)
