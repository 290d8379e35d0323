"""Self-checks of the risk identities on random trees, for the risk-check command."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .risk import SavingsMatrix, build_weights, max_form_risk, product_risk, surrogate_risk
from .tree import random_tree


@dataclass
class CheckCounts:
    trees: int = 0
    sign_cases: int = 0
    equal: int = 0  # product form == max form within tol
    bound_cases: int = 0
    bound_ok: int = 0  # surrogate >= max form at sign(g)

    @property
    def passed(self):
        return self.equal == self.sign_cases and self.bound_ok == self.bound_cases

    def to_json(self):
        return dict(self.__dict__, passed=self.passed)


def risk_identities(n_trees=200, seed=0, k_max=8, n_examples=3, tol=1e-12) -> CheckCounts:
    """Every sign vector of random trees (K in 2..k_max) with random savings; plus random-g bound checks."""
    rng = np.random.default_rng(seed)
    out = CheckCounts()
    for _ in range(n_trees):
        K = int(rng.integers(2, k_max + 1))
        tree = random_tree(K, rng)
        pi = rng.integers(0, 20, size=(n_examples, K)) / 8.0
        sav = SavingsMatrix(pi, float(pi.max()) + 1.0, 0.1)
        w = build_weights(tree, sav)
        signs = np.array(list(itertools.product((False, True), repeat=K - 1)))
        for i in range(n_examples):
            p = product_risk(tree, sav, signs, i)
            m = max_form_risk(tree, sav, w, signs, i)
            out.sign_cases += len(signs)
            out.equal += int(np.sum(np.abs(p - m) <= tol))
        g = rng.normal(scale=2.0, size=(n_examples, K - 1))
        sur = surrogate_risk(tree, sav, w, g)
        emp = max_form_risk(tree, sav, w, g > 0)
        out.bound_cases += n_examples
        out.bound_ok += int(np.sum(sur >= emp - tol))
        out.trees += 1
    return out
