import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy

from budget_tree.risk import (SavingsMatrix, build_weights, max_form_risk, max_form_terms, product_risk,
                              savings_from_errors, shift_savings, surrogate_risk, surrogate_terms)
from budget_tree.tree import random_tree

from oracles import brute_tree_risk, example_tree, random_rational_savings


def all_signs(K):
    return np.array(list(itertools.product((False, True), repeat=K - 1)))


def random_instance(rng, K, n=4, rational=False):
    tree = random_tree(K, rng)
    if rational:
        pi = random_rational_savings(rng, n, K)
        r_max = max(max(row) for row in pi) + Fraction(1, 3)
    else:
        pi = rng.uniform(0, 3, size=(n, K))
        r_max = float(pi.max()) + 0.5
    return tree, SavingsMatrix(pi, r_max, 0.1)


# -- savings -----------------------------------------------------------------

def test_savings_examples():
    t = example_tree()  # leaf 3 holds all three sensors
    costs = np.array([1.0, 3.0, 2.0])
    sav = savings_from_errors(np.array([[0, 0, 0, 0]]), t, costs, 0.2)
    assert sav.pi[0, 3] == 1.0
    # leaf 2 = {0,2}; complement {1} costs 3; wrong prediction
    sav = savings_from_errors(np.array([[0, 0, 1, 0]]), t, costs, 0.2)
    assert sav.pi[0, 2] == pytest.approx(0.6, abs=1e-15)
    assert sav.r_max == pytest.approx(1 + 0.2 * 6)


def test_leaf_risk_identity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        K = int(rng.integers(2, 7))
        t = random_tree(K, rng)
        costs = rng.uniform(0, 3, t.n_sensors)
        alpha = float(rng.uniform(0.01, 1))
        err = rng.integers(0, 2, size=(10, K))
        sav = savings_from_errors(err, t, costs, alpha)
        direct = err + alpha * np.array([costs[list(l.sensors)].sum() for l in t.leaves])[None, :]
        assert np.max(np.abs(sav.leaf_risk() - direct)) < 1e-12
        assert (sav.pi >= 0).all() and (sav.pi <= sav.r_max + 1e-12).all()


# -- product form --------------------------------------------------------------

def test_product_risk_matches_walk_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        K = int(rng.integers(2, 9))
        tree, sav = random_instance(rng, K, n=1)
        signs = rng.random(K - 1) < 0.5
        assert product_risk(tree, sav, signs, 0) == brute_tree_risk(tree.to_nested(), sav.pi[0], sav.r_max, signs)


def test_product_risk_example_tree_leaf1_and_symmetry():
    t = example_tree()
    sav = SavingsMatrix(np.array([[0.3, 0.5, 0.7, 0.11]]), 2.0, 0.1)
    assert product_risk(t, sav, np.array([False, False, True]), 0) == pytest.approx(2.0 - 0.3)
    flat = SavingsMatrix(np.full((1, 4), 0.4), 2.0, 0.1)
    assert len({float(product_risk(t, flat, s, 0)) for s in all_signs(4)}) == 1


# -- weights ---------------------------------------------------------------------

def example_symbols():
    p = sympy.symbols("pi1:5")
    return p, SavingsMatrix(np.array([list(p)], dtype=object), sympy.Symbol("R"), 0.1)


def test_example_tree_weights():
    p, sav = example_symbols()
    w = build_weights(example_tree(), sav)
    assert sympy.simplify(w.wn[0, 0, 0] - (p[2] + p[3])) == 0
    assert [sympy.simplify(v) for v in w.wp[0, 3]] == [p[0] + p[1], 0, p[2]]


def test_example_tree_max_terms_symbolic():
    p, sav = example_symbols()
    t = example_tree()
    w = build_weights(t, sav)
    g1, g2, g3 = sympy.symbols("I1 I2 I3")  # indicators 1[g_j > 0]
    ind = np.array([g1, g2, g3], dtype=object)
    neg = 1 - ind
    terms = (w.wp[0] * ind[None, :]).sum(axis=1) + (w.wn[0] * neg[None, :]).sum(axis=1)
    expected = [
        (p[2] + p[3]) * (1 - g1) + p[1] * (1 - g2),
        (p[2] + p[3]) * (1 - g1) + p[0] * g2,
        (p[0] + p[1]) * g1 + p[3] * (1 - g3),
        (p[0] + p[1]) * g1 + p[2] * g3,
    ]
    for got, want in zip(terms, expected):
        assert sympy.expand(got - want) == 0


def test_example_tree_max_form_leaf1():
    t = example_tree()
    pi = np.array([[0.2, 0.9, 0.4, 0.35]])
    sav = SavingsMatrix(pi, 3.0, 0.1)
    w = build_weights(t, sav)
    signs = np.array([False, False, True])
    terms = max_form_terms(t, sav, w, signs, 0)
    assert int(np.argmax(terms)) == 0
    assert terms[0] == pytest.approx(0.4 + 0.35 + 0.9)
    assert max_form_risk(t, sav, w, signs, 0) == pytest.approx(3.0 - pi.sum() + terms[0])
    assert max_form_risk(t, sav, w, signs, 0) == pytest.approx(product_risk(t, sav, signs, 0))


def test_zero_savings():
    t = example_tree()
    sav = SavingsMatrix(np.zeros((1, 4)), 2.5, 0.1)
    w = build_weights(t, sav)
    assert not w.wp.any() and not w.wn.any()
    for s in all_signs(4):
        assert max_form_risk(t, sav, w, s, 0) == 2.5


def test_weight_support_follows_path_matrices():
    rng = np.random.default_rng(2)
    for K in range(2, 9):
        tree, sav = random_instance(rng, K)
        w = build_weights(tree, sav)
        assert not (w.wn[:, tree.N == 0]).any()
        assert not (w.wp[:, tree.P == 0]).any()


# -- exact equivalence -------------------------------------------------------------

@pytest.mark.parametrize("K", range(2, 9))
def test_max_form_equals_product_exactly(K):
    rng = np.random.default_rng(10 + K)
    S = all_signs(K)
    for _ in range(10):
        tree, sav = random_instance(rng, K, n=3, rational=True)
        w = build_weights(tree, sav)
        for i in range(sav.n):
            a = product_risk(tree, sav, S, i)
            b = max_form_risk(tree, sav, w, S, i)
            assert all(x == y for x, y in zip(a, b))
            assert all(isinstance(x, Fraction) for x in b)


def test_shift_moves_exact_risk_by_constant():
    rng = np.random.default_rng(3)
    for K in range(2, 8):
        tree, sav = random_instance(rng, K, rational=True)
        sh = shift_savings(sav)
        S = all_signs(K)
        for i in range(sav.n):
            d = product_risk(tree, sh, S, i) - product_risk(tree, sav, S, i)
            assert len(set(d)) == 1 and d[0] == min(sav.pi[i])
        assert (sh.pi >= 0).all() and (sh.pi.min(axis=1) == 0).all()


# -- surrogate ----------------------------------------------------------------------

def test_surrogate_at_origin():
    rng = np.random.default_rng(4)
    tree, sav = random_instance(rng, 5)
    w = build_weights(tree, sav)
    g = np.zeros((sav.n, 4))
    want = sav.r_max - sav.pi.sum(axis=1) + (w.wp.sum(axis=2) + w.wn.sum(axis=2)).max(axis=1)
    assert np.allclose(surrogate_risk(tree, sav, w, g), want, atol=1e-12)


def test_surrogate_upper_bound():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        K = int(rng.integers(2, 9))
        tree, sav = random_instance(rng, K, n=1)
        w = build_weights(tree, sav)
        g = rng.normal(scale=float(rng.choice([0.1, 1, 5])), size=K - 1)
        assert surrogate_risk(tree, sav, w, g, 0) >= max_form_risk(tree, sav, w, g > 0, 0) - 1e-12


def test_surrogate_saturation():
    """One leaf with savings; g pushed to |g| >= 1 against every weighted indicator is tight."""
    rng = np.random.default_rng(6)
    for _ in range(200):
        K = int(rng.integers(2, 9))
        tree = random_tree(K, rng)
        k = int(rng.integers(K))
        pi = np.zeros((1, K))
        pi[0, k] = rng.uniform(0.1, 2)
        sav = SavingsMatrix(pi, 3.0, 0.1)
        w = build_weights(tree, sav)
        # route everything towards leaf k: on its path g_j >= 1 if P_kj else <= -1; elsewhere arbitrary
        mag = 1 + rng.exponential(size=K - 1)
        sign = np.where(rng.random(K - 1) < 0.5, 1.0, -1.0)
        sign = np.where(tree.P[k] == 1, 1.0, np.where(tree.N[k] == 1, -1.0, sign))
        g = sign * mag
        assert surrogate_risk(tree, sav, w, g, 0) == pytest.approx(max_form_risk(tree, sav, w, g > 0, 0), abs=1e-12)


def test_surrogate_convex():
    rng = np.random.default_rng(7)
    for _ in range(500):
        K = int(rng.integers(2, 9))
        tree, sav = random_instance(rng, K, n=1)
        w = build_weights(tree, sav)
        a, b = rng.normal(scale=3, size=(2, K - 1))
        mid = surrogate_risk(tree, sav, w, (a + b) / 2, 0)
        assert mid <= (surrogate_risk(tree, sav, w, a, 0) + surrogate_risk(tree, sav, w, b, 0)) / 2 + 1e-12


def test_active_term_is_route_when_strict():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(300):
        K = int(rng.integers(2, 9))
        tree, sav = random_instance(rng, K, n=1)
        w = build_weights(tree, sav)
        s = rng.random(K - 1) < 0.5
        terms = max_form_terms(tree, sav, w, s, 0)
        r = tree.route(s)
        others = np.delete(terms, r)
        if terms[r] > others.max(initial=-np.inf):
            checked += 1
            assert int(np.argmax(terms)) == r
        assert terms.max() == pytest.approx(terms[r])
    assert checked > 100


def test_batch_matches_single():
    rng = np.random.default_rng(9)
    tree, sav = random_instance(rng, 6, n=5)
    w = build_weights(tree, sav)
    g = rng.normal(size=(5, 5))
    batch = surrogate_risk(tree, sav, w, g)
    assert np.allclose(batch, [surrogate_risk(tree, sav, w, g[i], i) for i in range(5)], atol=0)
    bt = surrogate_terms(w, g)
    assert bt.shape == (5, 6)
