import itertools

import numpy as np
import pytest

from budget_tree.errors import TreeError
from budget_tree.tree import TreeStructure, cluster_tree, path_matrices, random_tree

from oracles import EXAMPLE_N, EXAMPLE_NESTED, EXAMPLE_P, example_tree, walk_route


def all_signs(K):
    return np.array(list(itertools.product((False, True), repeat=K - 1)))


def test_example_tree_matrices_and_child_sets():
    t = example_tree()
    P, N = path_matrices(t)
    assert P.tolist() == EXAMPLE_P
    assert N.tolist() == EXAMPLE_N
    assert t.Cp[0] == frozenset({2, 3})  # leaves 3 and 4
    assert t.Cn[0] == frozenset({0, 1})
    assert ((P + N).sum(axis=1) == 2).all()


def test_example_tree_routes():
    t = example_tree()
    assert t.route(np.array([False, False, True])) == 0
    assert t.route(np.array([False, False, False])) == 0
    assert t.route(np.array([True, False, True])) == 3
    assert t.route(np.array([True, True, True])) == 3


@pytest.mark.parametrize("K", range(2, 9))
def test_every_sign_vector_reaches_exactly_one_leaf(K):
    rng = np.random.default_rng(K)
    for _ in range(5):
        t = random_tree(K, rng)
        S = all_signs(K)
        G = t.states(S)
        assert (G.sum(axis=1) == 1).all()
        assert set(np.argmax(G, axis=1)) == set(range(K))
        nested = t.to_nested()
        assert [walk_route(nested, s) for s in S] == t.route(S).tolist()


@pytest.mark.parametrize("K", range(2, 9))
def test_structural_invariants(K):
    t = random_tree(K, np.random.default_rng(100 + K))
    P, N = t.P, t.N
    assert set(np.unique(P)) <= {0, 1} and set(np.unique(N)) <= {0, 1}
    assert not (P * N).any()
    for j, node in enumerate(t.nodes):
        under = t.leaves_under(node.neg) | t.leaves_under(node.pos)
        assert t.Cp[j] | t.Cn[j] == under and not (t.Cp[j] & t.Cn[j])
        assert t.Cp[j] == frozenset(np.flatnonzero(P[:, j]))
        assert t.Cn[j] == frozenset(np.flatnonzero(N[:, j]))
        assert node.sensors <= t.sensors_at(node.neg) and node.sensors <= t.sensors_at(node.pos)
    for k in range(K):
        assert (P[k] + N[k]).sum() == len(t.path(k))


def test_cluster_example():
    t = cluster_tree([frozenset({1, 2}), frozenset({1, 3}), frozenset({1, 2, 3})], 4)
    assert t.sensors_at(t.root) == frozenset({1})
    inner = [n for n in t.nodes if n.id != t.root.index]
    assert len(inner) == 1 and inner[0].sensors == frozenset({1, 2})
    leaves_under = {frozenset(t.leaves[k].sensors) for k in t.leaves_under(t.nodes[inner[0].id].neg)
                    | t.leaves_under(t.nodes[inner[0].id].pos)}
    assert leaves_under == {frozenset({1, 2}), frozenset({1, 2, 3})}
    assert sorted(map(sorted, t.leaf_sets())) == [[1, 2], [1, 2, 3], [1, 3]]


@pytest.mark.parametrize("K", range(2, 8))
def test_nested_chain_gives_cascade(K):
    chain = [frozenset(range(i + 1)) for i in range(K)]
    t = cluster_tree(chain, K)
    assert t.depth().max() == K - 1
    # each internal node has at least one leaf child: a cascade
    for node in t.nodes:
        assert node.neg.is_leaf or node.pos.is_leaf


def test_k2_matrices():
    t = cluster_tree([frozenset({0}), frozenset({0, 1})], 2)
    assert t.P.tolist() == [[0], [1]] and t.N.tolist() == [[1], [0]]
    assert t.sensors_at(t.root) == frozenset({0})


def test_disjoint_subsets_give_empty_root():
    t = cluster_tree([frozenset({0}), frozenset({1})], 2)
    assert t.sensors_at(t.root) == frozenset()


def test_cluster_rejects_duplicates_and_empty():
    with pytest.raises(TreeError):
        cluster_tree([frozenset({0}), frozenset({0})], 2)
    with pytest.raises(TreeError):
        cluster_tree([frozenset(), frozenset({0})], 2)


def test_cluster_is_deterministic_under_input_order():
    sets = [frozenset({0, 1}), frozenset({0, 2}), frozenset({0, 1, 3}), frozenset({2, 3})]
    a = cluster_tree(sets, 4).to_json()
    b = cluster_tree(list(reversed(sets)), 4).to_json()
    assert a == b


def test_json_roundtrip():
    t = example_tree()
    doc = t.to_json(["a", "b", "c"])
    back = TreeStructure.from_json(doc, 3, {"a": 0, "b": 1, "c": 2}.__getitem__)
    assert back.P.tolist() == EXAMPLE_P and back.N.tolist() == EXAMPLE_N
    assert TreeStructure.from_nested({"root": EXAMPLE_NESTED}, 3).to_nested() == EXAMPLE_NESTED


@pytest.mark.parametrize("bad", [
    {"sensors": [0], "neg": {"sensors": [0]}},
    {"sensors": [1], "neg": {"sensors": [0]}, "pos": {"sensors": [1]}},  # not monotone
    {"sensors": [9]},
    {"neg": {"sensors": [0]}, "pos": {"sensors": [1]}},
])
def test_from_nested_rejects(bad):
    with pytest.raises(TreeError):
        TreeStructure.from_nested(bad, 3)


def test_single_leaf_tree():
    t = cluster_tree([frozenset({0, 1})], 2)
    assert t.K == 1 and t.root.is_leaf
    assert t.states(np.zeros((3, 0), dtype=bool)).tolist() == [[1], [1], [1]]
