"""Binary sensor trees: construction by intersection clustering, path matrices, routing.

Internal nodes are numbered in pre-order (root = 0, negative subtree before
positive subtree) and leaves left to right with the negative branch first.
Each node carries the sensor set acquired on arrival; leaf ``k`` carries its
full set S_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import TreeError


class Ref(NamedTuple):
    is_leaf: bool
    index: int


@dataclass(frozen=True)
class InternalNode:
    id: int
    sensors: frozenset
    neg: Ref
    pos: Ref


@dataclass(frozen=True)
class Leaf:
    id: int
    sensors: frozenset


def _sig(s):
    return tuple(sorted(s))


@dataclass(frozen=True, eq=False)
class TreeStructure:
    nodes: tuple
    leaves: tuple
    n_sensors: int

    def __post_init__(self):
        K = len(self.leaves)
        if K < 1 or len(self.nodes) != K - 1:
            raise TreeError("a binary tree with K leaves needs K-1 internal nodes")
        P = np.zeros((K, K - 1), dtype=np.int64)
        N = np.zeros((K, K - 1), dtype=np.int64)
        under = {}

        def walk(ref, path):
            if ref.is_leaf:
                for j, positive in path:
                    (P if positive else N)[ref.index, j] = 1
                return frozenset([ref.index])
            node = self.nodes[ref.index]
            a = walk(node.neg, path + [(node.id, False)])
            b = walk(node.pos, path + [(node.id, True)])
            under[node.id] = (a, b)
            return a | b

        walk(self.root, [])
        if not (np.all(P.sum(axis=1) + N.sum(axis=1) >= (1 if K > 1 else 0))):
            raise TreeError("unreachable leaf")
        P.setflags(write=False)
        N.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "Cn", tuple(under[j][0] for j in range(K - 1)))
        object.__setattr__(self, "Cp", tuple(under[j][1] for j in range(K - 1)))
        self._check_monotone(self.root, frozenset())

    def _check_monotone(self, ref, parent):
        s = self.sensors_at(ref)
        if not parent <= s:
            raise TreeError(f"sensor set {sorted(s)} does not contain its parent's {sorted(parent)}")
        if not ref.is_leaf:
            node = self.nodes[ref.index]
            self._check_monotone(node.neg, s)
            self._check_monotone(node.pos, s)

    @property
    def K(self):
        return len(self.leaves)

    @property
    def root(self) -> Ref:
        return Ref(True, 0) if self.K == 1 else Ref(False, 0)

    def sensors_at(self, ref: Ref) -> frozenset:
        return (self.leaves if ref.is_leaf else self.nodes)[ref.index].sensors

    def leaf_sets(self):
        return [leaf.sensors for leaf in self.leaves]

    def complement(self, k) -> frozenset:
        return frozenset(range(self.n_sensors)) - self.leaves[k].sensors

    def leaves_under(self, ref: Ref) -> frozenset:
        if ref.is_leaf:
            return frozenset([ref.index])
        return self.Cn[ref.index] | self.Cp[ref.index]

    def depth(self):
        return (self.P + self.N).sum(axis=1)

    # -- routing -------------------------------------------------------------

    def states(self, positive):
        """G_k for every leaf.  ``positive`` is (K-1,) or (n, K-1) booleans (g_j > 0)."""
        pos = np.asarray(positive) > 0
        single = pos.ndim == 1
        pos = np.atleast_2d(pos)
        ok = np.ones((pos.shape[0], self.K), dtype=bool)
        for j in range(self.K - 1):
            ok &= ~((self.P[:, j] == 1)[None, :] & ~pos[:, [j]])
            ok &= ~((self.N[:, j] == 1)[None, :] & pos[:, [j]])
        G = ok.astype(np.int64)
        return G[0] if single else G

    def route(self, positive):
        """Leaf reached by a sign assignment (walks the tree)."""
        pos = np.asarray(positive) > 0
        if pos.ndim == 2:
            return np.array([self.route(row) for row in pos], dtype=np.int64)
        ref = self.root
        while not ref.is_leaf:
            node = self.nodes[ref.index]
            ref = node.pos if pos[node.id] else node.neg
        return ref.index

    def path(self, k):
        """Internal-node refs from the root down to leaf ``k``."""
        out, ref = [], self.root
        while not ref.is_leaf:
            node = self.nodes[ref.index]
            out.append(ref)
            ref = node.pos if self.P[k, node.id] else node.neg
        return out

    # -- (de)serialization -----------------------------------------------------

    @classmethod
    def from_nested(cls, nested, n_sensors: int, resolve=None) -> "TreeStructure":
        """Build from ``{"sensors": [...], "neg": {...}, "pos": {...}}``; leaves omit neg/pos.

        ``resolve`` maps a sensor name to its id (ids pass through unchanged).
        """
        if isinstance(nested, dict) and "root" in nested and "sensors" not in nested:
            nested = nested["root"]
        nodes, leaves = [], []

        def sensors_of(d):
            try:
                items = d["sensors"]
            except (KeyError, TypeError):
                raise TreeError(f"tree entry without 'sensors': {d!r}") from None
            ids = frozenset(resolve(s) if resolve else int(s) for s in items)
            if any(not 0 <= s < n_sensors for s in ids):
                raise TreeError(f"sensor id out of range in {sorted(ids)}")
            return ids

        def build(d):
            has_neg, has_pos = "neg" in d, "pos" in d
            if has_neg != has_pos:
                raise TreeError("internal nodes need both 'neg' and 'pos'")
            if not has_neg:
                leaves.append(Leaf(len(leaves), sensors_of(d)))
                return Ref(True, len(leaves) - 1)
            j = len(nodes)
            nodes.append(None)
            s = sensors_of(d)
            neg = build(d["neg"])
            pos = build(d["pos"])
            nodes[j] = InternalNode(j, s, neg, pos)
            return Ref(False, j)

        build(nested)
        return cls(tuple(nodes), tuple(leaves), int(n_sensors))

    def to_nested(self, names=None):
        def name(s):
            return names[s] if names else s

        def emit(ref):
            item = {"sensors": [name(s) for s in sorted(self.sensors_at(ref))]}
            if not ref.is_leaf:
                node = self.nodes[ref.index]
                item["neg"] = emit(node.neg)
                item["pos"] = emit(node.pos)
            return item

        return emit(self.root)

    def to_json(self, names=None):
        def name(s):
            return names[s] if names else s

        def ref(r):
            return {"leaf": r.index} if r.is_leaf else {"node": r.index}

        return {
            "K": self.K,
            "nodes": [
                {"id": n.id, "sensors": [name(s) for s in sorted(n.sensors)], "neg": ref(n.neg), "pos": ref(n.pos)}
                for n in self.nodes
            ],
            "leaves": [{"id": l.id, "sensors": [name(s) for s in sorted(l.sensors)]} for l in self.leaves],
            "nested": self.to_nested(names),
            "P": self.P.tolist(),
            "N": self.N.tolist(),
        }

    @classmethod
    def from_json(cls, doc, n_sensors, resolve=None):
        return cls.from_nested(doc["nested"], n_sensors, resolve)


def path_matrices(tree: TreeStructure):
    return tree.P, tree.N


def cluster_tree(subsets, n_sensors: int) -> TreeStructure:
    """Agglomerate sensor sets by size of intersection into a binary tree.

    The pair sharing the most sensors is merged first and replaced by its
    intersection.  Ties go to the pair with the lexicographically smallest
    sorted sensor-id signatures.  Within a merge the child whose leaf-set
    signature is smaller becomes the negative branch.
    """
    sets = [frozenset(int(s) for s in S) for S in subsets]
    if not sets:
        raise TreeError("no subsets")
    if len(set(sets)) != len(sets):
        raise TreeError("duplicate subsets")
    if any(not s for s in sets):
        raise TreeError("empty subset")
    if len(sets) == 1:
        return TreeStructure.from_nested({"sensors": sorted(sets[0])}, n_sensors)

    # cluster: (sensor set, nested tree, sorted leaf signatures)
    clusters = [(s, {"sensors": sorted(s)}, (_sig(s),)) for s in sets]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                ca, cb = clusters[a], clusters[b]
                lo, hi = sorted([(_sig(ca[0]), ca[2]), (_sig(cb[0]), cb[2])])
                key = (-len(ca[0] & cb[0]), lo, hi)
                if best is None or key < best[0]:
                    best = (key, a, b)
        _, a, b = best
        ca, cb = clusters[a], clusters[b]
        neg, pos = (ca, cb) if ca[2] <= cb[2] else (cb, ca)
        inter = ca[0] & cb[0]
        merged = (inter, {"sensors": sorted(inter), "neg": neg[1], "pos": pos[1]},
                  tuple(sorted(ca[2] + cb[2])))
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
    return TreeStructure.from_nested(clusters[0][1], n_sensors)


def random_tree(K: int, rng, n_sensors: int = 6) -> TreeStructure:
    """Random binary tree with monotone random sensor sets (for tests and diagnostics)."""

    def grow(k, base):
        if k == 1:
            extra = frozenset(np.flatnonzero(rng.random(n_sensors) < 0.3).tolist())
            return {"sensors": sorted(base | extra)}
        here = base | frozenset(np.flatnonzero(rng.random(n_sensors) < 0.15).tolist())
        left = int(rng.integers(1, k))
        return {"sensors": sorted(here), "neg": grow(left, here), "pos": grow(k - left, here)}

    return TreeStructure.from_nested(grow(K, frozenset()), n_sensors)
