"""Running a trained sensor tree on held-out data, plus the myopic baseline."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .data import BasisConfig, Scaler, SensorSpec
from .lp import DecisionFunctions, LPReport
from .logistic import LogisticModel, fit_subset
from .tree import Ref, TreeStructure


@dataclass
class DecisionSystem:
    tree: TreeStructure
    decisions: DecisionFunctions | None  # None when the tree is a single leaf
    leaf_models: list
    scaler: Scaler
    sensors: SensorSpec
    alpha: float
    classifier_basis: BasisConfig
    lp_report: LPReport | None = None

    def __post_init__(self):
        for k, (leaf, m) in enumerate(zip(self.tree.leaves, self.leaf_models)):
            if tuple(sorted(leaf.sensors)) != tuple(m.subset):
                raise ValueError(f"leaf {k} model was trained on sensors {m.subset}, leaf holds {sorted(leaf.sensors)}")

    def g_values(self, X):
        if self.decisions is None:
            return np.zeros((np.atleast_2d(X).shape[0], 0))
        return self.decisions.values(X)

    def route(self, X):
        """Leaf id reached by each (standardized) row; g_j(x) = 0 takes the negative branch."""
        G = self.tree.states(self.g_values(X) > 0)
        return np.argmax(G, axis=1)


def acquired_cost(tree: TreeStructure, sensors: SensorSpec, k: int) -> float:
    """Cost of the union of sensor sets met on the way to leaf k, each sensor paid once."""
    acquired = set(tree.leaves[k].sensors)
    for ref in tree.path(k):
        acquired |= tree.sensors_at(ref)
    return sensors.cost(acquired)


@dataclass
class EvalRecord:
    leaf: np.ndarray
    cost: np.ndarray
    correct: np.ndarray
    total_cost: float  # sum of all sensor costs

    @property
    def n(self):
        return len(self.leaf)

    @property
    def error(self):
        return float(1.0 - np.mean(self.correct)) if self.n else float("nan")

    @property
    def mean_cost(self):
        return float(np.mean(self.cost)) if self.n else float("nan")

    @property
    def cost_fraction(self):
        return self.mean_cost / self.total_cost if self.total_cost > 0 else 0.0

    def risk(self, alpha):
        return self.error + alpha * self.mean_cost

    def summary(self):
        return {"n": self.n, "error": self.error, "mean_cost": self.mean_cost, "cost_fraction": self.cost_fraction}

    def write_jsonl(self, fh):
        for i in range(self.n):
            fh.write(json.dumps({"i": i, "leaf": int(self.leaf[i]), "cost": float(self.cost[i]),
                                 "correct": bool(self.correct[i])}) + "\n")


def evaluate(system: DecisionSystem, X, y) -> EvalRecord:
    """Route each standardized row, pay for the sensors on its path, classify at its leaf."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    leaf = system.route(X)
    pred = np.empty(len(y), dtype=np.int64)
    for k, model in enumerate(system.leaf_models):
        rows = np.flatnonzero(leaf == k)
        if rows.size:
            pred[rows] = model.predict_full(X[rows])
    leaf_cost = np.array([acquired_cost(system.tree, system.sensors, k) for k in range(system.tree.K)])
    return EvalRecord(leaf, leaf_cost[leaf], pred == y, system.sensors.total_cost)


class MyopicPolicy:
    """Confidence-threshold routing: confident examples take the cheap branch.

    At each internal node a classifier trained on the node's acquired sensors
    scores the example.  If its top class probability is at least ``tau`` the
    example moves to the cheaper child (the subtree whose cheapest leaf costs
    least), otherwise to the other child.
    """

    def __init__(self, tree: TreeStructure, leaf_models, node_models, sensors: SensorSpec):
        self.tree = tree
        self.leaf_models = leaf_models
        self.node_models = node_models
        self.sensors = sensors
        self.leaf_cost = np.array([acquired_cost(tree, sensors, k) for k in range(tree.K)])
        self.cheap_is_pos = []
        for node in tree.nodes:
            keys = []
            for polarity, child in ((0, node.neg), (1, node.pos)):
                sub_min = min(self.leaf_cost[k] for k in tree.leaves_under(child))
                extra = sensors.cost(tree.sensors_at(child) - node.sensors)
                keys.append((sub_min, extra, polarity))
            self.cheap_is_pos.append(min(keys)[2] == 1)

    @classmethod
    def train(cls, tree, leaf_models, train, sensors, basis, l2=1e-4):
        node_models = [
            fit_subset(train.examples, train.labels, train.n_classes, sensors, node.sensors, basis, l2)
            for node in tree.nodes
        ]
        return cls(tree, leaf_models, node_models, sensors)

    def confidences(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.node_models:
            return np.zeros((X.shape[0], 0))
        return np.column_stack([m.predict_proba(X[:, list(m.columns)]).max(axis=1) for m in self.node_models])

    def evaluate(self, X, y, tau, confidences=None) -> EvalRecord:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y)
        conf = self.confidences(X) if confidences is None else confidences
        confident = conf >= tau
        cheap_pos = np.array(self.cheap_is_pos, dtype=bool)
        positive = np.where(confident, cheap_pos[None, :], ~cheap_pos[None, :])
        leaf = np.argmax(self.tree.states(positive), axis=1) if self.tree.K > 1 else np.zeros(len(y), dtype=np.int64)
        pred = np.empty(len(y), dtype=np.int64)
        for k, model in enumerate(self.leaf_models):
            rows = np.flatnonzero(leaf == k)
            if rows.size:
                pred[rows] = model.predict_full(X[rows])
        return EvalRecord(leaf, self.leaf_cost[leaf], pred == y, self.sensors.total_cost)

    def curve(self, X, y, taus):
        conf = self.confidences(X)
        return [(float(t), self.evaluate(X, y, t, conf)) for t in taus]


def myopic_baseline(leaf_models, tree, tau, X, y, node_models, sensors) -> EvalRecord:
    return MyopicPolicy(tree, leaf_models, node_models, sensors).evaluate(X, y, tau)


@dataclass
class CurvePoint:
    param: float
    mean_cost: float
    cost_fraction: float
    error: float


@dataclass
class BudgetCurve:
    label: str  # "lp" or "myopic"
    param_name: str  # "alpha" or "tau"
    points: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (param, message)

    def sorted(self):
        return sorted(self.points, key=lambda p: (p.mean_cost, p.error, p.param))

    def write_csv(self, fh, labeled=False):
        if labeled:
            fh.write(f"# curve={self.label}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([self.param_name, "mean_cost", "cost_fraction", "error"])
        for p in self.sorted():
            w.writerow([repr(p.param), repr(p.mean_cost), repr(p.cost_fraction), repr(p.error)])
        for param, msg in self.failures:
            fh.write(f"# failed {self.param_name}={param!r}: {msg}\n")

    def to_csv(self, labeled=False):
        buf = io.StringIO()
        self.write_csv(buf, labeled)
        return buf.getvalue()


def read_curves(text):
    """Parse CSV written by BudgetCurve.write_csv (one or several labeled blocks)."""
    curves, cur = [], None
    for line in text.splitlines():
        if line.startswith("# curve="):
            cur = BudgetCurve(line.split("=", 1)[1], "")
            curves.append(cur)
        elif line.startswith("#") or not line.strip():
            continue
        elif line.split(",")[1] == "mean_cost":
            if cur is None or cur.param_name:
                cur = BudgetCurve("lp", "")
                curves.append(cur)
            cur.param_name = line.split(",")[0]
        else:
            a, b, c, d = (float(v) for v in line.split(","))
            cur.points.append(CurvePoint(a, b, c, d))
    return curves


def dominates(lp_curve: BudgetCurve, other: BudgetCurve, total_cost: float, slack: float = 0.05):
    """Points of ``other`` not matched by an LP point with <= error at <= cost + slack * total cost."""
    missing = []
    for q in other.points:
        if not any(p.error <= q.error and p.mean_cost <= q.mean_cost + slack * total_cost for p in lp_curve.points):
            missing.append(q)
    return missing
