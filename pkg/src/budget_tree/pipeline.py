"""End-to-end training: subsets -> tree -> leaf classifiers -> savings -> decision LP."""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import BasisConfig, Dataset, SensorSpec, Split, load_dataset, load_sensors, make_split, standardize
from .errors import BudgetTreeError, ConfigError
from .logistic import fit_subset
from .lp import DEFAULT_WMAX, train_decisions
from .policy import BudgetCurve, CurvePoint, DecisionSystem, MyopicPolicy, evaluate
from .risk import savings, shift_savings
from .subsets import SubsetCollection, greedy_select
from .tree import TreeStructure, cluster_tree

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    data: str | None = None
    sensors: str | None = None
    label: str = "label"
    split: tuple = (0.7, 0.15, 0.15)
    seed: int = 0
    alpha: float = 0.1
    alpha_grid: list | None = None
    leaves: int = 4
    basis_degree: int = 2
    homogeneous: bool = False
    g_degree: int | None = None
    l2: float = 1e-4
    wmax: float = DEFAULT_WMAX
    candidate_budget: int | None = None
    subset_revisits: int = 3  # regrow passes after the forward subset search; 0 = single pass
    fixed_tree: dict | None = None  # nested tree document
    fixed_subsets: list | None = None  # sensor-name lists
    lp_max_examples: int | None = None
    solver: str = "auto"
    savings_shift: str = "min"  # "min": subtract each example's smallest saving before the LP; "none"

    def classifier_basis(self):
        return BasisConfig(self.basis_degree, self.homogeneous, True)

    def decision_basis(self):
        return BasisConfig(self.g_degree or self.basis_degree, self.homogeneous, True)

    def validate(self):
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.alpha_grid is not None and (not self.alpha_grid or any(not a > 0 for a in self.alpha_grid)):
            raise ConfigError("alpha grid must be non-empty and strictly positive")
        if self.subset_revisits < 0:
            raise ConfigError("--subset-revisits must be >= 0")
        if self.leaves < 1:
            raise ConfigError("--leaves must be >= 1")
        if self.savings_shift not in ("min", "none"):
            raise ConfigError("savings shift must be 'min' or 'none'")
        if self.basis_degree not in (1, 2) or (self.g_degree not in (None, 1, 2)):
            raise ConfigError("basis degrees must be 1 or 2")
        return self

    def to_json(self):
        d = asdict(self)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_json(cls, doc):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**doc)
        cfg.split = tuple(cfg.split)
        return cfg


@dataclass
class Prepared:
    dataset: Dataset
    sensors: SensorSpec
    split: Split
    scaler: object
    train: Dataset
    val: Dataset
    test: Dataset


def prepare(cfg: RunConfig, split: Split | None = None) -> Prepared:
    for name, path in (("data", cfg.data), ("sensors", cfg.sensors)):
        if path is None:
            raise ConfigError(f"--{name} is required")
        if not os.path.exists(path):
            raise ConfigError(f"{name} file not found: {path}")
    ds = load_dataset(cfg.data, cfg.label)
    sensors = load_sensors(cfg.sensors, ds.d)
    return prepare_arrays(ds, sensors, cfg, split)


def prepare_arrays(ds: Dataset, sensors: SensorSpec, cfg: RunConfig, split: Split | None = None) -> Prepared:
    sensors.validate(ds.d)
    if split is None:
        try:
            split = make_split(ds.n, cfg.split, cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    scaler, train = standardize(ds.take(split.train_idx))
    val = ds.take(split.val_idx)
    test = ds.take(split.test_idx)
    return Prepared(ds, sensors, split, scaler, train, val.with_examples(scaler.transform(val.examples)),
                    test.with_examples(scaler.transform(test.examples)))


class LeafCache:
    """Leaf classifiers depend only on their sensor set; share them across alphas."""

    def __init__(self, prep: Prepared, basis: BasisConfig, l2: float):
        self.prep, self.basis, self.l2 = prep, basis, l2
        self._models = {}
        self._lock = threading.Lock()

    def get(self, S):
        S = frozenset(S)
        with self._lock:
            if S in self._models:
                return self._models[S]
        tr = self.prep.train
        m = fit_subset(tr.examples, tr.labels, tr.n_classes, self.prep.sensors, S, self.basis, self.l2)
        with self._lock:
            return self._models.setdefault(S, m)


def resolve_subsets(cfg: RunConfig, sensors: SensorSpec):
    return [frozenset(sensors.index(s) for s in names) for names in cfg.fixed_subsets]


def search_subsets(prep: Prepared, cfg: RunConfig, alpha: float) -> SubsetCollection:
    return greedy_select(prep.train, prep.val, prep.sensors, cfg.leaves, alpha,
                         candidate_budget=cfg.candidate_budget, l2=cfg.l2, n_classes=prep.dataset.n_classes,
                         revisit_passes=cfg.subset_revisits)


def build_tree(prep: Prepared, cfg: RunConfig, alpha: float):
    """Tree from (in order of precedence) a fixed tree, fixed subsets, or a fresh greedy search."""
    sensors = prep.sensors
    if cfg.fixed_tree is not None:
        return TreeStructure.from_nested(cfg.fixed_tree, sensors.L, sensors.index), None
    if cfg.fixed_subsets is not None:
        return cluster_tree(resolve_subsets(cfg, sensors), sensors.L), None
    coll = search_subsets(prep, cfg, alpha)
    return cluster_tree(coll.subsets, sensors.L), coll


def lp_rows(prep: Prepared, cfg: RunConfig):
    n = prep.train.n
    if cfg.lp_max_examples is None or cfg.lp_max_examples >= n:
        return np.arange(n)
    rng = np.random.default_rng(cfg.seed + 1)
    return np.sort(rng.choice(n, size=cfg.lp_max_examples, replace=False))


def fit_system(prep: Prepared, cfg: RunConfig, alpha: float, tree: TreeStructure | None = None,
               leaf_cache: LeafCache | None = None, dump_lp=None):
    """Train a DecisionSystem at one trade-off value.  Returns (system, subset collection or None)."""
    coll = None
    if tree is None:
        tree, coll = build_tree(prep, cfg, alpha)
    cache = leaf_cache or LeafCache(prep, cfg.classifier_basis(), cfg.l2)
    leaf_models = [cache.get(leaf.sensors) for leaf in tree.leaves]
    decisions, report = None, None
    if tree.K > 1:
        rows = lp_rows(prep, cfg)
        X = prep.train.examples[rows]
        sav = savings(leaf_models, tree, X, prep.train.labels[rows], alpha, prep.sensors.costs)
        if cfg.savings_shift == "min":
            sav = shift_savings(sav)
        decisions, report = train_decisions(tree, sav, X, prep.sensors, cfg.decision_basis(), cfg.wmax,
                                            cfg.solver, dump_lp)
    system = DecisionSystem(tree, decisions, leaf_models, prep.scaler, prep.sensors, alpha,
                            cfg.classifier_basis(), report)
    return system, coll


def worker_count():
    try:
        return max(1, int(os.environ.get("BUDGET_TREE_THREADS", "1")))
    except ValueError:
        return 1


def sweep_alpha(prep: Prepared, cfg: RunConfig, alphas, split_name="test") -> BudgetCurve:
    """Retrain and evaluate at every alpha; failures are recorded and the sweep continues."""
    alphas = [float(a) for a in alphas]
    if not alphas or any(not a > 0 for a in alphas):
        raise ConfigError("alpha grid must be non-empty and strictly positive")
    cache = LeafCache(prep, cfg.classifier_basis(), cfg.l2)
    data = getattr(prep, split_name)

    def one(alpha):
        try:
            system, _ = fit_system(prep, cfg, alpha, leaf_cache=cache)
        except BudgetTreeError as exc:
            return alpha, None, f"{type(exc).__name__}: {exc}"
        rec = evaluate(system, data.examples, data.labels)
        return alpha, rec, None

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, alphas))
    else:
        results = [one(a) for a in alphas]
    curve = BudgetCurve("lp", "alpha")
    for alpha, rec, err in results:
        if err is not None:
            log.warning("alpha=%g failed: %s", alpha, err)
            curve.failures.append((alpha, err))
        else:
            curve.points.append(CurvePoint(alpha, rec.mean_cost, rec.cost_fraction, rec.error))
    return curve


def myopic_curve(prep: Prepared, cfg: RunConfig, tree: TreeStructure, taus, split_name="test") -> BudgetCurve:
    cache = LeafCache(prep, cfg.classifier_basis(), cfg.l2)
    leaf_models = [cache.get(leaf.sensors) for leaf in tree.leaves]
    pol = MyopicPolicy.train(tree, leaf_models, prep.train, prep.sensors, cfg.classifier_basis(), cfg.l2)
    data = getattr(prep, split_name)
    curve = BudgetCurve("myopic", "tau")
    for tau, rec in pol.curve(data.examples, data.labels, taus):
        curve.points.append(CurvePoint(tau, rec.mean_cost, rec.cost_fraction, rec.error))
    return curve


def reference_tree(prep: Prepared, cfg: RunConfig, alphas) -> TreeStructure:
    """Tree for the myopic baseline: the fixed one, else the one searched at the grid's median alpha."""
    alphas = sorted(alphas)
    tree, _ = build_tree(prep, cfg, alphas[len(alphas) // 2])
    return tree


def log_grid(spec: str):
    """``lo:hi:steps`` -> ``steps`` log-spaced values from lo to hi inclusive."""
    try:
        lo, hi, steps = spec.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise ConfigError(f"bad alpha grid {spec!r}; expected lo:hi:steps") from None
    if lo <= 0 or hi <= 0 or steps < 1:
        raise ConfigError("alpha grid bounds must be positive and steps >= 1")
    if steps == 1:
        return [lo]
    return [float(v) for v in np.geomspace(lo, hi, steps)]


def linear_grid(spec: str):
    """``start:stop:step`` -> values start, start+step, ... up to stop inclusive."""
    try:
        a, b, s = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}; expected start:stop:step") from None
    if s <= 0 or b < a:
        raise ConfigError("grid step must be positive and stop >= start")
    n = int(np.floor((b - a) / s + 1e-9)) + 1
    return [round(a + i * s, 12) for i in range(n)]
