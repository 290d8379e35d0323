"""Datasets, priced sensors, standardization, splits and polynomial bases."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    EmptyFile,
    MissingLabelColumn,
    NonFiniteValue,
    NonNumericValue,
    SensorConfigError,
)


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    examples: np.ndarray
    labels: np.ndarray
    column_names: tuple
    classes: tuple  # original label strings; labels index into this

    def __post_init__(self):
        object.__setattr__(self, "examples", _frozen(self.examples, float))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.examples.ndim != 2 or self.examples.shape[0] != self.labels.shape[0]:
            raise ValueError("examples must be N x D with one label per row")

    @property
    def n(self):
        return self.examples.shape[0]

    @property
    def d(self):
        return self.examples.shape[1]

    @property
    def n_classes(self):
        return len(self.classes)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.examples[idx], self.labels[idx], self.column_names, self.classes)

    def with_examples(self, examples) -> "Dataset":
        return Dataset(examples, self.labels, self.column_names, self.classes)


def load_dataset(path, label_column: str) -> Dataset:
    """Read a headed CSV file; the label column may hold arbitrary strings.

    Labels are mapped to dense ids in order of first appearance.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path}: file is empty")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingLabelColumn(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
        names = [h for j, h in enumerate(header) if j != li]
        classes: dict[str, int] = {}
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise NonNumericValue(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            row = []
            for j, cell in enumerate(rec):
                if j == li:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericValue(f"{path}:{lineno}: non-numeric cell {cell!r} in column {header[j]!r}") from None
                if not math.isfinite(v):
                    raise NonFiniteValue(f"{path}:{lineno}: non-finite value {cell!r} in column {header[j]!r}")
                row.append(v)
            lab = rec[li].strip()
            labels.append(classes.setdefault(lab, len(classes)))
            rows.append(row)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    if not names:
        raise NonNumericValue(f"{path}: no feature columns")
    return Dataset(np.array(rows), np.array(labels), names, list(classes))


@dataclass(frozen=True)
class Sensor:
    name: str
    cost: float
    columns: tuple


@dataclass(frozen=True)
class SensorSpec:
    sensors: tuple

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))

    @property
    def L(self):
        return len(self.sensors)

    @property
    def names(self):
        return [s.name for s in self.sensors]

    @property
    def costs(self):
        return np.array([s.cost for s in self.sensors], dtype=float)

    @property
    def total_cost(self):
        return float(self.costs.sum())

    def cost(self, subset) -> float:
        return float(sum(self.sensors[m].cost for m in subset))

    def columns(self, subset) -> list:
        """Sorted feature columns covered by a set of sensor ids."""
        return sorted(c for m in subset for c in self.sensors[m].columns)

    def index(self, name_or_id) -> int:
        if isinstance(name_or_id, (int, np.integer)) and not isinstance(name_or_id, bool):
            if not 0 <= name_or_id < self.L:
                raise SensorConfigError(f"sensor id {name_or_id} out of range")
            return int(name_or_id)
        try:
            return self.names.index(name_or_id)
        except ValueError:
            raise SensorConfigError(f"unknown sensor {name_or_id!r}") from None

    def validate(self, d: int):
        if self.L < 2:
            raise SensorConfigError("need at least 2 sensors")
        seen = {}
        for s in self.sensors:
            if not s.columns:
                raise SensorConfigError(f"sensor {s.name!r} has no columns")
            if not (math.isfinite(s.cost) and s.cost >= 0):
                raise SensorConfigError(f"sensor {s.name!r}: cost must be finite and >= 0")
            for c in s.columns:
                if not 0 <= c < d:
                    raise SensorConfigError(f"sensor {s.name!r}: column {c} outside 0..{d - 1}")
                if c in seen:
                    raise SensorConfigError(f"column {c} claimed by both {seen[c]!r} and {s.name!r}")
                seen[c] = s.name
        if len(set(self.names)) != self.L:
            raise SensorConfigError("sensor names must be unique")
        return self

    def to_json(self):
        return {"sensors": [{"name": s.name, "cost": s.cost, "columns": list(s.columns)} for s in self.sensors]}

    @classmethod
    def from_json(cls, doc, d=None) -> "SensorSpec":
        try:
            items = doc["sensors"]
            sensors = [
                Sensor(str(it["name"]), float(it.get("cost", 1.0)), tuple(int(c) for c in it["columns"]))
                for it in items
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise SensorConfigError(f"malformed sensor config: {exc}") from None
        spec = cls(sensors)
        if d is not None:
            spec.validate(d)
        return spec


def load_sensors(path, d=None) -> SensorSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SensorConfigError(f"{path}: {exc}") from None
    return SensorSpec.from_json(doc, d)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_json(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(np.array(doc["mean"], dtype=float), np.array(doc["std"], dtype=float))


def standardize(train: Dataset):
    """Fit per-column mean/std on ``train``; constant columns pass through unchanged."""
    X = train.examples
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    const = std == 0
    mean = np.where(const, 0.0, mean)
    std = np.where(const, 1.0, std)
    scaler = Scaler(_frozen(mean), _frozen(std))
    return scaler, train.with_examples(scaler.transform(X))


@dataclass(frozen=True)
class BasisConfig:
    degree: int = 2
    homogeneous: bool = False
    include_bias: bool = True

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("basis degree must be 1 or 2")

    def size(self, d: int) -> int:
        n = d
        if self.degree == 2:
            n = d * (d + 1) // 2 + (0 if self.homogeneous else d)
        return n + int(self.include_bias)

    def to_json(self):
        return {"degree": self.degree, "homogeneous": self.homogeneous, "include_bias": self.include_bias}

    @classmethod
    def from_json(cls, doc):
        return cls(int(doc["degree"]), bool(doc["homogeneous"]), bool(doc["include_bias"]))


def expand_basis(x, cfg: BasisConfig) -> np.ndarray:
    """Polynomial expansion of a vector, or of each row of a matrix.

    Degree 2 products x_a*x_b (a <= b) come in lexicographic order; for the
    non-homogeneous variant the linear terms precede them.  The bias, when
    requested, is the last column.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    parts = []
    if cfg.degree == 1 or not cfg.homogeneous:
        parts.append(X)
    if cfg.degree == 2:
        a, b = np.triu_indices(X.shape[1])
        parts.append(X[:, a] * X[:, b])
    if cfg.include_bias:
        parts.append(np.ones((X.shape[0], 1)))
    out = np.hstack(parts) if parts else np.empty((X.shape[0], 0))
    return out[0] if single else out


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    fractions: tuple = field(default=(0.7, 0.15, 0.15))

    def to_json(self):
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "train": self.train_idx.tolist(),
            "val": self.val_idx.tolist(),
            "test": self.test_idx.tolist(),
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            _frozen(doc["train"], np.int64),
            _frozen(doc["val"], np.int64),
            _frozen(doc["test"], np.int64),
            int(doc["seed"]),
            tuple(doc["fractions"]),
        )


def make_split(n: int, fractions: Sequence[float] = (0.7, 0.15, 0.15), seed: int = 0) -> Split:
    if n < 3:
        raise ValueError("need at least 3 examples to split")
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError("fractions must be three positive numbers summing to 1")
    # largest-remainder rounding keeps every size within 1 of n*fraction
    raw = n * fr
    sizes = np.floor(raw + 1e-9).astype(int)
    short = n - sizes.sum()
    for j in sorted(range(3), key=lambda j: (-(raw[j] - sizes[j]), j))[:short]:
        sizes[j] += 1
    perm = np.random.default_rng(seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return Split(_frozen(perm[:a]), _frozen(perm[a:b]), _frozen(perm[b:]), int(seed), tuple(float(f) for f in fr))
