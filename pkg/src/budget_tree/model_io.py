"""Self-describing JSON model files, versioned and written atomically."""

from __future__ import annotations

import json
import os
import tempfile

from .data import BasisConfig, Scaler, SensorSpec, Split
from .errors import ModelFormatError
from .logistic import LogisticModel
from .lp import DecisionFunctions, LPReport
from .policy import DecisionSystem
from .tree import TreeStructure

FORMAT = "budget-tree/1"


def atomic_write(path, text: str):
    """Write to a temp file in the target directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def system_to_json(system: DecisionSystem, config: dict | None = None, split: Split | None = None,
                   classes=None) -> dict:
    names = system.sensors.names
    return {
        "format": FORMAT,
        "config": config,
        "classes": list(classes) if classes is not None else None,
        "sensors": system.sensors.to_json(),
        "scaler": system.scaler.to_json(),
        "split": split.to_json() if split is not None else None,
        "alpha": system.alpha,
        "classifier_basis": system.classifier_basis.to_json(),
        "tree": system.tree.to_json(names),
        "leaf_models": [m.to_json() for m in system.leaf_models],
        "decisions": system.decisions.to_json() if system.decisions is not None else None,
        "lp_report": system.lp_report.to_json() if system.lp_report is not None else None,
    }


def system_from_json(doc) -> tuple:
    """Returns (DecisionSystem, raw document)."""
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        found = doc.get("format") if isinstance(doc, dict) else type(doc).__name__
        raise ModelFormatError(f"unsupported model format {found!r}; expected {FORMAT!r}")
    try:
        sensors = SensorSpec.from_json(doc["sensors"])
        tree = TreeStructure.from_json(doc["tree"], sensors.L, sensors.index)
        report = doc.get("lp_report")
        system = DecisionSystem(
            tree=tree,
            decisions=DecisionFunctions.from_json(doc["decisions"]) if doc["decisions"] is not None else None,
            leaf_models=[LogisticModel.from_json(m) for m in doc["leaf_models"]],
            scaler=Scaler.from_json(doc["scaler"]),
            sensors=sensors,
            alpha=float(doc["alpha"]),
            classifier_basis=BasisConfig.from_json(doc["classifier_basis"]),
            lp_report=LPReport(**report) if report else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    if len(system.leaf_models) != tree.K:
        raise ModelFormatError("leaf model count does not match the tree")
    if (system.decisions is None) != (tree.K == 1):
        raise ModelFormatError("decision functions do not match the tree")
    return system, doc


def save_system(path, system: DecisionSystem, config=None, split=None, classes=None):
    atomic_write(path, dump_json(system_to_json(system, config, split, classes)))


def load_system(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a JSON model file ({exc})") from None
    return system_from_json(doc)
