"""Command-line entry point: ``budget-tree <command> [flags]``.

Exit codes: 0 ok, 2 configuration/data error, 3 subset search found nothing,
4 model file mismatch, 5 LP solver failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import pipeline
from .errors import BudgetTreeError, ConfigError, ModelFormatError
from .model_io import atomic_write, dump_json, load_system, save_system
from .pipeline import RunConfig
from .diagnostics import risk_identities
from .policy import evaluate
from .risk import build_weights, product_risk, savings, surrogate_risk

log = logging.getLogger("budget_tree")

# flag dest -> RunConfig field
_CONFIG_FLAGS = ("data", "sensors", "label", "split", "seed", "alpha", "alpha_grid", "leaves", "basis_degree",
                 "homogeneous", "g_degree", "l2", "wmax", "candidate_budget", "subset_revisits", "lp_max_examples",
                 "solver", "savings_shift")


def _fractions(text):
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}; expected e.g. 0.7,0.15,0.15") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split needs three fractions")
    return parts


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON file of run-configuration keys; flags override it")
    g.add_argument("--data", help="CSV file with a header row")
    g.add_argument("--sensors", help="sensor JSON: {\"sensors\": [{\"name\", \"cost\", \"columns\"}]}")
    g.add_argument("--label", help="label column name (default: label)")
    g.add_argument("--split", type=_fractions, help="train,val,test fractions (default 0.7,0.15,0.15)")
    g.add_argument("--seed", type=int)
    g.add_argument("--alpha", type=float, help="cost trade-off (default 0.1)")
    g.add_argument("--alpha-grid", dest="alpha_grid", help="lo:hi:steps, log spaced")
    g.add_argument("--leaves", type=int, help="number of leaves K (default 4)")
    g.add_argument("--basis-degree", dest="basis_degree", type=int, choices=(1, 2))
    g.add_argument("--homogeneous", action="store_true", default=None,
                   help="drop the linear terms from degree-2 bases")
    g.add_argument("--g-degree", dest="g_degree", type=int, choices=(1, 2),
                   help="decision-function basis degree (default: --basis-degree)")
    g.add_argument("--l2", type=float)
    g.add_argument("--wmax", type=float, help="box bound on decision weights")
    g.add_argument("--candidate-budget", dest="candidate_budget", type=int,
                   help="only try this many of the cheapest sensors per search step")
    g.add_argument("--subset-revisits", dest="subset_revisits", type=int,
                   help="passes that regrow each subset with the others fixed (default 3; 0 = single forward pass)")
    g.add_argument("--lp-max-examples", dest="lp_max_examples", type=int,
                   help="subsample the training rows fed to the decision LP")
    g.add_argument("--solver", choices=("auto", "simplex", "highs"))
    g.add_argument("--savings-shift", dest="savings_shift", choices=("min", "none"),
                   help="min (default): drop each example's smallest saving before the LP; none: raw savings")
    g.add_argument("--fixed-tree", dest="fixed_tree", help="tree JSON (nested sensors/neg/pos) to use as is")
    g.add_argument("--subsets", help="subsets JSON (as written by the subsets command) to cluster as is")
    g.add_argument("--out", help="output path (stdout when omitted, except for train)")
    g.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="budget-tree", description="Learn and evaluate budgeted sensor trees.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("subsets", parents=[common], help="greedy sensor-subset search")
    sub.add_parser("tree", parents=[common], help="subset search plus tree clustering")
    t = sub.add_parser("train", parents=[common], help="train a full system and write a model file")
    t.add_argument("--dump-lp", dest="dump_lp", help="write the decision LP in a readable text form")
    e = sub.add_parser("eval", parents=[common], help="evaluate a model file")
    e.add_argument("--model", required=True)
    e.add_argument("--on", choices=("train", "val", "test", "all"), default="test")
    e.add_argument("--records", help="also write per-example JSON lines here")
    s = sub.add_parser("sweep", parents=[common], help="retrain over an alpha grid and write budget curves")
    s.add_argument("--baseline", choices=("myopic",))
    s.add_argument("--tau-grid", dest="tau_grid", default="0:1:0.1", help="start:stop:step for the myopic baseline")
    r = sub.add_parser("risk-check", parents=[common],
                       help="check the risk identities on random trees, optionally a model's risks too")
    r.add_argument("--model", help="also report empirical vs surrogate risk of this model")
    r.add_argument("--trees", type=int, default=200, help="number of random trees (default 200)")
    r.add_argument("--on", choices=("train", "val", "test", "all"), default="train")
    return p


def _read_json(path, what):
    if not os.path.exists(path):
        raise ConfigError(f"{what} file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def config_from_args(args) -> RunConfig:
    doc = _read_json(args.config, "config") if args.config else {}
    cfg = RunConfig.from_json(doc)
    for name in _CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is None:
            continue
        if name == "alpha_grid":
            v = pipeline.log_grid(v)
        setattr(cfg, name, v)
    if isinstance(cfg.alpha_grid, str):
        cfg.alpha_grid = pipeline.log_grid(cfg.alpha_grid)
    if getattr(args, "fixed_tree", None):
        cfg.fixed_tree = _read_json(args.fixed_tree, "fixed tree")
    if getattr(args, "subsets", None):
        doc = _read_json(args.subsets, "subsets")
        cfg.fixed_subsets = doc["subsets"] if isinstance(doc, dict) else doc
    return cfg.validate()


def _emit(args, text):
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_subsets(args, cfg):
    prep = pipeline.prepare(cfg)
    coll = pipeline.search_subsets(prep, cfg, cfg.alpha)
    _emit(args, dump_json(coll.to_json(prep.sensors)))


def cmd_tree(args, cfg):
    prep = pipeline.prepare(cfg)
    tree, coll = pipeline.build_tree(prep, cfg, cfg.alpha)
    doc = {"tree": tree.to_json(prep.sensors.names)}
    if coll is not None:
        doc["search"] = coll.to_json(prep.sensors)
    _emit(args, dump_json(doc))


def cmd_train(args, cfg):
    if not args.out:
        raise ConfigError("train needs --out for the model file")
    prep = pipeline.prepare(cfg)
    system, _ = pipeline.fit_system(prep, cfg, cfg.alpha, dump_lp=args.dump_lp)
    save_system(args.out, system, cfg.to_json(), prep.split, prep.dataset.classes)
    rec = evaluate(system, prep.train.examples, prep.train.labels)
    log.info("trained K=%d; train error %.4f, cost fraction %.4f", system.tree.K, rec.error, rec.cost_fraction)


def _model_data(args, doc):
    """Dataset rows for the requested part of the model's split, standardized with the model scaler."""
    from .data import Split, load_dataset

    stored = doc.get("config") or {}
    path = args.data or stored.get("data")
    label = args.label or stored.get("label", "label")
    if path is None:
        raise ConfigError("--data is required (the model does not name a data file)")
    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    ds = load_dataset(path, label)
    classes = doc.get("classes")
    labels = ds.labels
    if classes is not None:
        lookup = {c: i for i, c in enumerate(classes)}
        try:
            labels = np.array([lookup[ds.classes[l]] for l in ds.labels], dtype=np.int64)
        except KeyError as exc:
            raise ModelFormatError(f"label {exc.args[0]!r} was not seen when the model was trained") from None
    if ds.d != len(doc["scaler"]["mean"]):
        raise ModelFormatError(f"model expects {len(doc['scaler']['mean'])} feature columns, data has {ds.d}")
    if args.on == "all" or doc.get("split") is None:
        idx = np.arange(ds.n)
    else:
        split = Split.from_json(doc["split"])
        idx = {"train": split.train_idx, "val": split.val_idx, "test": split.test_idx}[args.on]
        if len(idx) and idx.max() >= ds.n:
            raise ModelFormatError("stored split does not fit this data file")
    return ds.examples[idx], labels[idx]


def cmd_eval(args, cfg):
    system, doc = load_system(args.model)
    X, y = _model_data(args, doc)
    rec = evaluate(system, system.scaler.transform(X), y)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["split", "alpha", "n", "error", "mean_cost", "cost_fraction"])
    w.writerow([args.on, repr(system.alpha), rec.n, repr(rec.error), repr(rec.mean_cost), repr(rec.cost_fraction)])
    _emit(args, buf.getvalue())
    if args.records:
        rbuf = io.StringIO()
        rec.write_jsonl(rbuf)
        atomic_write(args.records, rbuf.getvalue())


def cmd_sweep(args, cfg):
    alphas = cfg.alpha_grid or [cfg.alpha]
    prep = pipeline.prepare(cfg)
    curve = pipeline.sweep_alpha(prep, cfg, alphas)
    if args.baseline == "myopic":
        taus = pipeline.linear_grid(args.tau_grid)
        if taus[0] < 0 or taus[-1] > 1:
            raise ConfigError("tau grid must lie in [0, 1]")
        tree = pipeline.reference_tree(prep, cfg, alphas)
        base = pipeline.myopic_curve(prep, cfg, tree, taus)
        text = curve.to_csv(labeled=True) + base.to_csv(labeled=True)
    else:
        text = curve.to_csv()
    _emit(args, text)
    if curve.failures and not curve.points:
        raise BudgetTreeError(f"every alpha failed; first: {curve.failures[0][1]}")


def cmd_risk_check(args, cfg):
    counts = risk_identities(args.trees, cfg.seed)
    print(f"product == max form: {counts.equal}/{counts.sign_cases} sign cases on {counts.trees} trees", file=sys.stderr)
    print(f"surrogate >= max form: {counts.bound_ok}/{counts.bound_cases}", file=sys.stderr)
    out = {"identities": counts.to_json()}
    if args.model:
        system, doc = load_system(args.model)
        X, y = _model_data(args, doc)
        Xs = system.scaler.transform(X)
        m = {"K": system.tree.K, "n": int(len(y)), "alpha": system.alpha}
        if system.decisions is not None:
            sav = savings(system.leaf_models, system.tree, Xs, y, system.alpha, system.sensors.costs)
            weights = build_weights(system.tree, sav)
            g = system.g_values(Xs)
            emp = product_risk(system.tree, sav, g > 0)
            sur = surrogate_risk(system.tree, sav, weights, g)
            m.update(empirical_risk=float(np.mean(emp)), surrogate_risk=float(np.mean(sur)),
                     bound_holds=bool(np.all(emp <= sur + 1e-9)))
        m["evaluated_risk"] = evaluate(system, Xs, y).risk(system.alpha)
        m["lp_report"] = doc.get("lp_report")
        out["model"] = m
    _emit(args, dump_json(out))
    if not counts.passed:
        raise BudgetTreeError("risk identity check failed")


COMMANDS = {"subsets": cmd_subsets, "tree": cmd_tree, "train": cmd_train, "eval": cmd_eval,
            "sweep": cmd_sweep, "risk-check": cmd_risk_check}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        COMMANDS[args.command](args, cfg)
    except BudgetTreeError as exc:
        print(f"budget-tree {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"budget-tree {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
