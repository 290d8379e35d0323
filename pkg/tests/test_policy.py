import numpy as np
import pytest

from budget_tree.pipeline import RunConfig, fit_system, prepare_arrays
from budget_tree.policy import (BudgetCurve, CurvePoint, MyopicPolicy, acquired_cost, dominates, evaluate,
                                read_curves)
from budget_tree.risk import build_weights, product_risk, savings

from oracles import planted_two_sensor


@pytest.fixture(scope="module")
def planted():
    ds, sensors = planted_two_sensor(1200, 0)
    cfg = RunConfig(fixed_subsets=[["s1"], ["s1", "s2"]], alpha=0.02)
    prep = prepare_arrays(ds, sensors, cfg)
    system, _ = fit_system(prep, cfg, cfg.alpha)
    return prep, cfg, system


def test_single_leaf_pays_for_everything():
    ds, sensors = planted_two_sensor(400, 1)
    cfg = RunConfig(fixed_subsets=[["s1", "s2"]])
    prep = prepare_arrays(ds, sensors, cfg)
    system, _ = fit_system(prep, cfg, 0.05)
    assert system.decisions is None
    rec = evaluate(system, prep.test.examples, prep.test.labels)
    assert rec.cost_fraction == 1.0
    assert np.all(rec.leaf == 0)


def test_planted_routing_saves_cost(planted):
    prep, _, system = planted
    rec = evaluate(system, prep.test.examples, prep.test.labels)
    assert rec.cost_fraction < 0.5
    assert 1 - rec.error >= 0.98
    assert set(np.unique(rec.leaf)) == {0, 1}


def test_acquired_cost_of_leaves(planted):
    _, _, system = planted
    costs = sorted(acquired_cost(system.tree, system.sensors, k) for k in range(system.tree.K))
    assert costs == [1.0, 5.0]


def test_evaluator_risk_matches_product_risk(planted):
    prep, _, system = planted
    X, y = prep.test.examples, prep.test.labels
    rec = evaluate(system, X, y)
    sav = savings(system.leaf_models, system.tree, X, y, system.alpha, system.sensors.costs)
    signs = system.g_values(X) > 0
    exact = product_risk(system.tree, sav, signs)
    assert rec.risk(system.alpha) == pytest.approx(float(np.mean(exact)), abs=1e-12)


def test_evaluation_is_row_order_invariant(planted):
    prep, _, system = planted
    X, y = prep.test.examples, prep.test.labels
    perm = np.random.default_rng(0).permutation(len(y))
    a = evaluate(system, X, y)
    b = evaluate(system, X[perm], y[perm])
    np.testing.assert_array_equal(a.leaf[perm], b.leaf)
    assert a.error == b.error and a.mean_cost == b.mean_cost


def test_myopic_extremes_and_monotone_cost(planted):
    prep, cfg, system = planted
    pol = MyopicPolicy.train(system.tree, system.leaf_models, prep.train, prep.sensors, cfg.classifier_basis())
    X, y = prep.test.examples, prep.test.labels
    cheap = int(np.argmin(pol.leaf_cost))
    rec0 = pol.evaluate(X, y, 0.0)
    assert np.all(rec0.leaf == cheap)
    rec1 = pol.evaluate(X, y, 1.0 + 1e-9)
    assert rec1.cost_fraction == 1.0
    costs = [rec.mean_cost for _, rec in pol.curve(X, y, np.linspace(0, 1, 11))]
    assert all(b >= a - 1e-12 for a, b in zip(costs, costs[1:]))


def test_curve_csv_round_trip():
    lp = BudgetCurve("lp", "alpha", [CurvePoint(0.1, 2.0, 0.4, 0.1), CurvePoint(0.01, 1.0, 0.2, 0.2)])
    lp.failures.append((1.0, "AllSubsetsEmpty: nothing"))
    my = BudgetCurve("myopic", "tau", [CurvePoint(0.5, 3.0, 0.6, 0.15)])
    text = lp.to_csv(labeled=True) + my.to_csv(labeled=True)
    back = read_curves(text)
    assert [c.label for c in back] == ["lp", "myopic"]
    assert [p.mean_cost for p in back[0].points] == [1.0, 2.0]
    assert back[1].param_name == "tau" and back[1].points[0].error == 0.15
    plain = read_curves(lp.to_csv())
    assert len(plain) == 1 and plain[0].param_name == "alpha"


def test_dominates_with_slack():
    lp = BudgetCurve("lp", "alpha", [CurvePoint(0.1, 1.2, 0.24, 0.05)])
    ok = BudgetCurve("myopic", "tau", [CurvePoint(0.5, 1.0, 0.2, 0.05)])
    bad = BudgetCurve("myopic", "tau", [CurvePoint(0.5, 0.5, 0.1, 0.05)])
    assert dominates(lp, ok, 5.0) == []
    assert len(dominates(lp, bad, 5.0)) == 1
