import csv

import numpy as np
import pytest
from scipy.integrate import trapezoid

from wafs.classifier import Kernel, TrainConfig, TrainingError, train
from wafs.data import Dataset, FeatureDomain, FeatureMask, synth_robust_fragile, synth_two_gaussians
from wafs.evasion import L1, L2SQ, AttackSpec, SolverParams, attack_frontier
from wafs.metrics import calibrate_threshold, tp_at_fp
from wafs.selection import SelectionConfig
from wafs.seceval import (CURVE_COLUMNS, LIMITED, PERFECT, AttackScenario, compare_selectors, security_curve_repeat,
                          security_evaluation, split_repeat, train_surrogate, write_curves_csv)


def wide_gaussians(n_per_class, d, sep, seed):
    """Gaussian data with a box far wider than the samples, so attacks are unconstrained."""
    ds = synth_two_gaussians(n_per_class, d, sep, seed)
    return Dataset(ds.features, ds.labels, tuple(FeatureDomain.continuous(-1e3, 1e3) for _ in range(d)))


L2_FAST = AttackSpec(L2SQ, SolverParams(step_size=0.05))


def test_scenario_validation():
    assert AttackScenario("pk").knowledge == PERFECT
    assert AttackScenario("LK").knowledge == LIMITED
    with pytest.raises(ValueError):
        AttackScenario("xk")
    with pytest.raises(ValueError):
        AttackScenario(budgets=(1.0, 0.5))
    with pytest.raises(ValueError):
        AttackScenario(budgets=(-1.0,))


def test_split_partitions_and_sizes():
    ds = synth_two_gaussians(100, 2, 1.0, 0)
    test, surr, tr = split_repeat(ds, AttackScenario(), seed=3, repeat=0)
    assert sorted(np.concatenate([test, surr, tr]).tolist()) == list(range(200))
    assert test.size == 100
    assert abs(surr.size - 0.2 * tr.size) <= 2
    again = split_repeat(ds, AttackScenario(), seed=3, repeat=0)
    assert all(np.array_equal(a, b) for a, b in zip((test, surr, tr), again))
    other = split_repeat(ds, AttackScenario(), seed=3, repeat=1)
    assert not np.array_equal(test, other[0])


def test_budget_zero_equals_unattacked_and_curve_monotone():
    ds = synth_two_gaussians(100, 3, 2.0, 1)
    model = train(ds, TrainConfig(kernel=Kernel("rbf", 0.5)))
    sc = AttackScenario(budgets=tuple(np.linspace(0, 2, 9)), attack=L2_FAST)
    res = security_curve_repeat(model, model, ds, sc)
    assert res.tp[0] == res.unattacked_tp
    assert res.unattacked_tp == tp_at_fp(model, ds, calibrate_threshold(model, ds, 0.01))
    assert np.all(np.diff(res.tp) <= 0)
    assert res.violations == 0


def test_linear_l2_reaches_zero_at_analytic_budget():
    ds = wide_gaussians(100, 3, 2.0, 2)
    model = train(ds, TrainConfig())
    tau = calibrate_threshold(model, ds, 0.01).threshold
    mal = ds.features[ds.labels == 1]
    b_star = float(np.max(model.decision_function(mal) - tau) / np.linalg.norm(model.weights)) + 1e-3
    sc = AttackScenario(budgets=(0.0, 0.5 * b_star, b_star), attack=L2_FAST)
    res = security_curve_repeat(model, model, ds, sc)
    assert res.tp[-1] == 0.0 and res.tp[1] > 0.0


def test_pk_points_score_identically_under_attacker_and_true_model():
    ds = synth_two_gaussians(100, 2, 2.0, 4)
    model = train(ds, TrainConfig(kernel=Kernel("rbf", 1.0)))
    sc = AttackScenario(budgets=(0.0, 0.5, 1.0), attack=L2_FAST)
    res, pts = security_curve_repeat(model, model, ds, sc, keep_points=True)
    mal = ds.features[ds.labels == 1]
    for P, x in zip(pts[:5], mal[:5]):
        _, g_attacker = attack_frontier(model, x, L2SQ, L2_FAST.constraints(ds.domains), L2_FAST.params,
                                        sc.budgets)
        np.testing.assert_allclose(model.decision_function(P), g_attacker, rtol=0, atol=1e-12)
    scores = model.decision_function(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    np.testing.assert_array_equal(np.mean(scores - res.threshold >= 0, axis=0), res.tp)


def test_attacked_points_respect_budget_and_box():
    ds = synth_robust_fragile(60, d=5, n_fragile=2, seed=1)
    model = train(ds, TrainConfig())
    sc = AttackScenario(budgets=(0.0, 0.3, 0.6, 1.0, 2.0), attack=AttackSpec(L1), fp_rate=0.05)
    res, pts = security_curve_repeat(model, model, ds, sc, keep_points=True)
    mal = ds.features[ds.labels == 1]
    for P, x in zip(pts, mal):
        for p, b in zip(P, sc.budgets):
            assert np.abs(p - x).sum() <= b + 1e-9
            assert np.all(np.isin(np.round(p * 10), np.arange(11)))
    assert res.violations == 0 and np.all(np.diff(res.tp) <= 0)


def test_monotone_attacks_never_decrease_features():
    ds = synth_robust_fragile(60, d=4, n_fragile=1, seed=2)
    model = train(ds, TrainConfig())
    sc = AttackScenario(budgets=(0.0, 1.0), attack=AttackSpec(L1, monotone_increase=True), fp_rate=0.05)
    _, pts = security_curve_repeat(model, model, ds, sc, keep_points=True)
    mal = ds.features[ds.labels == 1]
    assert np.all(pts >= mal[:, None, :] - 1e-12)


def test_surrogate_on_training_data_reproduces_pk():
    ds = synth_two_gaussians(100, 2, 1.5, 5)
    mask = FeatureMask.full(2)
    model = train(ds, TrainConfig())
    surrogate = train_surrogate(ds, mask)
    sc = AttackScenario(budgets=(0.0, 0.5, 1.0), attack=L2_FAST)
    pk = security_curve_repeat(model, model, ds, sc)
    lk = security_curve_repeat(model, surrogate, ds, sc)
    np.testing.assert_array_equal(pk.tp, lk.tp)


def test_surrogate_needs_both_classes():
    ds = synth_two_gaussians(10, 2, 1.0, 0)
    legit_only = ds.subset(np.flatnonzero(ds.labels == -1))
    with pytest.raises(TrainingError):
        train_surrogate(legit_only, FeatureMask.full(2))


def test_tiny_surrogate_degrades_more_slowly():
    ds = synth_two_gaussians(150, 4, 1.5, 6)
    budgets = tuple(np.linspace(0, 2, 9))
    pk = AttackScenario("pk", budgets, fp_rate=0.02, attack=L2_FAST)
    lk = AttackScenario("lk", budgets, fp_rate=0.02, attack=L2_FAST, surrogate_size=4)
    curves = security_evaluation(ds, FeatureMask.full(4), [pk, lk], seed=1, repeats=3)
    auc = [trapezoid(c.tp_mean, c.budgets) for c in curves]
    assert auc[1] >= auc[0]


def test_curves_csv(tmp_path):
    ds = synth_two_gaussians(100, 2, 2.0, 0)
    sc = AttackScenario("pk", (0.0, 1.0), fp_rate=0.02, attack=L2_FAST)
    curves = security_evaluation(ds, FeatureMask.full(2), [sc], seed=0, repeats=2)
    write_curves_csv(curves, tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == CURVE_COLUMNS and len(rows) == 3
    assert rows[1][0] == "pk" and rows[1][4] == "2"


def test_security_evaluation_is_deterministic_and_parallel_safe():
    ds = synth_two_gaussians(100, 2, 2.0, 3)
    sc = [AttackScenario(k, (0.0, 0.5, 1.0), fp_rate=0.02, attack=L2_FAST) for k in ("pk", "lk")]
    a = security_evaluation(ds, FeatureMask.full(2), sc, seed=9, repeats=2)
    b = security_evaluation(ds, FeatureMask.full(2), sc, seed=9, repeats=2, jobs=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.tp_matrix, y.tp_matrix)


def test_compare_with_lambda_zero_has_identical_arms():
    ds = synth_robust_fragile(60, d=5, n_fragile=2, noise=0.3, seed=0)
    cfg = SelectionConfig(m=2, lam=0.0, attack=AttackSpec(L1), folds=3)
    sc = [AttackScenario("pk", (0.0, 0.5, 1.0), fp_rate=0.05, attack=AttackSpec(L1))]
    comp = compare_selectors(ds, cfg, sc, seed=2, repeats=2)
    arms = comp.report["arms"]
    assert arms["wafs"]["masks"] == arms["traditional"]["masks"]
    assert arms["wafs"]["curves"] == arms["traditional"]["curves"]
    assert comp.report["paired"]["auc_perfect"]["mean_difference"] == 0.0
