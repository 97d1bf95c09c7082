import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import boolean_instance, exhaustive_min_l1, hypercube
from wafs.classifier import Kernel, KernelModel, LinearModel, TrainConfig, train
from wafs.data import FeatureDomain, FeatureMask, synth_two_gaussians
from wafs.evasion import (L1, L2SQ, AttackSpec, ConstraintSet, EvasionError, SolverParams, attack_frontier,
                          budgeted_attack, closed_form_linear_l2, discrete_min_cost_evasion, distance,
                          distance_subgradient, min_cost_evasion, project_budget, write_trace)


def linear(w, b=0.0):
    w = np.asarray(w, dtype=float)
    return LinearModel(w, float(b), FeatureMask.full(w.size))


def boolean_cons(d, monotone=False):
    return ConstraintSet.from_domains([FeatureDomain.boolean()] * d, monotone)


# ----------------------------------------------------------------- distances


def test_distance_examples():
    assert distance(L1, [1, 2], [1, 2]) == 0
    assert distance(L1, [1, 1, 0], [0, 1, 1]) == 2
    assert distance(L2SQ, [0, 0], [3, 4]) == 25
    np.testing.assert_array_equal(distance_subgradient(L2SQ, [1, 1], [0, 0]), [2, 2])
    np.testing.assert_array_equal(distance_subgradient(L1, [3, 3], [3, 3]), [0, 0])
    np.testing.assert_array_equal(distance_subgradient(L1, [2, -1], [0, 0]), [1, -1])
    with pytest.raises(ValueError):
        distance("linf", [0], [1])
    with pytest.raises(ValueError):
        distance(L1, [0, 1], [1])


# --------------------------------------------------------------- closed form


def test_closed_form_examples():
    m = linear([3, 4])
    xs = closed_form_linear_l2(m, [3.0, 4.0], overshoot=1e-15)
    np.testing.assert_allclose(xs, [0, 0], atol=1e-12)
    assert np.sqrt(distance(L2SQ, xs, [3, 4])) == pytest.approx(5.0)
    xs = closed_form_linear_l2(linear([1, 0], -0.5), [1.0, 0.0], overshoot=0.01)
    np.testing.assert_allclose(xs, [0.49, 0.0], atol=1e-12)
    assert linear([1, 0], -0.5).decision_function(xs) == pytest.approx(-0.01)
    with pytest.raises(EvasionError):
        closed_form_linear_l2(m, [-1.0, 0.0])


# -------------------------------------------------------- continuous solver


def test_min_cost_matches_closed_form_on_linear():
    rng = np.random.default_rng(0)
    for _ in range(10):
        w = rng.normal(size=3)
        m = linear(w, rng.normal())
        x = rng.normal(size=3)
        if m.decision_function(x) < 0:
            x = x + 2 * abs(m.decision_function(x)) * w / (w @ w) + w / (w @ w)
        res = min_cost_evasion(m, x, L2SQ, params=SolverParams(step_size=0.05))
        want = distance(L2SQ, closed_form_linear_l2(m, x), x)
        assert res.evaded and res.g_value < 0
        assert res.cost == pytest.approx(want, rel=1e-3)


def test_min_cost_rejects_legitimate_sample():
    with pytest.raises(EvasionError):
        min_cost_evasion(linear([1.0]), [-1.0])


def test_rbf_flat_region_may_fail_without_pool():
    # one malicious bump far from x: the gradient at x is numerically zero
    far = KernelModel(np.array([[0.0, 0.0], [30.0, 30.0]]), np.array([1.0, -1.0]), 0.5, Kernel("rbf", 1.0),
                      FeatureMask.full(2))
    x = np.array([0.0, 0.0])
    assert far.decision_function(x) > 0
    res = min_cost_evasion(far, x, L2SQ, params=SolverParams(max_iters=50))
    assert not res.evaded and res.g_value >= 0
    pool = np.array([[30.0, 30.0]])
    res2 = min_cost_evasion(far, x, L2SQ, params=SolverParams(max_iters=50), neighbors=pool)
    assert res2.evaded and res2.init_used == "nearest-legitimate"


def test_result_invariants_with_constraints():
    ds = synth_two_gaussians(40, 3, 2.0, 1)
    m = train(ds, TrainConfig(kernel=Kernel("rbf", 0.5)))
    cons = ConstraintSet.from_domains(ds.domains, monotone_increase=True)
    legit = ds.features[ds.labels == -1]
    for x in ds.features[(ds.labels == 1) & (m.decision_function(ds.features) >= 0)][:8]:
        res = min_cost_evasion(m, x, L2SQ, cons, SolverParams(step_size=0.05), neighbors=legit)
        assert cons.is_feasible(res.x_star, x)
        assert res.cost == pytest.approx(distance(L2SQ, res.x_star, x), abs=1e-12)
        if res.evaded:
            assert m.decision_function(res.x_star) < 0


def test_two_starts_never_worse_than_either():
    ds = synth_two_gaussians(40, 2, 1.5, 3)
    m = train(ds, TrainConfig(kernel=Kernel("rbf", 1.0)))
    legit = ds.features[m.decision_function(ds.features) < 0]
    params = SolverParams(step_size=0.05)
    for x in ds.features[(ds.labels == 1) & (m.decision_function(ds.features) >= 0)][:6]:
        both = min_cost_evasion(m, x, L2SQ, None, params, neighbors=legit)
        alone = min_cost_evasion(m, x, L2SQ, None, params)
        if alone.evaded:
            assert both.cost <= alone.cost + 1e-12


def test_trace_export(tmp_path):
    res = min_cost_evasion(linear([1.0, 1.0]), [1.0, 1.0], record=True)
    write_trace(res, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,cost,g,phase"
    assert len(lines) == len(res.trajectory) + 1


# ---------------------------------------------------------- discrete solver


def test_discrete_worked_example():
    m = linear([1, 2], -2)
    res = discrete_min_cost_evasion(m, [1.0, 1.0], L1, boolean_cons(2))
    np.testing.assert_array_equal(res.x_star, [1, 0])
    assert res.cost == 1 and res.g_value == -1 and res.evaded
    g = m.decision_function(hypercube(2))
    assert exhaustive_min_l1(m, np.array([1.0, 1.0]), hypercube(2), g) == 1


def test_discrete_monotone_infeasible():
    m = linear([1, 1], -0.5)
    res = discrete_min_cost_evasion(m, [1.0, 1.0], L1, boolean_cons(2, monotone=True))
    assert not res.evaded
    np.testing.assert_array_equal(res.x_star, [1, 1])


def test_discrete_requires_grid():
    with pytest.raises(EvasionError):
        discrete_min_cost_evasion(linear([1.0]), [1.0], L1, ConstraintSet.unbounded(1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8), st.booleans())
def test_discrete_never_below_exhaustive(seed, d, rbf):
    rng = np.random.default_rng(seed)
    ds, m = boolean_instance(rng, d, n=40, rbf=rbf)
    cube = hypercube(d)
    g_cube = m.decision_function(cube)
    cons = boolean_cons(d)
    for x in ds.features[m.decision_function(ds.features) >= 0][:5]:
        res = discrete_min_cost_evasion(m, x, L1, cons)
        assert cons.is_feasible(res.x_star, x)
        if res.evaded:
            assert m.decision_function(res.x_star) < 0
            assert res.cost >= exhaustive_min_l1(m, x, cube, g_cube)


# --------------------------------------------------------- budgeted attack


def test_budget_zero_is_identity():
    m = linear([1.0, -2.0], 0.3)
    x = np.array([0.4, -0.2])
    for kind in (L1, L2SQ):
        res = budgeted_attack(m, x, kind, c_max=0.0)
        np.testing.assert_array_equal(res.x_star, x)
        assert res.g_value == m.decision_function(x)


@pytest.mark.parametrize("b", [0.1, 0.5, 1.3])
def test_linear_l2_budget_descends_by_b_norm_w(b):
    w = np.array([1.0, -2.0, 0.5])
    m = linear(w, 0.7)
    x = np.array([0.2, 0.1, -0.3])
    res = budgeted_attack(m, x, L2SQ, params=SolverParams(step_size=0.05), c_max=b)
    assert res.g_value == pytest.approx(m.decision_function(x) - b * np.linalg.norm(w), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 10), st.integers(1, 6))
def test_boolean_linear_l1_budget_is_greedy_optimal(seed, d, k):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    m = linear(w, 0.0)
    x = (rng.random(d) < 0.5).astype(float)
    res = budgeted_attack(m, x, L1, boolean_cons(d), SolverParams(top_k=d), c_max=float(k))
    gains = np.sort(np.where(x == 1, np.maximum(w, 0), np.maximum(-w, 0)))[::-1]
    assert res.g_value == pytest.approx(m.decision_function(x) - gains[:k].sum(), abs=1e-12)
    # enumeration oracle over the Hamming ball
    best = min(m.decision_function(np.where(np.isin(np.arange(d), list(flip)), 1 - x, x))
               for r in range(min(k, d) + 1) for flip in itertools.combinations(range(d), r))
    assert res.g_value == pytest.approx(best, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([L1, L2SQ]), st.booleans())
def test_project_budget_properties(seed, kind, monotone):
    rng = np.random.default_rng(seed)
    d = 4
    x = rng.uniform(0, 1, d)
    z = x + rng.normal(scale=2.0, size=d)
    cons = ConstraintSet(np.zeros(d), np.ones(d), monotone)
    c = float(rng.uniform(0.05, 1.0))
    p = project_budget(z, x, kind, c, cons)
    nat = np.abs(p - x).sum() if kind == L1 else np.linalg.norm(p - x)
    assert nat <= c + 1e-12
    assert cons.is_feasible(p, x)
    # projection is at least as close to z as random feasible points in the set
    for _ in range(50):
        q = cons.project(x + rng.normal(scale=0.5, size=d), x)
        dq = q - x
        nq = np.abs(dq).sum() if kind == L1 else np.linalg.norm(dq)
        if nq > c:
            q = x + dq * (c / nq)
        assert np.linalg.norm(p - z) <= np.linalg.norm(q - z) + 1e-9


def test_frontier_monotone_and_within_budget():
    ds = synth_two_gaussians(40, 3, 2.0, 4)
    m = train(ds, TrainConfig(kernel=Kernel("rbf", 0.5)))
    cons = ConstraintSet.from_domains(ds.domains)
    budgets = np.linspace(0, 2, 11)
    for x in ds.features[ds.labels == 1][:5]:
        for kind in (L1, L2SQ):
            pts, g = attack_frontier(m, x, kind, cons, SolverParams(step_size=0.05), budgets)
            assert g[0] == m.decision_function(x)
            assert np.all(np.diff(g) <= 0)
            np.testing.assert_allclose(m.decision_function(pts), g, rtol=0, atol=1e-12)
            for p, b in zip(pts, budgets):
                nat = np.abs(p - x).sum() if kind == L1 else np.linalg.norm(p - x)
                assert nat <= b + 1e-9 and cons.is_feasible(p, x)


def test_frontier_rejects_bad_budgets():
    with pytest.raises(EvasionError):
        attack_frontier(linear([1.0]), [1.0], L1, None, None, [1.0, 0.5])


def test_attack_spec_json_round_trip():
    spec = AttackSpec(L2SQ, SolverParams(step_size=0.2, top_k=3), True)
    assert AttackSpec.from_json(spec.to_json()) == spec
