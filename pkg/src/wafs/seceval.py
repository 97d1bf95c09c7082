"""Security evaluation curves under perfect- and limited-knowledge attacks.

For an ascending list of budgets, every malicious test sample is attacked
with a budgeted descent on the attacker's discriminant (the deployed model
itself for perfect knowledge, a surrogate for limited knowledge) and the
attacked points are scored by the deployed model at its calibrated
operating point.  One descent per sample serves the whole budget sweep.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Sequence

import numpy as np
from scipy import stats

from ._parallel import ordered_map
from ._rng import derive_seed
from .classifier import ConvergenceWarning, TrainConfig, TrainingError, grid_search, train
from .data import Dataset, FeatureMask, apply_mask, stratified_folds, stratified_split
from .evasion import AttackSpec, EvasionError, _natural_rows, attack_frontier
from .metrics import calibrate_threshold, hardness_of_evasion, model_view, tp_at_fp
from .selection import SelectionConfig, traditional_wrapper, wafs

PERFECT = "perfect"
LIMITED = "limited"
KNOWLEDGE_ALIASES = {"pk": PERFECT, "perfect": PERFECT, "lk": LIMITED, "limited": LIMITED}


@dataclass(frozen=True)
class AttackScenario:
    """Attacker model and budget sweep.

    ``surrogate_size`` is the number of surrogate samples for limited
    knowledge (None: 20% of the training part).  ``test_fraction`` is the
    share of each class held out for testing in every repeat.
    """

    knowledge: str = PERFECT
    budgets: tuple = (0.0,)
    fp_rate: float = 0.01
    attack: AttackSpec = field(default_factory=AttackSpec)
    surrogate_size: int | None = None
    surrogate_seed: int = 0
    repeats: int = 1
    test_fraction: float = 0.5

    def __post_init__(self):
        knowledge = KNOWLEDGE_ALIASES.get(str(self.knowledge).lower())
        if knowledge is None:
            raise ValueError(f"unknown knowledge {self.knowledge!r}")
        object.__setattr__(self, "knowledge", knowledge)
        b = tuple(float(v) for v in self.budgets)
        if not b or b[0] < 0 or any(y < x for x, y in zip(b, b[1:])):
            raise ValueError("budgets must be non-empty, ascending and start at >= 0")
        object.__setattr__(self, "budgets", b)
        if self.repeats < 1 or not 0 < self.test_fraction < 1:
            raise ValueError("repeats must be >= 1 and test_fraction in (0, 1)")

    def to_json(self) -> dict:
        return {"knowledge": self.knowledge, "budgets": list(self.budgets), "fp_rate": self.fp_rate,
                "attack": self.attack.to_json(), "surrogate_size": self.surrogate_size,
                "surrogate_seed": self.surrogate_seed, "repeats": self.repeats,
                "test_fraction": self.test_fraction}


@dataclass
class RepeatResult:
    """One repeat of one scenario: TP per budget plus bookkeeping."""

    tp: np.ndarray
    unattacked_tp: float
    threshold: float
    errors: int
    n_malicious: int
    violations: int = 0

    @property
    def degraded(self) -> bool:
        return self.errors > 0.1 * self.n_malicious


@dataclass
class SecurityCurve:
    scenario: AttackScenario
    mask: FeatureMask | None = None
    repeats: list = field(default_factory=list)
    model_descriptor: dict = field(default_factory=dict)

    @property
    def budgets(self) -> np.ndarray:
        return np.array(self.scenario.budgets)

    @property
    def tp_matrix(self) -> np.ndarray:
        return np.array([r.tp for r in self.repeats])

    @property
    def tp_mean(self) -> np.ndarray:
        return self.tp_matrix.mean(0)

    @property
    def tp_std(self) -> np.ndarray:
        return self.tp_matrix.std(0)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [(float(b), float(m), float(s)) for b, m, s in zip(self.budgets, self.tp_mean, self.tp_std)]

    def rows(self) -> list[list]:
        k = "pk" if self.scenario.knowledge == PERFECT else "lk"
        return [[k, repr(b), repr(m), repr(s), len(self.repeats)] for b, m, s in self.points]

    def to_json(self) -> dict:
        return {"knowledge": self.scenario.knowledge, "budgets": self.budgets.tolist(),
                "tp_mean": self.tp_mean.tolist(), "tp_std": self.tp_std.tolist(),
                "tp_per_repeat": self.tp_matrix.tolist(),
                "mask": None if self.mask is None else self.mask.to_list(),
                "degraded_repeats": [i for i, r in enumerate(self.repeats) if r.degraded],
                "constraint_violations": int(sum(r.violations for r in self.repeats)),
                "model": self.model_descriptor}


CURVE_COLUMNS = ["knowledge", "budget", "tp_mean", "tp_std", "n_repeats"]


def write_curves_csv(curves: Sequence[SecurityCurve], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for c in curves:
            w.writerows(c.rows())


def _fit(ds: Dataset, grid: Sequence[TrainConfig], mask: FeatureMask, seed: int, inner_folds: int = 5):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        cfg = grid[0] if len(grid) == 1 else grid_search(
            ds, list(grid), stratified_folds(ds, inner_folds, derive_seed(seed, "grid")))
        return train(ds, cfg, mask)


def train_surrogate(surrogate_ds: Dataset, mask: FeatureMask, grid: Sequence[TrainConfig] = (TrainConfig(),),
                    seed: int = 0, inner_folds: int = 5):
    """Attacker-side model: same learner and feature subset, surrogate data."""
    counts = [int(np.sum(surrogate_ds.labels == c)) for c in (-1, 1)]
    if min(counts) == 0:
        raise TrainingError("surrogate data must contain both classes")
    view = apply_mask(surrogate_ds, mask) if surrogate_ds.d == mask.d else surrogate_ds
    folds = min(inner_folds, *counts)
    if len(grid) > 1 and folds < 2:
        grid = grid[:1]
    return _fit(view, grid, mask, seed, max(folds, 2))


def _frontier_one(x, attacker, spec, cons, budgets):
    try:
        pts, _ = attack_frontier(attacker, x, spec.kind, cons, spec.params, budgets)
        return pts, None
    except (EvasionError, FloatingPointError) as exc:
        return np.repeat(x[None, :], len(budgets), axis=0), str(exc)


def security_curve_repeat(true_model, attacker_model, test_ds: Dataset, scenario: AttackScenario,
                          jobs: int = 1, keep_points: bool = False):
    """TP per budget for one trained model pair on one test set.

    The operating threshold is calibrated once on the legitimate test
    samples.  Returns a :class:`RepeatResult` (and the attacked points,
    ``n_malicious x budgets x d``, when ``keep_points``).
    """
    view = model_view(true_model, test_ds)
    op = calibrate_threshold(true_model, view, scenario.fp_rate)
    X = view.features[view.labels == 1]
    if len(X) == 0:
        raise ValueError("no malicious test samples")
    spec = scenario.attack
    cons = spec.constraints(view.domains)
    budgets = np.array(scenario.budgets)
    rows = ordered_map(partial(_frontier_one, attacker=attacker_model, spec=spec, cons=cons, budgets=budgets),
                       list(X), jobs)
    pts = np.array([r[0] for r in rows])  # (n_mal, B, d)
    errors = sum(r[1] is not None for r in rows)
    scores = true_model.decision_function(pts.reshape(-1, X.shape[1])).reshape(len(X), len(budgets))
    tp = np.mean(scores - op.threshold >= 0, axis=0)
    # independent re-check of the budget and the feasible region
    spent = np.array([_natural_rows(spec.kind, p - x) for p, x in zip(pts, X)])
    violations = int(np.sum(spent > budgets[None, :] * (1 + 1e-9) + 1e-12))
    violations += sum(not cons.is_feasible(p, x, 1e-12) for P, x in zip(pts, X) for p in P)
    res = RepeatResult(tp, tp_at_fp(true_model, view, op), op.threshold, errors, len(X), violations)
    return (res, pts) if keep_points else res


def split_repeat(ds: Dataset, scenario: AttackScenario, seed: int, repeat: int):
    """Stratified (test, surrogate, train) index arrays for one repeat."""
    s = derive_seed(seed, f"split-{repeat}")
    n_rest = ds.n * (1 - scenario.test_fraction)
    surr = scenario.surrogate_size
    frac_s = (surr / ds.n) if surr is not None else 0.2 / 1.2 * n_rest / ds.n
    test, surrogate, tr = stratified_split(ds, [scenario.test_fraction, frac_s], s)
    return test, surrogate, tr


@dataclass
class ArmResult:
    """Per-repeat artefacts of one selection arm."""

    masks: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    G: list = field(default_factory=list)
    S: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)


def _attacker(scenario, model, ds, surrogate_idx, mask, grid, seed, repeat):
    if scenario.knowledge == PERFECT:
        return model
    s = derive_seed(seed, f"surrogate-{scenario.surrogate_seed}-{repeat}")
    return train_surrogate(ds.subset(surrogate_idx), mask, grid, s)


def security_evaluation(ds: Dataset, mask: FeatureMask, scenarios: Sequence[AttackScenario],
                        grid: Sequence[TrainConfig] = (TrainConfig(),), seed: int = 0,
                        repeats: int | None = None, jobs: int = 1) -> list[SecurityCurve]:
    """Curves for a fixed feature subset, re-drawing the split every repeat.

    All scenarios share the splits and the deployed model of each repeat, so
    their curves are paired.
    """
    repeats = repeats or max(s.repeats for s in scenarios)
    curves = [SecurityCurve(s, mask) for s in scenarios]
    for r in range(repeats):
        test, surr, tr = split_repeat(ds, scenarios[0], seed, r)
        model = _fit(apply_mask(ds.subset(tr), mask), grid, mask, derive_seed(seed, f"trainer-{r}"))
        test_ds = ds.subset(test)
        for c, sc in zip(curves, scenarios):
            attacker = _attacker(sc, model, ds, surr, mask, grid, seed, r)
            c.repeats.append(security_curve_repeat(model, attacker, test_ds, sc, jobs))
            c.model_descriptor = {"kind": type(model).__name__, "train_config":
                                  model.train_config.to_json() if model.train_config else None}
    return curves


def _auc(budgets: np.ndarray, tp: np.ndarray) -> float:
    if budgets.size < 2:
        return float(tp[0])
    return float(np.sum(np.diff(budgets) * (tp[1:] + tp[:-1]) / 2))


def _paired(a, b) -> dict:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    diff = (a - b).tolist()
    out = {"wafs": a.tolist(), "traditional": b.tolist(), "differences": diff,
           "mean_difference": float(np.mean(diff)), "t_statistic": float("nan"), "p_value": float("nan")}
    if a.size >= 2 and np.any(a != b):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t = stats.ttest_rel(a, b)
        out["t_statistic"], out["p_value"] = float(t.statistic), float(t.pvalue)
    return out


@dataclass
class Comparison:
    """JSON-ready ``report`` plus the curve and trace objects per arm."""

    report: dict
    curves: dict
    traces: dict


def compare_selectors(ds: Dataset, sel_cfg: SelectionConfig, scenarios: Sequence[AttackScenario],
                      seed: int = 0, repeats: int | None = None, jobs: int = 1) -> Comparison:
    """Paired comparison of adversarial and traditional selection.

    Every repeat draws one (test, surrogate, train) split, runs both
    selectors on the training part with identical folds, trains each arm's
    final model, measures its test ``G`` and ``S`` at the operating point
    and sweeps the attack scenarios.
    """
    repeats = repeats or max(s.repeats for s in scenarios)
    fp_rate = scenarios[0].fp_rate
    spec = scenarios[0].attack
    arms = {"wafs": ArmResult(), "traditional": ArmResult()}
    for arm in arms.values():
        arm.curves = {s.knowledge: SecurityCurve(s) for s in scenarios}
    for r in range(repeats):
        test, surr, tr = split_repeat(ds, scenarios[0], seed, r)
        train_ds, test_ds = ds.subset(tr), ds.subset(test)
        cfg_r = replace(sel_cfg, seed=derive_seed(seed, f"folds-{r}"), jobs=jobs)
        for name, selector in (("wafs", wafs), ("traditional", traditional_wrapper)):
            arm = arms[name]
            mask, trace = selector(train_ds, cfg_r)
            model = _fit(apply_mask(train_ds, mask), sel_cfg.train_grid, mask, derive_seed(seed, f"trainer-{r}"))
            view = apply_mask(test_ds, mask)
            op = calibrate_threshold(model, view, fp_rate)
            legit = view.features[view.labels == -1]
            arm.masks.append(mask)
            arm.traces.append(trace)
            arm.G.append(tp_at_fp(model, view, op))
            arm.S.append(hardness_of_evasion(model, view, spec, op.threshold, neighbors=legit, jobs=jobs).mean_cost)
            for sc in scenarios:
                attacker = _attacker(sc, model, ds, surr, mask, sel_cfg.train_grid, seed, r)
                curve = arm.curves[sc.knowledge]
                curve.repeats.append(security_curve_repeat(model, attacker, test_ds, sc, jobs))
    report = {"repeats": repeats, "arms": {}, "paired": {}}
    for name, arm in arms.items():
        report["arms"][name] = {
            "masks": [m.indices.tolist() for m in arm.masks],
            "G": arm.G, "S": arm.S,
            "curves": {k: c.to_json() for k, c in arm.curves.items()},
            "subset_size_summary": [
                [{"size": i + 1, "G": c.G, "S": None if math.isnan(c.S) else c.S} for i, c in enumerate(t.chosen())]
                for t in arm.traces] if sel_cfg.direction == "forward" else [],
        }
    w, t = arms["wafs"], arms["traditional"]
    report["paired"]["S"] = _paired(w.S, t.S)
    report["paired"]["G"] = _paired(w.G, t.G)
    for k in w.curves:
        wc, tc = w.curves[k], t.curves[k]
        b = wc.budgets
        report["paired"][f"auc_{k}"] = _paired([_auc(b, x) for x in wc.tp_matrix], [_auc(b, x) for x in tc.tp_matrix])
    return Comparison(report, {n: a.curves for n, a in arms.items()}, {n: a.traces for n, a in arms.items()})
