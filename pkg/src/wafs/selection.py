"""Wrapper feature selection scored by accuracy and hardness of evasion.

Each greedy step scores every candidate subset ``F`` by cross-validated
``G(F)`` (accuracy or TP at a fixed FP rate) and ``S(F)`` (mean minimum
evasion cost of the validation-fold malicious samples), rescales the
trade-off as ``lambda' = lambda / max_k S_k`` and keeps the candidate with
the largest ``G + lambda' S``.  With ``lambda = 0`` this is the ordinary
accuracy-driven wrapper.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Sequence

import numpy as np

from ._parallel import ordered_map
from ._rng import derive_seed
from .classifier import ConvergenceWarning, TrainConfig, TrainingError, grid_search, train
from .data import Dataset, FeatureMask, FoldPlan, apply_mask, stratified_folds
from .evasion import AttackSpec, EvasionError
from .metrics import accuracy, calibrate_threshold, hardness_of_evasion, tp_at_fp

FORWARD = "forward"
BACKWARD = "backward"
ACCURACY = "accuracy"
TP_AT_FP = "tp_at_fp"


class SelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    """Everything that determines a selection run.

    ``folds`` is a fold count or an explicit :class:`FoldPlan`.
    ``g_measure`` is ``"accuracy"`` or ``"tp_at_fp"`` (at ``fp_rate``,
    calibrated on the training folds).  Attacks target ``g(x) - tau`` with
    ``tau`` calibrated on the training folds at ``threshold_fp_rate``, or
    ``tau = 0`` when that is None.
    """

    m: int
    direction: str = FORWARD
    lam: float = 0.5
    folds: int | FoldPlan = 5
    train_grid: tuple = (TrainConfig(),)
    inner_folds: int = 5
    attack: AttackSpec = field(default_factory=AttackSpec)
    g_measure: str = ACCURACY
    fp_rate: float = 0.01
    threshold_fp_rate: float | None = None
    seed: int = 0
    reuse_hyperparams: bool = False
    inequality: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.g_measure not in (ACCURACY, TP_AT_FP):
            raise ValueError(f"unknown g_measure {self.g_measure!r}")
        if not self.train_grid:
            raise ValueError("empty training grid")
        object.__setattr__(self, "train_grid", tuple(self.train_grid))

    def fold_plan(self, ds: Dataset) -> FoldPlan:
        if isinstance(self.folds, FoldPlan):
            if self.folds.assignments.size != ds.n:
                raise ValueError("fold plan does not match the dataset size")
            return self.folds
        return stratified_folds(ds, int(self.folds), derive_seed(self.seed, "folds"))

    def to_json(self) -> dict:
        folds = self.folds if isinstance(self.folds, int) else {"k": self.folds.k, "seed": self.folds.seed}
        return {"m": self.m, "direction": self.direction, "lambda": self.lam, "folds": folds,
                "train_grid": [c.to_json() for c in self.train_grid], "inner_folds": self.inner_folds,
                "attack": self.attack.to_json(), "g_measure": self.g_measure, "fp_rate": self.fp_rate,
                "threshold_fp_rate": self.threshold_fp_rate, "seed": self.seed,
                "reuse_hyperparams": self.reuse_hyperparams, "inequality": self.inequality}


@dataclass(frozen=True)
class CandidateScore:
    G: float
    S: float
    valid: bool
    hyper: TrainConfig | None = None
    failed_folds: int = 0


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    candidate: int
    G: float
    S: float
    lambda_prime: float
    chosen: bool


@dataclass
class SelectionTrace:
    direction: str
    records: list = field(default_factory=list)
    final_mask: FeatureMask | None = None

    @property
    def iterations(self) -> int:
        return len({r.iteration for r in self.records})

    def chosen(self) -> list[TraceRecord]:
        return [r for r in self.records if r.chosen]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "candidate", "G", "S", "lambda_prime", "chosen"])
            for r in self.records:
                w.writerow([r.iteration, r.candidate, repr(r.G), repr(r.S), repr(r.lambda_prime), int(r.chosen)])


def mask_to_json(mask: FeatureMask, names: Sequence[str] | None = None) -> dict:
    idx = mask.indices.tolist()
    return {"mask": mask.to_list(), "selected": idx,
            "names": [names[i] for i in idx] if names is not None else [f"x{i + 1}" for i in idx]}


def write_mask(mask: FeatureMask, path, names: Sequence[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mask_to_json(mask, names), fh, indent=2)
        fh.write("\n")


def read_mask(path) -> FeatureMask:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    bits = obj["mask"] if isinstance(obj, dict) else obj
    return FeatureMask(np.array(bits, dtype=bool))


def _train_quiet(ds: Dataset, cfg: TrainConfig, mask: FeatureMask):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return train(ds, cfg, mask)


def _pick_hyper(train_ds: Dataset, cfg: SelectionConfig, hyper: TrainConfig | None, fold: int) -> TrainConfig:
    if len(cfg.train_grid) == 1:
        return cfg.train_grid[0]
    if cfg.reuse_hyperparams and hyper is not None:
        return hyper
    inner = stratified_folds(train_ds, cfg.inner_folds, derive_seed(cfg.seed, f"inner-{fold}"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return grid_search(train_ds, list(cfg.train_grid), inner)


def evaluate_candidate(ds: Dataset, mask: FeatureMask, cfg: SelectionConfig, folds: FoldPlan | None = None,
                       security: bool = True, hyper: TrainConfig | None = None) -> CandidateScore:
    """Cross-validated ``(G, S)`` of one feature subset.

    Folds whose training fails are skipped; the candidate is invalid when all
    of them fail.  ``S`` is NaN when ``security`` is False.
    """
    folds = folds or cfg.fold_plan(ds)
    view = apply_mask(ds, mask)
    gs, ss, used = [], [], None
    failed = 0
    for f, (tr, va) in enumerate(folds.splits()):
        train_ds, val_ds = view.subset(tr), view.subset(va)
        try:
            hp = _pick_hyper(train_ds, cfg, hyper, f)
            model = _train_quiet(train_ds, hp, mask)
            used = used or hp
            if cfg.g_measure == ACCURACY:
                gs.append(accuracy(model, val_ds))
            else:
                gs.append(tp_at_fp(model, val_ds, calibrate_threshold(model, train_ds, cfg.fp_rate)))
            if security:
                tau = 0.0
                if cfg.threshold_fp_rate is not None:
                    tau = calibrate_threshold(model, train_ds, cfg.threshold_fp_rate).threshold
                legit = val_ds.features[val_ds.labels == -1]
                ss.append(hardness_of_evasion(model, val_ds, cfg.attack, tau, neighbors=legit).mean_cost)
        except (TrainingError, EvasionError):
            failed += 1
            if len(gs) > len(ss) and security:
                gs.pop()
    if not gs:
        return CandidateScore(float("nan"), float("nan"), False, None, failed)
    S = float(np.mean(ss)) if security else float("nan")
    return CandidateScore(float(np.mean(gs)), S, True, used, failed)


def _evaluate_indices(indices, ds, cfg, folds, security, hyper):
    return evaluate_candidate(ds, FeatureMask.from_indices(indices, ds.d), cfg, folds, security, hyper)


def _select(ds: Dataset, cfg: SelectionConfig, security: bool) -> tuple[FeatureMask, SelectionTrace]:
    d = ds.d
    if cfg.m > d:
        raise ValueError(f"m={cfg.m} exceeds the number of features d={d}")
    folds = cfg.fold_plan(ds)
    forward = cfg.direction == FORWARD
    selected: list[int] = []
    pool = list(range(d))
    trace = SelectionTrace(cfg.direction)
    hyper = None
    best_prefix, best_prefix_obj = None, -np.inf
    it = 0
    while (len(selected) < cfg.m) if forward else (len(pool) > cfg.m):
        cands = [k for k in pool if k not in selected] if forward else list(pool)
        subsets = [sorted(selected + [k]) if forward else [j for j in pool if j != k] for k in cands]
        scores = ordered_map(partial(_evaluate_indices, ds=ds, cfg=cfg, folds=folds, security=security,
                                     hyper=hyper), subsets, cfg.jobs)
        valid = [i for i, s in enumerate(scores) if s.valid]
        if not valid:
            raise SelectionError(f"every candidate failed at iteration {it}")
        lam_p = 0.0
        if security and cfg.lam > 0:
            s_max = max(scores[i].S for i in valid)
            lam_p = cfg.lam / s_max if s_max > 0 and math.isfinite(s_max) else 0.0
        objective = [scores[i].G + (lam_p * scores[i].S if lam_p else 0.0) for i in valid]
        best = valid[int(np.argmax(objective))]  # first maximum: lowest feature index
        for i, k in enumerate(cands):
            s = scores[i]
            trace.records.append(TraceRecord(it, k, s.G, s.S, lam_p, i == best))
        k_star = cands[best]
        hyper = scores[best].hyper
        if forward:
            selected.append(k_star)
            obj = max(objective)
            if obj > best_prefix_obj:
                best_prefix, best_prefix_obj = list(selected), obj
        else:
            pool.remove(k_star)
        it += 1
    final = selected if forward else pool
    if forward and cfg.inequality and best_prefix is not None:
        final = best_prefix
    mask = FeatureMask.from_indices(final, d)
    trace.final_mask = mask
    return mask, trace


def wafs(ds: Dataset, cfg: SelectionConfig) -> tuple[FeatureMask, SelectionTrace]:
    """Adversarial wrapper selection (forward or backward)."""
    return _select(ds, cfg, security=True)


def traditional_wrapper(ds: Dataset, cfg: SelectionConfig) -> tuple[FeatureMask, SelectionTrace]:
    """The same wrapper with ``lambda = 0``; no attacks are simulated."""
    return _select(ds, replace(cfg, lam=0.0), security=False)
