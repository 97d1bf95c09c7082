"""Detection metrics, hardness of evasion and weight evenness."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from ._parallel import ordered_map
from .data import Dataset, apply_mask
from .evasion import (L2SQ, AttackSpec, ConstraintSet, EvasionError, discrete_min_cost_evasion,
                      min_cost_evasion)


@dataclass(frozen=True)
class OperatingPoint:
    """Decision offset: a sample is flagged malicious when ``g(x) - threshold >= 0``."""

    fp_rate: float
    threshold: float


@dataclass
class SecurityEstimate:
    mean_cost: float
    per_sample_costs: np.ndarray
    unevaded_count: int
    errors: list = field(default_factory=list)

    @property
    def std(self) -> float:
        return float(np.std(self.per_sample_costs)) if self.per_sample_costs.size else float("nan")

    def to_json(self) -> dict:
        return {"mean": self.mean_cost, "std": self.std, "unevaded": self.unevaded_count,
                "errors": len(self.errors)}


def model_inputs(model, X) -> np.ndarray:
    """Columns of ``X`` the model reads: ``X`` itself or its masked subset."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] == model.dim:
        return X
    if X.shape[-1] == model.mask.d:
        return X[..., model.mask.indices]
    raise ValueError(f"data has {X.shape[-1]} features but the model expects {model.dim} "
                     f"(mask over {model.mask.d})")


def model_view(model, ds: Dataset) -> Dataset:
    if ds.d == model.dim:
        return ds
    if ds.d == model.mask.d:
        return apply_mask(ds, model.mask)
    raise ValueError(f"data has {ds.d} features but the model expects {model.dim} "
                     f"(mask over {model.mask.d})")


def accuracy(model, ds: Dataset) -> float:
    """Fraction of samples with ``sign(g(x)) == y``, where ``sign(0) = +1``."""
    if ds.n == 0:
        raise ValueError("empty dataset")
    return float(np.mean(model.predict(model_inputs(model, ds.features)) == ds.labels))


def threshold_from_scores(scores, fp_rate: float) -> float:
    """Smallest candidate threshold whose false-positive fraction is ``<= fp_rate``.

    Candidates are the distinct scores plus the float just above the largest
    one; a score equal to the threshold counts as a positive.
    """
    if not 0 < fp_rate < 1:
        raise ValueError(f"fp_rate must lie in (0, 1), got {fp_rate}")
    s = np.sort(np.asarray(scores, dtype=float))
    need = math.ceil(1.0 / fp_rate - 1e-12)
    if s.size < need:
        raise ValueError(f"fp_rate {fp_rate} needs at least {need} legitimate samples, got {s.size}")
    cands = np.append(np.unique(s), np.nextafter(s[-1], np.inf))
    fp = (s.size - np.searchsorted(s, cands, side="left")) / s.size
    return float(cands[np.argmax(fp <= fp_rate)])


def calibrate_threshold(model, legit, fp_rate: float) -> OperatingPoint:
    """Operating point at ``fp_rate`` on legitimate samples (a Dataset or a matrix)."""
    X = legit.features[legit.labels == -1] if isinstance(legit, Dataset) else legit
    scores = model.decision_function(model_inputs(model, X))
    return OperatingPoint(fp_rate, threshold_from_scores(np.atleast_1d(scores), fp_rate))


def tp_at_fp(model, ds, op: OperatingPoint | float) -> float:
    """Fraction of malicious samples with ``g(x) - threshold >= 0``."""
    tau = op.threshold if isinstance(op, OperatingPoint) else float(op)
    X = ds.features[ds.labels == 1] if isinstance(ds, Dataset) else np.asarray(ds, dtype=float)
    if len(X) == 0:
        raise ValueError("no malicious samples")
    return float(np.mean(model.decision_function(model_inputs(model, X)) - tau >= 0))


def _evasion_cost(x, model, spec: AttackSpec, cons: ConstraintSet, pool):
    """(natural cost, evaded, error message) for one malicious sample."""
    try:
        if model.decision_function(x) < 0:
            return 0.0, True, None
        if cons.all_discrete:
            res = discrete_min_cost_evasion(model, x, spec.kind, cons, spec.params)
        else:
            res = min_cost_evasion(model, x, spec.kind, cons, spec.params, pool)
    except (EvasionError, FloatingPointError) as exc:
        return float("nan"), False, str(exc)
    if not res.evaded:
        return cons.max_distance(spec.kind, x), False, None
    cost = math.sqrt(res.cost) if spec.kind == L2SQ else res.cost
    return cost, True, None


def hardness_of_evasion(model, malicious, spec: AttackSpec | None = None, threshold: float = 0.0,
                        domains=None, neighbors=None, jobs: int = 1) -> SecurityEstimate:
    """Mean minimum evasion cost over malicious samples, in natural units.

    ``malicious`` is a Dataset (its ``y = +1`` rows are used) or a sample
    matrix together with ``domains``.  Attacks target ``g(x) - threshold``.
    Samples that are never evaded count as the largest feasible distance;
    samples whose attack errors are left out of the mean and listed in
    ``errors``.
    """
    spec = spec or AttackSpec()
    if isinstance(malicious, Dataset):
        view = model_view(model, malicious)
        X = view.features[view.labels == 1]
        domains = view.domains
    else:
        X = model_inputs(model, malicious)
        if domains is None:
            raise ValueError("domains are required when passing a sample matrix")
        domains = [domains[i] for i in model.mask.indices] if len(domains) != model.dim else domains
    if len(X) == 0:
        raise ValueError("no malicious samples")
    pool = None if neighbors is None else model_inputs(model, neighbors)
    shifted = model.shifted(threshold)
    cons = spec.constraints(domains)
    rows = ordered_map(partial(_evasion_cost, model=shifted, spec=spec, cons=cons, pool=pool), list(X), jobs)
    costs = np.array([r[0] for r in rows])
    errors = [(i, r[2]) for i, r in enumerate(rows) if r[2] is not None]
    if len(errors) == len(rows):
        raise EvasionError(f"every attack failed; first error: {errors[0][1]}")
    ok = ~np.isnan(costs)
    unevaded = sum(1 for r in rows if not r[1] and r[2] is None)
    kept = costs[ok]
    return SecurityEstimate(float(kept.mean()), kept, unevaded, errors)


def weight_evenness(weights) -> float:
    """Evenness of absolute weights in ``[0, 1]``: 1 for uniform, 0 for one-hot."""
    a = np.sort(np.abs(np.asarray(weights, dtype=float)))[::-1]
    d = a.size
    if d < 2:
        raise ValueError("weight evenness needs at least two weights")
    total = a.sum()
    if total == 0:
        raise ValueError("all weights are zero")
    cum = np.cumsum(a) / total
    e = 2.0 / (d - 1) * (d - cum.sum())
    return float(min(1.0, max(0.0, e)))


def pearson(a, b) -> tuple[float, str]:
    """Pearson coefficient, or NaN with a reason when undefined."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size != b.size or a.size < 2:
        raise ValueError("need two equally long sequences of length >= 2")
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0 or vb == 0:
        return float("nan"), "undefined: zero variance in " + ("S" if va == 0 else "E")
    return float(np.clip(da @ db / math.sqrt(va * vb), -1.0, 1.0)), ""


def security_correlation_report(models: Sequence, malicious_sets: Sequence, spec: AttackSpec | None = None,
                                thresholds: Sequence[float] | None = None) -> dict:
    """Per-model hardness ``S`` and evenness ``E`` with their Pearson correlation."""
    if len(models) < 3:
        raise ValueError("the correlation report needs at least 3 models")
    if len(malicious_sets) != len(models):
        raise ValueError("one malicious set per model")
    thresholds = thresholds or [0.0] * len(models)
    pairs = []
    for model, mal, tau in zip(models, malicious_sets, thresholds):
        s = hardness_of_evasion(model, mal, spec, tau).mean_cost
        pairs.append({"S": s, "E": weight_evenness(model.weights)})
    r, note = pearson([p["S"] for p in pairs], [p["E"] for p in pairs])
    return {"pairs": pairs, "pearson": r, "note": note}


def metrics_report(model, ds: Dataset, fp_rate: float, spec: AttackSpec | None = None) -> dict:
    """Accuracy, TP at the calibrated operating point and optional hardness."""
    op = calibrate_threshold(model, ds, fp_rate)
    out = {"accuracy": accuracy(model, ds), "tp": tp_at_fp(model, ds, op), "fp_rate": fp_rate,
           "threshold": op.threshold}
    if spec is not None:
        out["hardness"] = hardness_of_evasion(model, ds, spec, op.threshold).to_json()
    if hasattr(model, "weights"):
        out["weight_evenness"] = weight_evenness(model.weights) if model.dim >= 2 else None
    return out


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
