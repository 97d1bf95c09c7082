"""Evasion attacks against differentiable two-class discriminants.

Three problems are solved here:

* minimum-cost evasion: find the feasible ``x'`` closest to ``x`` (under an
  l1 or squared-l2 cost) with ``g(x') < 0``;
* the same on discrete (Boolean / quantized) feature grids;
* budgeted evasion: minimise ``g(x')`` subject to ``cost(x', x) <= c_max``.

Budgets are expressed in natural distance units: the l1 norm, or the
Euclidean norm when the cost is the squared l2 distance.

Models only need ``decision_function(X)`` and ``gradient(x)``; a decision
threshold is applied by attacking ``model.shifted(tau)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import FeatureDomain

L1 = "l1"
L2SQ = "l2-squared"
DISTANCES = (L1, L2SQ)


class EvasionError(ValueError):
    pass


def _check_kind(kind: str) -> None:
    if kind not in DISTANCES:
        raise ValueError(f"unknown distance {kind!r}; expected one of {DISTANCES}")


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def distance(kind: str, a, b) -> float:
    """``sum |a - b|`` for l1, ``sum (a - b)^2`` for l2-squared."""
    _check_kind(kind)
    a, b = _pair(a, b)
    diff = a - b
    if kind == L1:
        return float(np.abs(diff).sum())
    return float(diff @ diff)


def distance_subgradient(kind: str, a, b) -> np.ndarray:
    """Gradient of ``distance(kind, ., b)`` at ``a``; ``sign(0) = 0`` for l1."""
    _check_kind(kind)
    a, b = _pair(a, b)
    if kind == L1:
        return np.sign(a - b)
    return 2.0 * (a - b)


def natural_distance(kind: str, a, b) -> float:
    """l1 distance, or Euclidean distance for the squared-l2 cost."""
    c = distance(kind, a, b)
    return c if kind == L1 else float(np.sqrt(c))


def _natural_rows(kind: str, D: np.ndarray) -> np.ndarray:
    """Natural norm of each row of a displacement matrix."""
    if kind == L1:
        return np.abs(D).sum(1)
    return np.sqrt((D * D).sum(1))


# -------------------------------------------------------------- constraints


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Feasible region for attack points.

    Per-feature box ``[lo, hi]``, optional grid of admissible levels, and the
    optional monotone constraint ``x <= x'`` (features may only increase).
    """

    lo: np.ndarray
    hi: np.ndarray
    monotone_increase: bool = False
    grids: tuple = ()

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("inconsistent box bounds")
        grids = tuple(self.grids) or (None,) * lo.size
        if len(grids) != lo.size:
            raise ValueError("one grid entry per feature")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "grids", tuple(None if g is None else np.asarray(g, dtype=float) for g in grids))

    @classmethod
    def from_domains(cls, domains: Sequence[FeatureDomain], monotone_increase: bool = False) -> "ConstraintSet":
        return cls(np.array([d.lo for d in domains]), np.array([d.hi for d in domains]),
                   monotone_increase, tuple(d.grid for d in domains))

    @classmethod
    def unbounded(cls, d: int, monotone_increase: bool = False) -> "ConstraintSet":
        return cls(np.full(d, -np.inf), np.full(d, np.inf), monotone_increase)

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def has_grid(self) -> bool:
        return any(g is not None for g in self.grids)

    @property
    def all_discrete(self) -> bool:
        return all(g is not None for g in self.grids)

    def lower_for(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(self.lo, x) if self.monotone_increase else self.lo

    def project(self, xp, x) -> np.ndarray:
        """Clip to the box, enforce ``x' >= x`` if required, snap grid features.

        Grid features are snapped to the nearest admissible level on the
        ``x`` side of the proposal, so no coordinate moves further from ``x``.
        """
        xp = np.asarray(xp, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.clip(xp, self.lower_for(x), self.hi)
        if self.has_grid:
            for j, grid in enumerate(self.grids):
                if grid is None:
                    continue
                v = out[j]
                if v >= x[j]:
                    k = np.searchsorted(grid, v, side="right") - 1
                else:
                    k = np.searchsorted(grid, v, side="left")
                out[j] = grid[int(np.clip(k, 0, grid.size - 1))]
        return out

    def is_feasible(self, xp, x, atol: float = 0.0) -> bool:
        xp = np.asarray(xp, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.any(xp < self.lo - atol) or np.any(xp > self.hi + atol):
            return False
        if self.monotone_increase and np.any(xp < x - atol):
            return False
        for j, grid in enumerate(self.grids):
            if grid is not None and not np.any(np.abs(grid - xp[j]) <= atol):
                return False
        return True

    def max_distance(self, kind: str, x) -> float:
        """Largest natural distance from ``x`` to any point of the box.

        The monotone bound is ignored on purpose: under it a sample sitting at
        the top of the box could not move at all, and a distance of 0 would
        rate it as the easiest sample rather than an unevadable one.
        """
        x = np.asarray(x, dtype=float)
        reach = np.maximum(np.abs(self.hi - x), np.abs(x - self.lo))
        if not np.all(np.isfinite(reach)):
            return float("inf")
        return float(reach.sum()) if kind == L1 else float(np.sqrt(reach @ reach))

    def step_neighbors(self, cur: np.ndarray, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Per feature, the adjacent grid level in ``direction`` (NaN if none)."""
        lower = self.lower_for(x)
        out = np.full(cur.size, np.nan)
        for j in np.flatnonzero(direction):
            grid = self.grids[j]
            if grid is None:
                continue
            k = int(np.searchsorted(grid, cur[j]))
            k = k + 1 if direction[j] > 0 else k - 1
            if 0 <= k < grid.size:
                v = grid[k]
                if lower[j] <= v <= self.hi[j]:
                    out[j] = v
        return out


@dataclass(frozen=True)
class SolverParams:
    """Knobs of the evasion solvers.

    ``step_size`` and ``max_iters`` drive the gradient iterations, ``epsilon``
    is the cost-change convergence threshold, ``top_k`` the number of
    candidate features tried per discrete step and ``margin_overshoot`` how
    far past ``g = 0`` boundary points are placed.  ``backtracking`` halves
    the step whenever a step increases the objective of the current phase;
    ``refine_boundary`` locates the boundary by bisection whenever two
    consecutive iterates straddle it.  A continuous run also stops once its
    best evading cost has not improved by ``epsilon`` for ``patience``
    iterations, which ends the zig-zag along the boundary.
    """

    step_size: float = 0.01
    epsilon: float = 1e-6
    max_iters: int = 1000
    top_k: int = 10
    margin_overshoot: float = 1e-6
    backtracking: bool = False
    refine_boundary: bool = True
    patience: int = 50

    def __post_init__(self):
        if not (self.step_size > 0 and self.epsilon > 0 and self.max_iters > 0 and self.top_k > 0
                and self.margin_overshoot > 0 and self.patience > 0):
            raise ValueError("solver parameters must be positive")


@dataclass
class EvasionResult:
    x_star: np.ndarray
    cost: float
    g_value: float
    evaded: bool
    init_used: str = "self"
    iterations: int = 0
    trajectory: list = field(default_factory=list)


def _g(model, x) -> float:
    return float(model.decision_function(x))


def _finite(v: np.ndarray, what: str, it: int) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise EvasionError(f"non-finite {what} at iteration {it}")
    return v


def write_trace(result: EvasionResult, path) -> None:
    """CSV of ``(iteration, cost, g, phase)`` rows for one attack."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "cost", "g", "phase"])
        for i, row in enumerate(result.trajectory):
            w.writerow([i, repr(float(row[0])), repr(float(row[1])), row[2] if len(row) > 2 else ""])


# ------------------------------------------------------------ closed form


def closed_form_linear_l2(model, x, overshoot: float = 1e-6, constraints: ConstraintSet | None = None) -> np.ndarray:
    """Projection of ``x`` just past the hyperplane: ``x - (g(x)+o) w/||w||^2``.

    The result is clipped to ``constraints`` when given; after clipping the
    point may no longer evade and callers should then fall back to
    :func:`min_cost_evasion`.
    """
    w = np.asarray(model.weights, dtype=float)
    x = np.asarray(x, dtype=float)
    nw = float(w @ w)
    if nw == 0.0:
        raise EvasionError("zero weight vector")
    gx = _g(model, x)
    if gx < 0:
        raise EvasionError("sample is already classified as legitimate")
    xp = x - (gx + overshoot) * w / nw
    if constraints is not None:
        xp = constraints.project(xp, x)
    return xp


# ------------------------------------------------------- continuous descent


class _Tracker:
    """Keeps the cheapest evading point and the lowest-g point seen."""

    def __init__(self, kind, x):
        self.kind, self.x = kind, x
        self.best = None
        self.best_cost = np.inf
        self.fallback = None
        self.fallback_g = np.inf
        self.init = "self"

    def see(self, p, g, init) -> bool:
        """Record a point; True if it improved the best evading cost."""
        if g < 0:
            c = distance(self.kind, p, self.x)
            if c < self.best_cost:
                self.best, self.best_cost, self.init = p.copy(), c, init
                return True
            return False
        if self.best is None and g < self.fallback_g:
            self.fallback, self.fallback_g = p.copy(), g
        return False


def _refine(model, a, ga, b, gb, overshoot, rtol=1e-10):
    """Bisect the segment ``[a, b]`` (``ga >= 0 > gb``) towards the boundary."""
    target = -overshoot
    inside, outside = b, a
    g_in = gb
    if g_in >= target:
        return b, gb
    span = float(np.max(np.abs(b - a)))
    scale = max(1.0, float(np.max(np.abs(a))))
    iters = int(np.ceil(np.log2(max(span / (rtol * scale), 1.0))))
    for _ in range(min(iters, 60)):
        mid = 0.5 * (inside + outside)
        gm = _g(model, mid)
        if gm < target:
            inside, g_in = mid, gm
        else:
            outside = mid
    return inside, g_in


def _descend(model, x, x0, kind, cons, params, tracker, init, trace):
    """One run of the alternating descent from ``x0``; returns iterations."""
    t = params.step_size
    cur = cons.project(x0, x)
    g_cur = _g(model, cur)
    c_cur = distance(kind, cur, x)
    tracker.see(cur, g_cur, init)
    if trace is not None:
        trace.append((c_cur, g_cur, "g" if g_cur >= 0 else "c"))
    i = 0
    run_best = c_cur if g_cur < 0 else np.inf
    best_seen, stale = np.inf, 0
    while i < params.max_iters:
        i += 1
        in_g_phase = g_cur >= 0
        if in_g_phase:
            direction = -_finite(model.gradient(cur), "discriminant gradient", i)
        else:
            direction = -distance_subgradient(kind, cur, x)
        for _ in range(30):
            nxt = _finite(cons.project(cur + t * direction, x), "iterate", i)
            g_n = _g(model, nxt)
            c_n = distance(kind, nxt, x)
            if not params.backtracking:
                break
            worse = g_n > g_cur if in_g_phase else c_n > c_cur
            if not worse:
                break
            t *= 0.5
        if np.array_equal(nxt, cur):
            break
        if params.refine_boundary and (g_cur >= 0) != (g_n >= 0):
            a, ga, b, gb = (cur, g_cur, nxt, g_n) if g_cur >= 0 else (nxt, g_n, cur, g_cur)
            # only worth it if the detected end is cheaper than anything kept so far
            if distance(kind, a, x) < run_best:
                p, gp = _refine(model, a, ga, b, gb, params.margin_overshoot)
            else:
                p, gp = b, gb
            tracker.see(p, gp, init)
            if gp < 0:
                run_best = min(run_best, distance(kind, p, x))
        tracker.see(nxt, g_n, init)
        if g_n < 0:
            run_best = min(run_best, c_n)
        if trace is not None:
            trace.append((c_n, g_n, "g" if in_g_phase else "c"))
        if run_best < best_seen - params.epsilon:
            best_seen, stale = run_best, 0
        elif np.isfinite(best_seen):
            stale += 1
        converged = (g_n < 0 and abs(c_n - c_cur) < params.epsilon) or stale >= params.patience
        cur, g_cur, c_cur = nxt, g_n, c_n
        if converged:
            break
    return i


def nearest_legitimate(model, x, kind, cons, pool) -> np.ndarray | None:
    """Closest pool point (after projection) that the model calls legitimate."""
    if pool is None or len(pool) == 0:
        return None
    P = np.array([cons.project(p, x) for p in np.asarray(pool, dtype=float)])
    ok = model.decision_function(P) < 0
    if not ok.any():
        return None
    D = P - x
    costs = np.abs(D).sum(1) if kind == L1 else (D * D).sum(1)
    costs = np.where(ok, costs, np.inf)
    return P[int(np.argmin(costs))]


def min_cost_evasion(model, x, kind: str = L2SQ, constraints: ConstraintSet | None = None,
                     params: SolverParams | None = None, neighbors=None,
                     record: bool = False) -> EvasionResult:
    """Minimum-cost evasion by alternating gradient descent.

    Runs from ``x`` itself and from the nearest pool point classified as
    legitimate; the cheapest evading point seen over both runs is returned.
    """
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    params = params or SolverParams()
    cons = constraints or ConstraintSet.unbounded(x.size)
    if _g(model, x) < 0:
        raise EvasionError("sample is already classified as legitimate; nothing to evade")
    tracker = _Tracker(kind, x)
    trace = [] if record else None
    iters = _descend(model, x, x, kind, cons, params, tracker, "self", trace)
    start = nearest_legitimate(model, x, kind, cons, neighbors)
    if start is not None:
        iters += _descend(model, x, start, kind, cons, params, tracker, "nearest-legitimate", trace)
    if tracker.best is not None:
        xs, evaded = tracker.best, True
    else:
        xs, evaded = tracker.fallback, False
    return EvasionResult(xs, distance(kind, xs, x), _g(model, xs), evaded, tracker.init, iters, trace or [])


# --------------------------------------------------------- discrete descent


def _candidate_moves(cons, cur, x, grad, top_k, extra_ok=None):
    """Single-level moves against the gradient, best ``top_k`` by ``|grad|``."""
    direction = -np.sign(grad)
    targets = cons.step_neighbors(cur, x, direction)
    feasible = ~np.isnan(targets)
    if extra_ok is not None:
        feasible &= extra_ok(targets)
    idx = np.flatnonzero(feasible)
    if idx.size == 0:
        return idx, np.empty((0, cur.size))
    order = idx[np.argsort(-np.abs(grad[idx]), kind="stable")][:top_k]
    cands = np.repeat(cur[None, :], order.size, axis=0)
    cands[np.arange(order.size), order] = targets[order]
    return order, cands


def discrete_min_cost_evasion(model, x, kind: str = L1, constraints: ConstraintSet | None = None,
                              params: SolverParams | None = None, record: bool = False) -> EvasionResult:
    """Minimum-cost evasion on a feature grid by gradient-guided local search.

    While ``g >= 0`` each step moves to the candidate with the lowest ``g``;
    once evading, to the cheapest candidate that still evades.  Candidates
    shift one of the ``top_k`` features with the largest gradient magnitude
    by one level against the gradient.
    """
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    params = params or SolverParams()
    if constraints is None or not constraints.all_discrete:
        raise EvasionError("discrete evasion needs a grid for every feature")
    cons = constraints
    cur = x.copy()
    g_cur = _g(model, cur)
    if g_cur < 0:
        raise EvasionError("sample is already classified as legitimate; nothing to evade")
    c_cur = 0.0
    trace = [(c_cur, g_cur, "g")] if record else []
    i = 0
    while i < params.max_iters:
        if g_cur >= 0:
            grad = _finite(model.gradient(cur), "discriminant gradient", i + 1)
            _, cands = _candidate_moves(cons, cur, x, grad, params.top_k)
            if not len(cands):
                break
            gs = model.decision_function(cands)
            k = int(np.argmin(gs))
            if not gs[k] < g_cur:
                break
            phase = "g"
        else:
            grad = distance_subgradient(kind, cur, x)
            _, cands = _candidate_moves(cons, cur, x, grad, params.top_k)
            if not len(cands):
                break
            gs = model.decision_function(cands)
            D = cands - x
            cs = np.abs(D).sum(1) if kind == L1 else (D * D).sum(1)
            cs = np.where(gs < 0, cs, np.inf)
            k = int(np.argmin(cs))
            if not cs[k] < c_cur:
                break
            phase = "c"
        i += 1
        cur = cands[k]
        g_cur = float(gs[k])
        c_cur = distance(kind, cur, x)
        if record:
            trace.append((c_cur, g_cur, phase))
    return EvasionResult(cur, distance(kind, cur, x), g_cur, g_cur < 0, "self", i, trace)


# ------------------------------------------------------------ budgeted attack


def project_budget(z, x, kind: str, c_max: float, cons: ConstraintSet) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``{natural(x' - x) <= c_max} & cons``.

    The box (with the monotone bound) contains ``x``, so for a multiplier
    ``mu`` the coordinate-wise solution is a clipped shrink (l2) or a
    clipped soft-threshold (l1) of ``z - x``; ``mu`` is found by bisection.
    Grid features, if any, are snapped towards ``x`` afterwards.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    lo = cons.lower_for(x) - x
    hi = cons.hi - x
    v = z - x
    delta = np.clip(v, lo, hi)
    if _norm(kind, delta) > c_max:
        if c_max <= 0:
            delta = np.zeros_like(v)
        elif kind == L2SQ:
            nv = float(np.sqrt(v @ v))
            cand = v * (c_max / nv)
            if np.all(cand >= lo) and np.all(cand <= hi):
                delta = cand
            else:
                a, b = 0.0, 1.0  # scale s of v: norm(clip(s v)) increasing in s
                for _ in range(100):
                    s = 0.5 * (a + b)
                    if _norm(kind, np.clip(s * v, lo, hi)) > c_max:
                        b = s
                    else:
                        a = s
                delta = np.clip(a * v, lo, hi)
        else:
            a, b = 0.0, float(np.abs(v).max())
            for _ in range(100):
                mu = 0.5 * (a + b)
                trial = np.clip(np.sign(v) * np.maximum(np.abs(v) - mu, 0.0), lo, hi)
                if _norm(kind, trial) > c_max:
                    a = mu
                else:
                    b = mu
            delta = np.clip(np.sign(v) * np.maximum(np.abs(v) - b, 0.0), lo, hi)
        while _norm(kind, delta) > c_max:
            delta = delta * (1.0 - 1e-12)
    out = x + delta
    if cons.has_grid:
        out = cons.project(out, x)
    return out


def _norm(kind, delta) -> float:
    return float(np.abs(delta).sum()) if kind == L1 else float(np.sqrt(delta @ delta))


def budgeted_attack(model, x, kind: str = L1, constraints: ConstraintSet | None = None,
                    params: SolverParams | None = None, c_max: float = 0.0,
                    keep_points: bool = False) -> EvasionResult:
    """Minimise ``g(x')`` subject to ``natural(x' - x) <= c_max``.

    Projected gradient descent in continuous spaces, greedy grid descent when
    every feature is discrete.  The lowest-``g`` iterate is returned and the
    trajectory holds ``(natural cost, g, point)`` for every iterate (points
    only when ``keep_points``).
    """
    _check_kind(kind)
    if c_max < 0:
        raise EvasionError(f"negative budget {c_max}")
    x = np.asarray(x, dtype=float)
    params = params or SolverParams()
    cons = constraints or ConstraintSet.unbounded(x.size)
    cur = x.copy()
    g_cur = _g(model, cur)
    traj = [(0.0, g_cur, cur.copy() if keep_points else None)]
    best, g_best = cur, g_cur
    i = 0
    discrete = cons.all_discrete
    while c_max > 0 and i < params.max_iters:
        grad = _finite(model.gradient(cur), "discriminant gradient", i + 1)
        if discrete:
            def within(targets, cur=cur):
                D = np.where(np.isnan(targets), 0.0, targets - cur)
                after = np.repeat((cur - x)[None, :], targets.size, axis=0) + np.diag(D)
                return _natural_rows(kind, after) <= c_max
            _, cands = _candidate_moves(cons, cur, x, grad, params.top_k, within)
            if not len(cands):
                break
            gs = model.decision_function(cands)
            k = int(np.argmin(gs))
            if not gs[k] < g_cur:
                break
            nxt, g_n = cands[k], float(gs[k])
        else:
            t = params.step_size
            for _ in range(30):
                nxt = _finite(project_budget(cur - t * grad, x, kind, c_max, cons), "iterate", i + 1)
                g_n = _g(model, nxt)
                if not (params.backtracking and g_n > g_cur):
                    break
                t *= 0.5
            if np.array_equal(nxt, cur) or abs(g_n - g_cur) < params.epsilon:
                if g_n < g_best:
                    best, g_best = nxt, g_n
                break
        i += 1
        traj.append((_norm(kind, nxt - x), g_n, nxt.copy() if keep_points else None))
        if g_n < g_best:
            best, g_best = nxt, g_n
        cur, g_cur = nxt, g_n
    best = np.array(best, dtype=float)
    return EvasionResult(best, distance(kind, best, x), g_best, g_best < 0, "self", i, traj)


def attack_frontier(model, x, kind: str, constraints: ConstraintSet | None, params: SolverParams | None,
                    budgets: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Attacked points for an ascending sweep of budgets from one descent.

    A single budgeted descent is run at ``max(budgets)``.  For each budget the
    candidates are the iterates within it plus, in continuous spaces, the
    projection onto that budget of the first iterate beyond it; the lowest
    ``g`` wins and a running minimum over budgets makes ``g`` non-increasing.

    Returns ``(points, g_values)`` with one row per budget.
    """
    budgets = np.asarray(budgets, dtype=float)
    if budgets.size == 0 or np.any(np.diff(budgets) < 0) or budgets[0] < 0:
        raise EvasionError("budgets must be non-empty, ascending and non-negative")
    x = np.asarray(x, dtype=float)
    cons = constraints or ConstraintSet.unbounded(x.size)
    res = budgeted_attack(model, x, kind, cons, params, float(budgets[-1]), keep_points=True)
    costs = np.array([c for c, _, _ in res.trajectory])
    gvals = np.array([g for _, g, _ in res.trajectory])
    points = [p for _, _, p in res.trajectory]
    out_x = np.empty((budgets.size, x.size))
    out_g = np.empty(budgets.size)
    prev_x, prev_g = x, np.inf
    for b, budget in enumerate(budgets):
        inside = np.flatnonzero(costs <= budget)
        k = inside[np.argmin(gvals[inside])]
        cand_x, cand_g = points[k], gvals[k]
        beyond = np.flatnonzero(costs > budget)
        if beyond.size and not cons.all_discrete:
            p = project_budget(points[beyond[0]], x, kind, budget, cons)
            gp = _g(model, p)
            if gp < cand_g:
                cand_x, cand_g = p, gp
        if cand_g > prev_g:
            cand_x, cand_g = prev_x, prev_g
        out_x[b], out_g[b] = cand_x, cand_g
        prev_x, prev_g = cand_x, cand_g
    return out_x, out_g


@dataclass(frozen=True)
class AttackSpec:
    """Mask-independent attack description.

    The box and grid constraints come from the feature domains of whatever
    feature subset is being attacked, so only the distance, the monotone
    flag and the solver knobs are fixed here.
    """

    kind: str = L1
    params: SolverParams = field(default_factory=SolverParams)
    monotone_increase: bool = False

    def __post_init__(self):
        _check_kind(self.kind)

    def constraints(self, domains: Sequence[FeatureDomain]) -> ConstraintSet:
        return ConstraintSet.from_domains(domains, self.monotone_increase)

    def to_json(self) -> dict:
        p = self.params
        return {"kind": self.kind, "monotone_increase": self.monotone_increase,
                "params": {k: getattr(p, k) for k in p.__dataclass_fields__}}

    @classmethod
    def from_json(cls, obj: dict) -> "AttackSpec":
        return cls(obj.get("kind", L1), SolverParams(**obj.get("params", {})),
                   bool(obj.get("monotone_increase", False)))
