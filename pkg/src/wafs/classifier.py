"""Soft-margin SVMs trained by SMO, with discriminant gradients.

The trainer solves the standard dual

    min_a  1/2 a^T Q a - 1^T a,   Q_ij = y_i y_j k(x_i, x_j),
    s.t.   0 <= a_i <= C,  y^T a = 0

by pairwise coordinate descent on the maximal violating pair (ties broken by
the lowest index), which makes training fully deterministic.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, FeatureMask, FoldPlan

FORMAT_VERSION = 1
_TAU = 1e-12


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Kernel:
    kind: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf kernel needs gamma > 0")

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if self.kind == "linear":
            return A @ B.T
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class TrainConfig:
    """SVM hyper-parameters.

    ``max_passes`` bounds the number of SMO pair updates to
    ``max_passes * n_train``.
    """

    C: float = 1.0
    kernel: Kernel = field(default_factory=Kernel)
    tolerance: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def to_json(self) -> dict:
        return {"C": self.C, "kernel": asdict(self.kernel), "tolerance": self.tolerance,
                "max_passes": self.max_passes}

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(C=obj["C"], kernel=Kernel(**obj.get("kernel", {})),
                   tolerance=obj.get("tolerance", 1e-3), max_passes=obj.get("max_passes", 1000))


def make_grid(Cs: Sequence[float], gammas: Sequence[float] | None = None, **kw) -> list[TrainConfig]:
    """Cartesian grid; ``gammas=None`` gives linear-kernel configs."""
    if gammas is None:
        return [TrainConfig(C=c, kernel=Kernel("linear"), **kw) for c in Cs]
    return [TrainConfig(C=c, kernel=Kernel("rbf", g), **kw) for c in Cs for g in gammas]


PAPER_C_GRID = tuple(2.0**k for k in range(-10, 11))
PAPER_GAMMA_GRID = tuple(2.0**k for k in range(-3, 4))


# ---------------------------------------------------------------------- models


class _ModelBase:
    mask: FeatureMask
    bias: float

    @property
    def dim(self) -> int:
        return self.mask.cardinality

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ValueError(f"input has {X.shape[-1]} features, model expects {self.dim}")
        return X

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)


@dataclass(frozen=True, eq=False)
class LinearModel(_ModelBase):
    """``g(x) = <w, x> + b``."""

    weights: np.ndarray
    bias: float
    mask: FeatureMask
    converged: bool = True
    train_config: TrainConfig | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size != self.mask.cardinality:
            raise ValueError("weights length must equal mask cardinality")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise ValueError("non-finite model parameters")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return X @ self.weights + self.bias

    def gradient(self, x) -> np.ndarray:
        self._check(x)
        return self.weights.copy()

    def gradients(self, X) -> np.ndarray:
        X = np.atleast_2d(self._check(X))
        return np.broadcast_to(self.weights, X.shape).copy()

    def shifted(self, tau: float) -> "LinearModel":
        """Same model with the decision offset ``tau`` folded into the bias."""
        return LinearModel(self.weights, self.bias - tau, self.mask, self.converged, self.train_config)


@dataclass(frozen=True, eq=False)
class KernelModel(_ModelBase):
    """``g(x) = sum_i a_i y_i k(x, x_i) + b`` over the support vectors."""

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    kernel: Kernel
    mask: FeatureMask
    converged: bool = True
    train_config: TrainConfig | None = None

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=float)
        coef = np.array(self.dual_coeffs, dtype=float)
        if sv.ndim != 2 or sv.shape[0] < 1 or sv.shape[1] != self.mask.cardinality:
            raise ValueError("support_vectors must be s x cardinality(mask) with s >= 1")
        if coef.shape != (sv.shape[0],):
            raise ValueError("one dual coefficient per support vector")
        sv.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coeffs", coef)
        object.__setattr__(self, "bias", float(self.bias))

    def _k_row(self, x: np.ndarray) -> np.ndarray:
        if self.kernel.kind == "linear":
            return self.support_vectors @ x
        diff = self.support_vectors - x
        return np.exp(-self.kernel.gamma * np.einsum("ij,ij->i", diff, diff))

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        if X.ndim == 1:
            return float(self._k_row(X) @ self.dual_coeffs + self.bias)
        return self.kernel(X, self.support_vectors) @ self.dual_coeffs + self.bias

    def gradients(self, X) -> np.ndarray:
        X = np.atleast_2d(self._check(X))
        if self.kernel.kind == "linear":
            return np.broadcast_to(self.dual_coeffs @ self.support_vectors, X.shape).copy()
        K = self.kernel(X, self.support_vectors) * self.dual_coeffs  # (m, s)
        # sum_i c_i * (-2 gamma) k_i (x - x_i)
        return -2.0 * self.kernel.gamma * (K.sum(1)[:, None] * X - K @ self.support_vectors)

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        if self.kernel.kind == "linear":
            return self.dual_coeffs @ self.support_vectors
        kc = self._k_row(x) * self.dual_coeffs
        return -2.0 * self.kernel.gamma * (kc.sum() * x - kc @ self.support_vectors)

    def shifted(self, tau: float) -> "KernelModel":
        return KernelModel(self.support_vectors, self.dual_coeffs, self.bias - tau, self.kernel,
                           self.mask, self.converged, self.train_config)


TrainedModel = LinearModel | KernelModel


def discriminant(model: TrainedModel, x) -> float:
    """``g(x)`` for a single sample; label is ``+1`` iff ``g(x) >= 0``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("discriminant expects a single sample")
    return float(model.decision_function(x))


def discriminant_gradient(model: TrainedModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("discriminant_gradient expects a single sample")
    return model.gradient(x)


def to_linear(model: KernelModel) -> LinearModel:
    """Collapse a linear-kernel expansion to explicit weights."""
    if model.kernel.kind != "linear":
        raise ValueError("only linear-kernel models can be collapsed")
    w = model.dual_coeffs @ model.support_vectors
    return LinearModel(w, model.bias, model.mask, model.converged, model.train_config)


# --------------------------------------------------------------------- trainer


@dataclass
class SMOResult:
    alpha: np.ndarray
    bias: float
    converged: bool
    iterations: int
    objective: float


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(0.5 * ay @ K @ ay - alpha.sum())


def _bias(alpha, y, grad, C) -> float:
    # grad = Q alpha - 1; y_i - f_i = -y_i * grad_i
    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    lower = ((alpha == 0) & (y == 1)) | ((alpha == C) & (y == -1))
    upper = ((alpha == 0) & (y == -1)) | ((alpha == C) & (y == 1))
    lo = yg[lower].max() if lower.any() else None
    hi = yg[upper].min() if upper.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100_000) -> SMOResult:
    """Solve the SVM dual for a precomputed kernel matrix ``K``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    Q = K * np.outer(y, y)
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    converged = False
    it = 0
    while it < max_iter:
        yg = -y * grad
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        cand_i = np.where(up, yg, -np.inf)
        cand_j = np.where(low, yg, np.inf)
        i = int(np.argmax(cand_i))
        j = int(np.argmin(cand_j))
        if cand_i[i] - cand_j[j] < tol:
            converged = True
            break
        it += 1
        Qi, Qj = Q[i], Q[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Qi[j]
            delta = (-grad[i] - grad[j]) / max(quad, _TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qi[j]
            delta = (grad[i] - grad[j]) / max(quad, _TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        grad += Qi * (ni - ai) + Qj * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    b = _bias(alpha, y, grad, C)
    # Q alpha = grad + 1
    obj = float(0.5 * alpha @ (grad + 1.0) - alpha.sum())
    return SMOResult(alpha, b, converged, it, obj)


def train(ds: Dataset, cfg: TrainConfig, mask: FeatureMask | None = None, collapse: bool = True) -> TrainedModel:
    """Train an SVM on ``ds``.

    ``mask`` records which original features the columns of ``ds`` are; it
    defaults to all of them.  Linear-kernel models are returned as
    :class:`LinearModel` unless ``collapse`` is false.
    """
    y = ds.labels
    if not ((y == 1).any() and (y == -1).any()):
        raise TrainingError("training data must contain both classes")
    if mask is None:
        mask = FeatureMask.full(ds.d)
    if mask.cardinality != ds.d:
        raise ValueError(f"mask selects {mask.cardinality} features but data has {ds.d}")
    X = ds.features
    K = cfg.kernel(X, X)
    res = smo(K, y, cfg.C, cfg.tolerance, max(1000, cfg.max_passes * ds.n))
    if not res.converged:
        warnings.warn(f"SMO stopped after {res.iterations} updates without meeting tolerance "
                      f"{cfg.tolerance}", ConvergenceWarning, stacklevel=2)
    sv = res.alpha > 0
    coef = res.alpha[sv] * y[sv]
    model = KernelModel(X[sv], coef, res.bias, cfg.kernel, mask, res.converged, cfg)
    if cfg.kernel.kind == "linear" and collapse:
        w = coef @ X[sv]
        return LinearModel(w, res.bias, mask, res.converged, cfg)
    return model


# ----------------------------------------------------------------- model choice


def accuracy_of(model: TrainedModel, X, y) -> float:
    return float(np.mean(model.predict(X) == np.asarray(y)))


def grid_search(ds: Dataset, grid: Sequence[TrainConfig], folds: FoldPlan) -> TrainConfig:
    """Grid entry with the best mean cross-validated accuracy.

    Ties go to the smaller ``C``, then the smaller ``gamma`` (linear kernels
    count as ``gamma = 0``).  Cells whose training fails on every fold are
    dropped.
    """
    if not grid:
        raise ValueError("empty hyper-parameter grid")
    if len(grid) == 1:
        return grid[0]
    best, best_key = None, None
    for cfg in grid:
        scores = []
        for tr, va in folds.splits():
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    model = train(ds.subset(tr), cfg)
            except TrainingError:
                continue
            scores.append(accuracy_of(model, ds.features[va], ds.labels[va]))
        if not scores:
            continue
        gamma = cfg.kernel.gamma if cfg.kernel.kind == "rbf" else 0.0
        key = (-float(np.mean(scores)), cfg.C, gamma)
        if best_key is None or key < best_key:
            best, best_key = cfg, key
    if best is None:
        raise TrainingError("every grid cell failed to train")
    return best


# ---------------------------------------------------------------- persistence


def model_to_json(model: TrainedModel) -> dict:
    out = {"format_version": FORMAT_VERSION}
    if isinstance(model, LinearModel):
        out.update(kind="linear", weights=model.weights.tolist(), kernel={"kind": "linear", "gamma": 1.0})
    else:
        out.update(kind="kernel", support_vectors=model.support_vectors.tolist(),
                   dual_coeffs=model.dual_coeffs.tolist(), kernel=asdict(model.kernel))
    out.update(bias=model.bias, mask=model.mask.to_list(), converged=model.converged,
               train_config=None if model.train_config is None else model.train_config.to_json())
    return out


def model_from_json(obj: dict) -> TrainedModel:
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise ModelFormatError("not a model file")
    if obj["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {obj['format_version']!r}")
    try:
        mask = FeatureMask(np.array(obj["mask"], dtype=bool))
        cfg = None if obj.get("train_config") is None else TrainConfig.from_json(obj["train_config"])
        conv = bool(obj.get("converged", True))
        if obj["kind"] == "linear":
            return LinearModel(np.array(obj["weights"], dtype=float), obj["bias"], mask, conv, cfg)
        if obj["kind"] == "kernel":
            return KernelModel(np.array(obj["support_vectors"], dtype=float).reshape(-1, mask.cardinality),
                               np.array(obj["dual_coeffs"], dtype=float), obj["bias"],
                               Kernel(**obj["kernel"]), mask, conv, cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model: {exc}") from exc
    raise ModelFormatError(f"unknown model kind {obj.get('kind')!r}")


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc
    return model_from_json(obj)
