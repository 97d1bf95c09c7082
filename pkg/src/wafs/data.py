"""Datasets, feature domains, masks, folds and synthetic generators.

Labels are always -1 (legitimate) or +1 (malicious).  Datasets are immutable:
their arrays are flagged read-only at construction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ._rng import SplitMix64

DENSE_CSV = "dense-csv"
SPARSE = "sparse-indexed"


class DataError(ValueError):
    """Raised for malformed input data or violated dataset invariants."""


@dataclass(frozen=True)
class FeatureDomain:
    """Admissible values of one feature.

    ``kind`` is ``"continuous"`` (closed interval ``[lo, hi]``), ``"boolean"``
    or ``"quantized"`` (a strictly increasing finite set of ``levels``).
    """

    kind: str
    lo: float = 0.0
    hi: float = 1.0
    levels: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "continuous":
            if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
                raise DataError(f"continuous domain needs finite lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "boolean":
            object.__setattr__(self, "lo", 0.0)
            object.__setattr__(self, "hi", 1.0)
            object.__setattr__(self, "levels", (0.0, 1.0))
        elif self.kind == "quantized":
            levels = tuple(float(v) for v in self.levels)
            if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
                raise DataError("quantized domain needs >= 2 strictly increasing levels")
            if not all(math.isfinite(v) for v in levels):
                raise DataError("quantized levels must be finite")
            object.__setattr__(self, "levels", levels)
            object.__setattr__(self, "lo", levels[0])
            object.__setattr__(self, "hi", levels[-1])
        else:
            raise DataError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "FeatureDomain":
        return cls("continuous", float(lo), float(hi))

    @classmethod
    def boolean(cls) -> "FeatureDomain":
        return cls("boolean")

    @classmethod
    def quantized(cls, levels: Sequence[float]) -> "FeatureDomain":
        return cls("quantized", levels=tuple(levels))

    @property
    def is_discrete(self) -> bool:
        return self.kind != "continuous"

    @property
    def grid(self) -> np.ndarray | None:
        return np.asarray(self.levels) if self.is_discrete else None

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.kind == "continuous":
            return (values >= self.lo) & (values <= self.hi)
        return np.isin(values, np.asarray(self.levels))

    def to_json(self) -> dict:
        if self.kind == "continuous":
            return {"kind": "continuous", "params": {"lo": self.lo, "hi": self.hi}}
        if self.kind == "boolean":
            return {"kind": "boolean", "params": {}}
        return {"kind": "quantized", "params": {"levels": list(self.levels)}}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureDomain":
        try:
            kind = obj["kind"]
            params = obj.get("params", {})
            if kind == "continuous":
                return cls.continuous(params["lo"], params["hi"])
            if kind == "boolean":
                return cls.boolean()
            if kind == "quantized":
                return cls.quantized(params["levels"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad domain entry {obj!r}") from exc
        raise DataError(f"unknown domain kind {kind!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature matrix with one :class:`FeatureDomain` per column."""

    features: np.ndarray
    labels: np.ndarray
    domains: tuple[FeatureDomain, ...]
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty n x d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if not np.all((y == 1) | (y == -1)):
            raise DataError("labels must be -1 or +1")
        domains = tuple(self.domains)
        if len(domains) != X.shape[1]:
            raise DataError(f"{len(domains)} domains for {X.shape[1]} features")
        for j, dom in enumerate(domains):
            if not np.all(dom.contains(X[:, j])):
                bad = X[~dom.contains(X[:, j]), j][0]
                raise DataError(f"feature {j} value {bad!r} outside its {dom.kind} domain")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != X.shape[1]:
                raise DataError("feature_names length does not match d")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "labels", _readonly(y.astype(np.int64)))
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def X(self) -> np.ndarray:
        return self.features

    @property
    def y(self) -> np.ndarray:
        return self.labels

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.features[index], self.labels[index], self.domains, self.feature_names)

    def malicious(self) -> np.ndarray:
        return self.features[self.labels == 1]

    def legitimate(self) -> np.ndarray:
        return self.features[self.labels == -1]

    def same_as(self, other: "Dataset") -> bool:
        """Bit-exact equality of values, labels, domains and names."""
        return (
            self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and np.array_equal(self.labels, other.labels)
            and self.domains == other.domains
            and self.feature_names == other.feature_names
        )


@dataclass(frozen=True, eq=False)
class FeatureMask:
    """Boolean selection vector over the original ``d`` features."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool)
        if bits.ndim != 1:
            raise DataError("mask must be one-dimensional")
        if not bits.any():
            raise DataError("mask selects no feature")
        object.__setattr__(self, "bits", _readonly(bits))

    @classmethod
    def full(cls, d: int) -> "FeatureMask":
        return cls(np.ones(d, dtype=bool))

    @classmethod
    def from_indices(cls, indices, d: int) -> "FeatureMask":
        bits = np.zeros(d, dtype=bool)
        bits[list(indices)] = True
        return cls(bits)

    @property
    def d(self) -> int:
        return self.bits.size

    @cached_property
    def cardinality(self) -> int:
        return int(self.bits.sum())

    @cached_property
    def indices(self) -> np.ndarray:
        return _readonly(np.flatnonzero(self.bits))

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureMask) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"FeatureMask({self.indices.tolist()} of {self.d})"

    def to_list(self) -> list[bool]:
        return [bool(b) for b in self.bits]


def apply_mask(ds: Dataset, mask: FeatureMask) -> Dataset:
    """Keep the selected columns, in their original relative order."""
    if not isinstance(mask, FeatureMask):
        mask = FeatureMask(mask)
    if mask.d != ds.d:
        raise DataError(f"mask length {mask.d} does not match dataset dimension {ds.d}")
    idx = mask.indices
    names = None if ds.feature_names is None else tuple(ds.feature_names[i] for i in idx)
    return Dataset(ds.features[:, idx], ds.labels, tuple(ds.domains[i] for i in idx), names)


# --------------------------------------------------------------------------- I/O


def _parse_label(token: str, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"line {lineno}: label {token!r} is not a number") from None
    if value not in (-1.0, 1.0):
        raise DataError(f"line {lineno}: label {token!r} is not -1 or +1")
    return int(value)


def _parse_value(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"line {lineno}: cannot parse value {token!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: non-finite value {token!r}")
    return value


def infer_domains(X: np.ndarray) -> tuple[FeatureDomain, ...]:
    """Boolean when every value is 0 or 1, else the observed [min, max].

    A constant non-binary column ``v`` gets the interval spanned by 0 and v.
    """
    out = []
    for col in np.asarray(X, dtype=float).T:
        if np.all((col == 0.0) | (col == 1.0)):
            out.append(FeatureDomain.boolean())
            continue
        lo, hi = float(col.min()), float(col.max())
        if lo == hi:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        out.append(FeatureDomain.continuous(lo, hi))
    return tuple(out)


def load_domains(path) -> tuple[FeatureDomain, ...]:
    with open(path, encoding="utf-8") as fh:
        try:
            items = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid domain JSON: {exc}") from exc
    if not isinstance(items, list):
        raise DataError(f"{path}: domain spec must be a JSON list")
    return tuple(FeatureDomain.from_json(item) for item in items)


def save_domains(domains: Sequence[FeatureDomain], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([dom.to_json() for dom in domains], fh, indent=1)
        fh.write("\n")


def _read_dense(path) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "y" not in header:
            raise DataError(f"{path}: header has no 'y' column")
        ycol = header.index("y")
        names = tuple(h for i, h in enumerate(header) if i != ycol)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {lineno}: expected {len(header)} columns, found {len(row)}")
            labels.append(_parse_label(row[ycol].strip(), lineno))
            rows.append([_parse_value(c.strip(), lineno) for i, c in enumerate(row) if i != ycol])
    if not rows:
        raise DataError(f"{path}: no samples")
    return np.array(rows, dtype=float), np.array(labels), names


def _read_sparse(path, n_features: int | None) -> tuple[np.ndarray, np.ndarray]:
    entries, labels = [], []
    max_idx = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            labels.append(_parse_label(tokens[0], lineno))
            row = {}
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataError(f"line {lineno}: malformed entry {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataError(f"line {lineno}: bad feature index {idx_s!r}") from None
                if idx <= prev:
                    raise DataError(f"line {lineno}: indices must be 1-based and strictly increasing")
                if n_features is not None and idx > n_features:
                    raise DataError(f"line {lineno}: index {idx} exceeds dimension {n_features}")
                row[idx] = _parse_value(val_s, lineno)
                prev = idx
            max_idx = max(max_idx, prev)
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: no samples")
    d = n_features if n_features is not None else max_idx
    if d < 1:
        raise DataError(f"{path}: cannot determine feature dimension")
    X = np.zeros((len(entries), d))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return X, np.array(labels)


def load_dataset(path, format: str = DENSE_CSV, domains="infer", n_features: int | None = None) -> Dataset:
    """Read a dataset from a dense CSV or sparse-indexed text file.

    Parameters
    ----------
    path : path-like
    format : {"dense-csv", "sparse-indexed"}
    domains : "infer", a sequence of :class:`FeatureDomain`, or a path to a
        JSON domain spec.
    n_features : int, optional
        Dimension for sparse files; defaults to the largest index seen.
    """
    if not Path(path).exists():
        raise DataError(f"{path}: no such file")
    names = None
    if format == DENSE_CSV:
        X, y, names = _read_dense(path)
    elif format == SPARSE:
        X, y = _read_sparse(path, n_features)
    else:
        raise DataError(f"unknown format {format!r}")
    if isinstance(domains, str) and domains == "infer":
        doms = infer_domains(X)
    elif isinstance(domains, (str, Path)):
        doms = load_domains(domains)
    else:
        doms = tuple(domains)
    return Dataset(X, y, doms, names)


def write_dataset(ds: Dataset, path, format: str = DENSE_CSV) -> None:
    """Write ``ds`` so that :func:`load_dataset` reproduces it bit-exactly."""
    if format == DENSE_CSV:
        names = ds.feature_names or tuple(f"x{j + 1}" for j in range(ds.d))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("y",) + tuple(names))
            for xi, yi in zip(ds.features, ds.labels):
                writer.writerow([str(int(yi))] + [repr(float(v)) for v in xi])
    elif format == SPARSE:
        with open(path, "w", encoding="utf-8") as fh:
            for xi, yi in zip(ds.features, ds.labels):
                parts = ["+1" if yi > 0 else "-1"]
                for j, v in enumerate(xi):
                    if v != 0.0 or math.copysign(1.0, v) < 0:
                        parts.append(f"{j + 1}:{float(v)!r}")
                fh.write(" ".join(parts) + "\n")
    else:
        raise DataError(f"unknown format {format!r}")


# ------------------------------------------------------------------ transforms


def cap_and_normalize(ds: Dataset, cap: float) -> Dataset:
    """Replace each value ``x`` by ``min(x, cap) / cap``.

    Features whose values are all non-negative integers become
    ``Quantized({0, 1/cap, ..., 1})`` when ``cap`` is an integer.
    """
    if not cap > 0:
        raise DataError(f"cap must be positive, got {cap}")
    X = np.minimum(ds.features, cap) / cap
    int_cap = float(cap).is_integer()
    domains = []
    for j, dom in enumerate(ds.domains):
        col = ds.features[:, j]
        is_count = dom.lo >= 0 and bool(np.all(col == np.floor(col)))
        if int_cap and is_count:
            if int(cap) == 1:
                domains.append(FeatureDomain.boolean())
            else:
                domains.append(FeatureDomain.quantized(np.arange(int(cap) + 1) / cap))
        elif dom.is_discrete:
            levels = sorted({min(v, cap) / cap for v in dom.levels})
            if len(levels) >= 2:
                domains.append(FeatureDomain.quantized(levels))
            else:
                domains.append(FeatureDomain.continuous(min(levels[0], 0.0), 1.0))
        else:
            lo, hi = min(dom.lo, cap) / cap, min(dom.hi, cap) / cap
            if not lo < hi:
                lo = min(lo, 0.0)
            domains.append(FeatureDomain.continuous(lo, hi))
    return Dataset(X, ds.labels, tuple(domains), ds.feature_names)


# ----------------------------------------------------------------------- folds


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Stratified assignment of samples to ``k`` folds."""

    k: int
    assignments: np.ndarray
    seed: int

    def splits(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for f in range(self.k):
            val = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            yield train, val

    def __eq__(self, other):
        return (
            isinstance(other, FoldPlan)
            and self.k == other.k
            and self.seed == other.seed
            and np.array_equal(self.assignments, other.assignments)
        )


def stratified_folds(ds_or_labels, k: int, seed: int) -> FoldPlan:
    """Deterministic stratified k-fold assignment.

    Within each class (``-1`` first) the samples are permuted by the seeded
    stream and dealt round-robin; the dealing position carries over between
    classes so fold sizes differ by at most one.
    """
    labels = ds_or_labels.labels if isinstance(ds_or_labels, Dataset) else np.asarray(ds_or_labels)
    if k < 2:
        raise DataError(f"need k >= 2 folds, got {k}")
    rng = SplitMix64(seed)
    assign = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for cls in (-1, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise DataError(f"class {cls:+d} has {idx.size} samples, fewer than k={k} folds")
        perm = idx[rng.permutation(idx.size)]
        assign[perm] = (np.arange(idx.size) + offset) % k
        offset = (offset + idx.size) % k
    return FoldPlan(k, assign, seed)


def stratified_split(ds: Dataset, sizes: Sequence[float], seed: int) -> list[np.ndarray]:
    """Split sample indices into consecutive stratified parts.

    ``sizes`` are fractions of each class; the final part receives whatever
    remains.  Returns one sorted index array per part (``len(sizes) + 1``).
    """
    rng = SplitMix64(seed)
    parts = [[] for _ in range(len(sizes) + 1)]
    for cls in (-1, 1):
        idx = np.flatnonzero(ds.labels == cls)
        perm = idx[rng.permutation(idx.size)]
        start = 0
        for p, frac in enumerate(sizes):
            count = int(round(frac * idx.size))
            parts[p].append(perm[start:start + count])
            start += count
        parts[-1].append(perm[start:])
    return [np.sort(np.concatenate(p)) for p in parts]


# ------------------------------------------------------------------ synthetic


def synth_two_gaussians(n_per_class: int, d: int, separation: float, seed: int) -> Dataset:
    """Two unit-variance isotropic Gaussians at ``-+(separation / 2) * 1``.

    Legitimate rows come first.  Draws are row-major standard normals from
    ``SplitMix64(seed)``: all legitimate rows, then all malicious rows.
    Values are clipped to ``[-(separation/2 + 4), separation/2 + 4]``.
    """
    if n_per_class < 1 or d < 1:
        raise DataError("n_per_class and d must be >= 1")
    rng = SplitMix64(seed)
    half = separation / 2.0
    bound = half + 4.0
    legit = rng.normal(n_per_class * d).reshape(n_per_class, d) - half
    mal = rng.normal(n_per_class * d).reshape(n_per_class, d) + half
    X = np.clip(np.vstack([legit, mal]), -bound, bound)
    y = np.concatenate([-np.ones(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)])
    doms = tuple(FeatureDomain.continuous(-bound, bound) for _ in range(d))
    return Dataset(X, y, doms, tuple(f"x{j + 1}" for j in range(d)))


def synth_robust_fragile(n_per_class: int, d: int = 10, n_fragile: int = 3,
                         noise: float = 0.1, seed: int = 0) -> Dataset:
    """Quantized data mixing easy-to-evade and hard-to-evade features.

    All features live on the grid ``{0, 0.1, ..., 1}``.

    * Fragile features (the first ``n_fragile`` columns) separate the classes
      perfectly but with a narrow gap: legitimate values are drawn from
      ``{0.3, 0.4}``, malicious ones from ``{0.6, 0.7}``.
    * Robust features separate the classes with a wide gap
      (``{0, 0.1, 0.2}`` against ``{0.8, 0.9, 1}``), but each value is
      replaced with probability ``noise`` by a draw from the ambiguous band
      ``{0.4, 0.5, 0.6}``, so no single robust feature is perfect.

    A plain accuracy-driven wrapper prefers the fragile columns; a few robust
    columns together are as accurate and need far larger manipulations to
    evade.
    """
    if n_per_class < 1 or d < 1 or not 0 <= n_fragile <= d:
        raise DataError("invalid generator arguments")
    rng = SplitMix64(seed)
    n = 2 * n_per_class
    y = np.concatenate([-np.ones(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)])
    mal = (y == 1)[:, None]
    u_val = rng.uniform(n * d).reshape(n, d)
    u_noise = rng.uniform(n * d).reshape(n, d)
    u_band = rng.uniform(n * d).reshape(n, d)
    fragile = np.where(mal, 6 + np.floor(u_val * 2), 3 + np.floor(u_val * 2))
    robust = np.where(mal, 8 + np.floor(u_val * 3), np.floor(u_val * 3))
    robust = np.where(u_noise < noise, 4 + np.floor(u_band * 3), robust)
    levels = np.where(np.arange(d)[None, :] < n_fragile, fragile, robust)
    X = levels / 10.0
    grid = tuple(np.arange(11) / 10.0)
    names = tuple(f"fragile{j + 1}" if j < n_fragile else f"robust{j - n_fragile + 1}" for j in range(d))
    return Dataset(X, y, tuple(FeatureDomain.quantized(grid) for _ in range(d)), names)
