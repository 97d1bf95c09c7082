import itertools

import numpy as np
import pytest

from wafs.classifier import Kernel, TrainConfig, train
from wafs.data import Dataset, FeatureDomain

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def boolean_instance(rng: np.random.Generator, d: int, n: int = 60, rbf: bool = False):
    """Random Boolean dataset with a linear latent rule and a trained SVM on it."""
    w = rng.normal(size=d)
    X = (rng.random((n, d)) < 0.5).astype(float)
    s = X @ w + rng.normal(scale=0.5, size=n)
    y = np.where(s > np.median(s), 1, -1)
    ds = Dataset(X, y, tuple(FeatureDomain.boolean() for _ in range(d)))
    kernel = Kernel("rbf", 0.5) if rbf else Kernel("linear")
    return ds, train(ds, TrainConfig(C=1.0, kernel=kernel))


def hypercube(d: int) -> np.ndarray:
    return np.array(list(itertools.product([0.0, 1.0], repeat=d)))


def exhaustive_min_l1(model, x: np.ndarray, cube: np.ndarray, g_cube: np.ndarray | None = None) -> float:
    """Smallest Hamming distance from ``x`` to a vertex with ``g < 0`` (inf if none)."""
    g = model.decision_function(cube) if g_cube is None else g_cube
    ok = g < 0
    if not ok.any():
        return float("inf")
    return float(np.abs(cube[ok] - x).sum(1).min())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
