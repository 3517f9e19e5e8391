"""Dataset utilities: train-statistics standardization, synthetic
generators used by the demos and the test harness, and loaders for the
UCI benchmark tables.

The UCI loaders look for CSV files (last column = label) under
$SCML_DATA_DIR or ./data and fall back to OpenML when the network is
available; they raise DatasetUnavailable otherwise.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .core import Dataset

__all__ = [
    "standardize",
    "make_two_gaussians",
    "make_xor_mixture",
    "make_multitask_shared",
    "make_segment_analog",
    "load_vehicle",
    "load_segment",
    "DatasetUnavailable",
]


class DatasetUnavailable(RuntimeError):
    """Raised when a benchmark dataset cannot be found locally or fetched."""


def standardize(train: Dataset, *others: Dataset):
    """Zero-mean unit-variance per feature, statistics from train only.

    Constant features keep scale 1. Returns the standardized train set
    followed by the other sets transformed with the train statistics.
    """
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std > 0, std, 1.0)

    def apply(ds: Dataset) -> Dataset:
        return Dataset(
            (ds.features - mean) / std,
            ds.labels,
            feature_names=ds.feature_names,
            normalization_state="standardized",
            num_classes=ds.num_classes,
        )

    out = [apply(train)] + [apply(ds) for ds in others]
    return out[0] if not others else tuple(out)


def make_two_gaussians(n: int = 200, separation: float = 4.0, seed: int = 0) -> Dataset:
    """Two classes separated along the first axis, isotropic noise."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(0.0, 1.0, size=(half, 2)) + np.array([-separation / 2, 0.0])
    b = rng.normal(0.0, 1.0, size=(n - half, 2)) + np.array([separation / 2, 0.0])
    X = np.vstack([a, b])
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm])


def make_xor_mixture(n: int = 400, spread: float = 0.6, seed: int = 0) -> Dataset:
    """XOR-style two-class mixture: each class lives in two opposite blobs.

    No single global metric separates it well; locally varying weights do.
    """
    rng = np.random.default_rng(seed)
    quarter = n // 4
    centers = [(-2, -2), (2, 2), (-2, 2), (2, -2)]
    labels = [0, 0, 1, 1]
    xs, ys = [], []
    for (cx, cy), lab in zip(centers, labels):
        pts = rng.normal(0.0, spread, size=(quarter, 2)) + np.array([cx, cy])
        xs.append(pts)
        ys.append(np.full(quarter, lab, dtype=int))
    X = np.vstack(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(X.shape[0])
    return Dataset(X[perm], y[perm])


def make_multitask_shared(
    n_per_task: int = 2000,
    dim: int = 20,
    num_tasks: int = 3,
    shared_dim: int = 5,
    n_modes: int = 2,
    seed: int = 0,
):
    """Related binary tasks whose class structure lives in one shared subspace.

    Every class is a mixture of n_modes blobs whose centers sit in the
    first shared_dim coordinates and are identical across tasks; the
    remaining coordinates are task-specific noise. Basis elements
    generated from any one task are therefore useful for all of them.
    Returns a list of Datasets.
    """
    master = np.random.default_rng(seed)
    centers = {c: master.normal(0.0, 2.5, size=(n_modes, shared_dim)) for c in range(2)}
    tasks = []
    for t in range(num_tasks):
        rng = np.random.default_rng(seed + 101 * (t + 1))
        half = n_per_task // 2
        y = np.concatenate([np.zeros(half, dtype=int), np.ones(n_per_task - half, dtype=int)])
        X = rng.normal(0.0, 1.0, size=(n_per_task, dim))
        modes = rng.integers(n_modes, size=n_per_task)
        for c in range(2):
            for m in range(n_modes):
                sel = (y == c) & (modes == m)
                X[sel, :shared_dim] += centers[c][m]
        perm = rng.permutation(n_per_task)
        tasks.append(Dataset(X[perm], y[perm]))
    return tasks


def make_segment_analog(n: int = 2310, dim: int = 19, num_classes: int = 7, seed: int = 0) -> Dataset:
    """Synthetic stand-in matching the Segment benchmark's scale.

    Each class is a mixture of anisotropic Gaussian clusters whose
    discriminative directions vary across regions of the space.
    """
    rng = np.random.default_rng(seed)
    per_class = n // num_classes
    xs, ys = [], []
    for c in range(num_classes):
        remaining = per_class if c < num_classes - 1 else n - per_class * (num_classes - 1)
        n_clusters = 2 + c % 2
        sizes = np.full(n_clusters, remaining // n_clusters)
        sizes[: remaining - sizes.sum()] += 1
        for s in sizes:
            center = rng.normal(0.0, 3.0, size=dim)
            scales = rng.uniform(0.3, 1.2, size=dim)
            xs.append(rng.normal(0.0, 1.0, size=(s, dim)) * scales + center)
            ys.append(np.full(s, c, dtype=int))
    X = np.vstack(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(X.shape[0])
    return Dataset(X[perm], y[perm])


def _search_local(name: str, data_dir=None):
    candidates = []
    if data_dir:
        candidates.append(Path(data_dir) / f"{name}.csv")
    env = os.environ.get("SCML_DATA_DIR")
    if env:
        candidates.append(Path(env) / f"{name}.csv")
    candidates.append(Path("data") / f"{name}.csv")
    for path in candidates:
        if path.is_file():
            return path
    return None


def _fetch_openml(name: str) -> Dataset:
    from sklearn.datasets import fetch_openml

    bunch = fetch_openml(name=name, version=1, as_frame=False, parser="liac-arff")
    X = np.asarray(bunch.data, dtype=np.float64)
    raw = np.asarray(bunch.target)
    _, labels = np.unique(raw, return_inverse=True)
    return Dataset(X, labels.astype(np.int64))


def _load_benchmark(name: str, data_dir=None) -> Dataset:
    path = _search_local(name, data_dir)
    if path is not None:
        from .cli import ingest

        return ingest(path, "csv")
    try:
        return _fetch_openml(name)
    except Exception as exc:  # no network, missing sklearn, ...
        raise DatasetUnavailable(
            f"{name} dataset unavailable: no {name}.csv under $SCML_DATA_DIR or "
            f"./data, and the OpenML fetch failed ({type(exc).__name__}: {exc}). "
            f"Provide a CSV whose last column is the class label."
        ) from exc


def load_vehicle(data_dir=None) -> Dataset:
    """Statlog vehicle silhouettes (846 x 18, 4 classes)."""
    return _load_benchmark("vehicle", data_dir)


def load_segment(data_dir=None) -> Dataset:
    """Statlog image segmentation (2310 x 19, 7 classes)."""
    return _load_benchmark("segment", data_dir)
