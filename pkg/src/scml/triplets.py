"""Triplet constraint construction from labels.

Each instance anchors triplets over its nearest same-label neighbors
(targets) and nearest different-label neighbors (impostors), measured
with the Euclidean distance available before any metric is trained.
"""

from __future__ import annotations

import csv

import numpy as np

from .core import Dataset

__all__ = ["generate_triplets", "triplets_to_csv"]


def generate_triplets(dataset: Dataset, n_targets: int = 3, n_impostors: int = 10) -> np.ndarray:
    """Emit (anchor, target, impostor) index rows, shape (m, 3).

    For each anchor: min(n_targets, class size - 1) nearest same-label
    neighbors crossed with min(n_impostors, n - class size) nearest
    different-label neighbors. Distance ties break toward the smaller
    index; rows are ordered by anchor, then target rank, then impostor
    rank. Single-member classes contribute no triplets as anchors.
    """
    if n_targets < 1 or n_impostors < 1:
        raise ValueError("n_targets and n_impostors must be >= 1")
    X, y = dataset.features, dataset.labels
    n = dataset.n
    if np.unique(y).size < 2:
        raise ValueError("triplet generation needs at least 2 classes")
    x2 = np.einsum("ij,ij->i", X, X)
    rows = []
    for a in range(n):
        d = x2 + x2[a] - 2.0 * (X @ X[a])
        d[a] = np.inf  # never pair an anchor with itself
        same = np.flatnonzero(y == y[a])
        same = same[same != a]
        diff = np.flatnonzero(y != y[a])
        targets = same[np.argsort(d[same], kind="stable")][:n_targets]
        impostors = diff[np.argsort(d[diff], kind="stable")][:n_impostors]
        if targets.size == 0:
            continue
        for t in targets:
            for k in impostors:
                rows.append((a, t, k))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def triplets_to_csv(triplets, path) -> None:
    """Debug export of triplet index rows."""
    tri = np.asarray(triplets, dtype=np.int64)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["anchor", "target", "impostor"])
        for a, t, k in tri:
            writer.writerow([int(a), int(t), int(k)])
