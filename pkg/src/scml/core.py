"""Data model and composed-metric distance computations.

A metric is a nonnegative combination M = sum_i w_i b_i b_i^T of rank-one
atoms built from unit vectors b_i. Distances are always evaluated through
the basis projections b_i^T (x - x'), never through a materialized D x D
matrix; `compose_metric` exists for diagnostics and tests only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Dataset",
    "BasisSet",
    "Triplet",
    "TripletFeatures",
    "compose_metric",
    "dist_global",
    "basis_projections",
    "triplet_features",
    "hinge_triplet_loss",
]


def _as_float_matrix(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Labeled feature matrix with split bookkeeping.

    Labels are dense class ids in [0, num_classes); raw labels are remapped
    at ingestion. A subset of a dataset keeps the parent's num_classes so
    class ids stay meaningful across splits even if a split misses a class.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None
    normalization_state: str = "raw"
    num_classes: int = 0  # 0 means "infer as labels.max() + 1"

    def __post_init__(self):
        feats = _as_float_matrix(self.features, "features")
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 rows and D >= 1 columns")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        if labels.shape[0] != feats.shape[0]:
            raise ValueError("labels length does not match feature rows")
        if labels.min() < 0:
            raise ValueError("labels must be nonnegative class ids")
        ncls = self.num_classes if self.num_classes else int(labels.max()) + 1
        if labels.max() >= ncls:
            raise ValueError("label outside [0, num_classes)")
        if self.normalization_state not in ("raw", "standardized"):
            raise ValueError(f"bad normalization_state {self.normalization_state!r}")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", ncls)
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != feats.shape[1]:
                raise ValueError("feature_names length does not match D")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            feature_names=self.feature_names,
            normalization_state=self.normalization_state,
            num_classes=self.num_classes,
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class BasisSet:
    """Ordered collection of K unit-norm D-vectors (rows of `vectors`).

    `provenance` records where each vector came from: (region id, J level,
    discriminant rank) per row.
    """

    vectors: np.ndarray
    provenance: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        vecs = _as_float_matrix(self.vectors, "vectors")
        if vecs.shape[0] < 1:
            raise ValueError("basis set needs K >= 1 vectors")
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("basis vectors must have unit l2 norm (within 1e-9)")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        if self.provenance:
            prov = tuple(tuple(int(v) for v in rec) for rec in self.provenance)
            if len(prov) != vecs.shape[0]:
                raise ValueError("provenance length does not match K")
            object.__setattr__(self, "provenance", prov)

    @property
    def num_vectors(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def to_dict(self) -> dict:
        return {
            "D": self.dim,
            "K": self.num_vectors,
            "vectors": self.vectors.tolist(),
            "provenance": [list(rec) for rec in self.provenance],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSet":
        vecs = np.asarray(d["vectors"], dtype=np.float64)
        prov = tuple(tuple(rec) for rec in d.get("provenance", ()))
        return cls(vecs, prov)


class Triplet(NamedTuple):
    """Constraint "anchor is closer to target than to impostor"."""

    anchor: int
    target: int
    impostor: int


@dataclass(frozen=True)
class TripletFeatures:
    """Basis-projected triplet features.

    Row r holds p = [(b_i . (x_a - x_t))^2]_i and q = [(b_i . (x_a - x_k))^2]_i
    for triplet r, plus the anchor index (needed by local training).
    These are the only quantities the losses and subgradients need.
    """

    p: np.ndarray
    q: np.ndarray
    anchors: np.ndarray

    def __post_init__(self):
        p = _as_float_matrix(self.p, "p")
        q = _as_float_matrix(self.q, "q")
        anchors = np.asarray(self.anchors, dtype=np.int64).ravel()
        if p.shape != q.shape or p.shape[0] != anchors.shape[0]:
            raise ValueError("p, q, anchors must agree on the triplet count")
        if p.size and (p.min() < 0 or q.min() < 0):
            raise ValueError("projected squares must be nonnegative")
        for arr in (p, q, anchors):
            arr.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "anchors", anchors)

    def __len__(self) -> int:
        return self.p.shape[0]

    @property
    def num_basis(self) -> int:
        return self.p.shape[1]


def _check_weights(w, num_basis) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape[0] != num_basis:
        raise ValueError(f"weight vector has length {w.shape[0]}, expected {num_basis}")
    return w


def compose_metric(w, basis: BasisSet) -> np.ndarray:
    """Assemble M = sum_i w_i b_i b_i^T (diagnostics/tests only).

    The result is symmetric PSD by construction for w >= 0.
    """
    w = _check_weights(w, basis.num_vectors)
    B = basis.vectors
    M = B.T @ (w[:, None] * B)
    return (M + M.T) / 2.0


def dist_global(w, basis: BasisSet, x, y) -> float:
    """Squared composed-metric distance sum_i w_i (b_i . (x - y))^2.

    Evaluated through basis projections in O(KD); M is never materialized.
    """
    w = _check_weights(w, basis.num_vectors)
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != basis.dim or y.shape[0] != basis.dim:
        raise ValueError("point dimension does not match basis dimension")
    proj = basis.vectors @ (x - y)
    return float(np.dot(w, proj * proj))


def basis_projections(basis: BasisSet, X) -> np.ndarray:
    """Project rows of X onto the basis vectors: returns X @ B^T, shape (n, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != basis.dim:
        raise ValueError("point dimension does not match basis dimension")
    return X @ basis.vectors.T


def triplet_features(dataset: Dataset, basis: BasisSet, triplets) -> TripletFeatures:
    """Precompute (p, q) for every triplet (rows of an (m, 3) index array)."""
    tri = np.asarray(triplets, dtype=np.int64)
    if tri.ndim != 2 or tri.shape[1] != 3:
        raise ValueError("triplets must be an (m, 3) index array")
    if tri.size and (tri.min() < 0 or tri.max() >= dataset.n):
        raise ValueError("triplet index out of range")
    if basis.dim != dataset.dim:
        raise ValueError("basis dimension does not match dataset")
    X = dataset.features
    B = basis.vectors
    a, t, k = tri[:, 0], tri[:, 1], tri[:, 2]
    p = ((X[a] - X[t]) @ B.T) ** 2
    q = ((X[a] - X[k]) @ B.T) ** 2
    return TripletFeatures(p, q, a)


def hinge_triplet_loss(w, features: TripletFeatures) -> np.ndarray:
    """Per-triplet margin hinge [1 + <w, p> - <w, q>]_+ as an (m,) vector."""
    w = _check_weights(w, features.num_basis)
    margins = 1.0 + (features.p - features.q) @ w
    return np.maximum(0.0, margins)
