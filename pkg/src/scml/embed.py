"""Dimensionality reduction: PCA preprocessing and the RBF kernel-PCA
embedding that feeds the local metric's weight function.

Kernel convention: k(x, x') = exp(-||x - x'||^2 / (2 sigma^2)) with sigma
set to the median pairwise Euclidean distance of the fitted data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist

__all__ = [
    "PcaModel",
    "KpcaModel",
    "pca_fit",
    "pca_transform",
    "median_bandwidth",
    "kpca_fit",
    "kpca_transform",
]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, D), orthonormal rows

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "components": self.components.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["components"], dtype=np.float64),
        )


def _canonical_signs(components):
    # flip each row so its largest-magnitude coordinate is positive
    out = components.copy()
    for i, row in enumerate(out):
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            out[i] = -row
    return out


def pca_fit(X, n_components: int) -> PcaModel:
    """Top principal directions of mean-centered X, by decreasing variance."""
    X = np.asarray(X, dtype=np.float64)
    n, D = X.shape
    if not 1 <= n_components <= min(n, D):
        raise ValueError(f"need 1 <= n_components <= min(n, D) = {min(n, D)}")
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    return PcaModel(mean, _canonical_signs(vt[:n_components]))


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    Z = (np.atleast_2d(X) - model.mean) @ model.components.T
    return Z[0] if single else Z


def median_bandwidth(X) -> float:
    """Median over all n(n-1)/2 pairwise Euclidean distances."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero; bandwidth undefined")
    return med


@dataclass(frozen=True)
class KpcaModel:
    """RBF kernel PCA with the centering statistics needed out of sample."""

    train_points: np.ndarray
    bandwidth: float
    centered_alphas: np.ndarray  # (n, d): eigenvectors scaled by 1/sqrt(lambda)
    gram_row_means: np.ndarray
    gram_mean: float

    @property
    def out_dim(self) -> int:
        return self.centered_alphas.shape[1]

    def to_dict(self) -> dict:
        return {
            "train_points": self.train_points.tolist(),
            "bandwidth": self.bandwidth,
            "centered_alphas": self.centered_alphas.tolist(),
            "gram_row_means": self.gram_row_means.tolist(),
            "gram_mean": self.gram_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KpcaModel":
        return cls(
            np.asarray(d["train_points"], dtype=np.float64),
            float(d["bandwidth"]),
            np.asarray(d["centered_alphas"], dtype=np.float64),
            np.asarray(d["gram_row_means"], dtype=np.float64),
            float(d["gram_mean"]),
        )


def _rbf_kernel(A, B, sigma):
    a2 = np.einsum("ij,ij->i", A, A)[:, None]
    b2 = np.einsum("ij,ij->i", B, B)[None, :]
    sq = a2 + b2 - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


def kpca_fit(X, n_components: int, bandwidth: float) -> KpcaModel:
    """Eigendecompose the double-centered RBF Gram matrix.

    Keeps the top n_components eigenpairs with positive eigenvalue; if
    fewer are positive the output dimension is truncated with a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= n_components <= n:
        raise ValueError("need 1 <= n_components <= n")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    K = _rbf_kernel(X, X, bandwidth)
    row_means = K.mean(axis=1)
    gram_mean = float(K.mean())
    Kc = K - row_means[:, None] - row_means[None, :] + gram_mean
    evals, evecs = scipy.linalg.eigh(Kc)
    order = np.argsort(evals)[::-1]
    tol = 1e-12 * max(1.0, float(evals[order[0]]))
    pos = [i for i in order[:n_components] if evals[i] > tol]
    if len(pos) < n_components:
        warnings.warn(
            f"kernel PCA: only {len(pos)} positive eigenvalues available, "
            f"truncating from {n_components}",
            RuntimeWarning,
        )
    if not pos:
        raise ValueError("centered Gram matrix has no positive eigenvalue")
    lam = evals[pos]
    V = _canonical_signs(evecs[:, pos].T).T
    alphas = np.ascontiguousarray(V / np.sqrt(lam)[None, :])
    return KpcaModel(X, float(bandwidth), alphas, row_means, gram_mean)


def kpca_transform(model: KpcaModel, X) -> np.ndarray:
    """Embed new points with the same centering as the fit."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    K_new = _rbf_kernel(np.atleast_2d(X), model.train_points, model.bandwidth)
    Kc = (
        K_new
        - K_new.mean(axis=1)[:, None]
        - model.gram_row_means[None, :]
        + model.gram_mean
    )
    Z = Kc @ model.centered_alphas
    return Z[0] if single else Z
