"""Locally discriminative rank-one basis generation.

Training data is divided into regions by k-means; around each region
center, the J nearest neighbors from each class (for several J levels)
feed a local Fisher discriminant analysis whose top directions become
unit-norm basis vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import BasisSet, Dataset

__all__ = ["BasisGenConfig", "kmeans", "local_fda", "generate_basis"]


@dataclass(frozen=True)
class BasisGenConfig:
    """Knobs for basis generation.

    num_regions=None derives the region count from basis_budget so the
    budget is reachable: ceil(budget / (len(J_levels) * (C - 1))).
    """

    num_regions: int | None = None
    J_levels: tuple[int, ...] = (10, 20, 50)
    max_directions_per_fda: int | None = None  # None means C_local - 1
    scatter_ridge: float = 1e-6
    basis_budget: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not self.J_levels or any(j < 1 for j in self.J_levels):
            raise ValueError("J_levels must be nonempty with all entries >= 1")
        if self.num_regions is not None and self.num_regions < 1:
            raise ValueError("num_regions must be >= 1")
        if self.basis_budget is not None and self.basis_budget < 1:
            raise ValueError("basis_budget must be >= 1")
        if self.scatter_ridge < 0:
            raise ValueError("scatter_ridge must be >= 0")


def _sq_dists_to(X, centers):
    # (n, m) squared Euclidean distances, no sqrt needed for argmin
    x2 = np.einsum("ij,ij->i", X, X)[:, None]
    c2 = np.einsum("ij,ij->i", centers, centers)[None, :]
    d = x2 + c2 - 2.0 * (X @ centers.T)
    np.maximum(d, 0.0, out=d)
    return d


def _kmeans_pp_init(X, m, rng):
    n = X.shape[0]
    centers = np.empty((m, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = _sq_dists_to(X, centers[:1])[:, 0]
    for i in range(1, m):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center; duplicates are fine
            for j in range(i, m):
                centers[j] = X[int(rng.integers(n))]
            break
        probs = closest / total
        pick = int(rng.choice(n, p=probs))
        centers[i] = X[pick]
        closest = np.minimum(closest, _sq_dists_to(X, centers[i : i + 1])[:, 0])
    return centers


def kmeans(X, m: int, seed: int, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; deterministic given seed.

    Runs to a local fixed point: on return each center is the mean of its
    assigned points (empty clusters are relocated to the point farthest
    from its current center, smallest index on ties).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("kmeans needs a nonempty (n, D) matrix")
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(X, m, rng)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d = _sq_dists_to(X, centers)
        new_assign = np.argmin(d, axis=1)
        # relocate empty clusters deterministically before accepting
        counts = np.bincount(new_assign, minlength=m)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            dist_own = d[np.arange(n), new_assign]
            for e in empties:
                far = int(np.argmax(dist_own))
                centers[e] = X[far]
                dist_own[far] = -1.0  # do not reuse the same point
            continue
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(m):
            centers[j] = X[assign == j].mean(axis=0)
    return centers


def local_fda(X_local, y_local, ridge: float) -> np.ndarray:
    """Fisher discriminant directions for a local neighborhood.

    Solves S_b v = lambda (S_w + eps I) v with eps = ridge * trace(S_w) / D
    and returns up to min(C_local - 1, D) unit-norm eigenvectors of largest
    eigenvalue, as rows. Fewer than two local classes yields an empty
    (0, D) result (a signal, not a failure).
    """
    X = np.asarray(X_local, dtype=np.float64)
    y = np.asarray(y_local, dtype=np.int64).ravel()
    n, D = X.shape
    classes = np.unique(y)
    if classes.size < 2:
        return np.empty((0, D))
    mean = X.mean(axis=0)
    Sw = np.zeros((D, D))
    Sb = np.zeros((D, D))
    for c in classes:
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        centered = Xc - mc
        Sw += centered.T @ centered
        dm = (mc - mean)[:, None]
        Sb += Xc.shape[0] * (dm @ dm.T)
    eps = ridge * np.trace(Sw) / D
    if eps <= 0.0:
        eps = ridge if ridge > 0 else 1e-12  # degenerate local scatter
    evals, evecs = scipy.linalg.eigh(Sb, Sw + eps * np.eye(D))
    order = np.argsort(evals)[::-1]
    keep = min(classes.size - 1, D)
    out = []
    for idx in order[:keep]:
        if evals[idx] <= 1e-12 * max(1.0, evals[order[0]]):
            break
        v = evecs[:, idx]
        v = v / np.linalg.norm(v)
        # canonical sign: largest-magnitude coordinate positive
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            v = -v
        out.append(v)
    if not out:
        return np.empty((0, D))
    return np.vstack(out)


def _class_neighborhood(X, y, center, classes, J):
    dists = np.linalg.norm(X - center[None, :], axis=1)
    idx_parts = []
    for c in classes:
        members = np.flatnonzero(y == c)
        if members.size == 0:
            continue
        order = members[np.argsort(dists[members], kind="stable")]
        idx_parts.append(order[: min(J, members.size)])
    idx = np.concatenate(idx_parts)
    return X[idx], y[idx]


def generate_basis(dataset: Dataset, cfg: BasisGenConfig) -> BasisSet:
    """Run the full region/J-level FDA pipeline and collect a BasisSet.

    Near-identical directions (|cos| > 1 - 1e-6, sign-insensitive since b
    and -b give the same rank-one atom) are deduplicated. When
    basis_budget is set and exceeded, vectors are kept in round-robin
    order over (region, J) groups up to the budget.
    """
    X, y = dataset.features, dataset.labels
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("basis generation needs at least 2 classes")
    n_dirs = classes.size - 1
    m = cfg.num_regions
    if m is None:
        if cfg.basis_budget is None:
            raise ValueError("set num_regions or basis_budget")
        m = math.ceil(cfg.basis_budget / (len(cfg.J_levels) * n_dirs))
    m = min(m, dataset.n)
    max_dirs = cfg.max_directions_per_fda or n_dirs

    centers = kmeans(X, m, cfg.rng_seed)
    candidates = []  # (region, J, rank, vector)
    for r in range(m):
        for J in cfg.J_levels:
            X_loc, y_loc = _class_neighborhood(X, y, centers[r], classes, J)
            vecs = local_fda(X_loc, y_loc, cfg.scatter_ridge)
            for rank, v in enumerate(vecs[:max_dirs]):
                candidates.append((r, J, rank, v))

    if not candidates:
        raise ValueError("no region produced a discriminant direction")

    # dedup, keeping first occurrence in (region, J, rank) order
    kept: list[tuple[int, int, int, np.ndarray]] = []
    kept_mat = None
    for rec in candidates:
        v = rec[3]
        if kept_mat is not None and np.any(np.abs(kept_mat @ v) > 1.0 - 1e-6):
            continue
        kept.append(rec)
        kept_mat = v[None, :] if kept_mat is None else np.vstack([kept_mat, v])

    budget = cfg.basis_budget
    if budget is not None and len(kept) > budget:
        groups: dict[tuple[int, int], list] = {}
        for rec in kept:
            groups.setdefault((rec[0], rec[1]), []).append(rec)
        keys = sorted(groups)
        picked = []
        depth = 0
        while len(picked) < budget:
            took = False
            for key in keys:
                grp = groups[key]
                if depth < len(grp):
                    picked.append(grp[depth])
                    took = True
                    if len(picked) == budget:
                        break
            if not took:
                break
            depth += 1
        kept = picked

    vectors = np.vstack([rec[3] for rec in kept])
    provenance = tuple((rec[0], rec[1], rec[2]) for rec in kept)
    return BasisSet(vectors, provenance)
