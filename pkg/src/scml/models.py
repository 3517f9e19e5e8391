"""Learned metric models: global, multi-task, and local variants, plus
the generalization-bound evaluator.

All models are bound to the BasisSet their weights combine. Distances go
through basis projections; the local model additionally routes the query
point through a kernel-PCA embedding to produce its own weight vector,
so distances from x use x's metric alone and are not symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BasisSet, Dataset, TripletFeatures, basis_projections, triplet_features
from .embed import KpcaModel, kpca_fit, kpca_transform, median_bandwidth
from .optim import TrainConfig, TrainingTrace, fobos_solve, rda_solve

__all__ = [
    "GlobalModel",
    "MultiTaskModel",
    "LocalModel",
    "fit_scml_global",
    "fit_mt_scml",
    "fit_scml_local",
    "local_weights",
    "dist_local",
    "robustness_bound",
    "model_to_dict",
    "model_from_dict",
]


def _projection_sq_dists(proj_q, proj_r, w):
    """(nq, nr) squared distances sum_i w_i (pq_i - pr_i)^2, sparse in w."""
    active = np.flatnonzero(w > 0)
    if active.size == 0:
        return np.zeros((proj_q.shape[0], proj_r.shape[0]))
    sq = np.sqrt(w[active])
    a = proj_q[:, active] * sq
    b = proj_r[:, active] * sq
    a2 = np.einsum("ij,ij->i", a, a)[:, None]
    b2 = np.einsum("ij,ij->i", b, b)[None, :]
    d = a2 + b2 - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


@dataclass
class GlobalModel:
    """Single sparse nonnegative combination w over a basis set."""

    basis: BasisSet
    w: np.ndarray
    beta: float
    trace: TrainingTrace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if w.shape[0] != self.basis.num_vectors:
            raise ValueError("weight length does not match basis size")
        if w.size and w.min() < 0:
            raise ValueError("weights must be nonnegative")
        self.w = w

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.w))

    def distance(self, x, y) -> float:
        from .core import dist_global

        return dist_global(self.w, self.basis, x, y)

    def cross_distances(self, X_query, X_ref) -> np.ndarray:
        pq = basis_projections(self.basis, X_query)
        pr = basis_projections(self.basis, X_ref)
        return _projection_sq_dists(pq, pr, self.w)


@dataclass
class MultiTaskModel:
    """Per-task weight rows over a shared (concatenated) basis set."""

    basis: BasisSet
    W: np.ndarray
    beta: float
    trace: TrainingTrace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != self.basis.num_vectors:
            raise ValueError("W must be (T, K) matching the basis size")
        if W.size and W.min() < 0:
            raise ValueError("weights must be nonnegative")
        self.W = W

    @property
    def num_tasks(self) -> int:
        return self.W.shape[0]

    @property
    def selected_columns(self) -> np.ndarray:
        return np.flatnonzero(np.linalg.norm(self.W, axis=0) > 0)

    def task_model(self, t: int) -> GlobalModel:
        return GlobalModel(self.basis, self.W[t], self.beta)


@dataclass
class LocalModel:
    """Smooth metric tensor: every point gets weights ((a_i . z~) + c_i)^2
    from its kernel-PCA embedding z (z~ appends a constant 1)."""

    basis: BasisSet
    Atilde: np.ndarray
    embedding: KpcaModel
    beta: float
    trace: TrainingTrace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.Atilde, dtype=np.float64)
        if A.shape != (self.embedding.out_dim + 1, self.basis.num_vectors):
            raise ValueError("Atilde must be (embedding dim + 1, K)")
        self.Atilde = A

    @property
    def selected_columns(self) -> np.ndarray:
        return np.flatnonzero(np.linalg.norm(self.Atilde, axis=0) > 0)

    def weights_for(self, X) -> np.ndarray:
        return local_weights(self, X)

    def cross_distances(self, X_query, X_ref) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(X_query, dtype=np.float64))
        pq = basis_projections(self.basis, Xq)
        pr = basis_projections(self.basis, X_ref)
        Wq = local_weights(self, Xq)
        # sum_k w_qk (pq_qk - pr_rk)^2 expanded into three matrix products
        own = np.einsum("qk,qk->q", Wq, pq * pq)[:, None]
        cross = (Wq * pq) @ pr.T
        ref = Wq @ (pr * pr).T
        d = own - 2.0 * cross + ref
        np.maximum(d, 0.0, out=d)
        return d


def local_weights(model: LocalModel, X) -> np.ndarray:
    """Weight vector(s) for arbitrary point(s): ((a_i . z~) + c_i)^2 >= 0."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    Z = kpca_transform(model.embedding, np.atleast_2d(X))
    Zt = np.hstack([Z, np.ones((Z.shape[0], 1))])
    W = (Zt @ model.Atilde) ** 2
    return W[0] if single else W


def dist_local(model: LocalModel, x, y) -> float:
    """Squared distance from x to y under x's own metric (not symmetric)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    w = local_weights(model, x)
    proj = model.basis.vectors @ (x - y)
    return float(np.dot(w, proj * proj))


def fit_scml_global(
    dataset: Dataset,
    basis: BasisSet,
    triplets,
    cfg: TrainConfig,
    validation_fn=None,
) -> GlobalModel:
    """Train the sparse global combination with regularized dual averaging."""
    feats = triplet_features(dataset, basis, triplets)
    w, trace = rda_solve(feats, basis.num_vectors, cfg, validation_fn)
    return GlobalModel(basis, w, cfg.beta, trace=trace)


def fit_mt_scml(
    datasets,
    bases,
    triplets_per_task,
    cfg: TrainConfig,
    validation_fn=None,
) -> MultiTaskModel:
    """Train per-task weights over the union basis with group selection.

    The basis is the concatenation of the per-task bases; every task's
    triplet features are computed against the union so any task can pick
    up elements generated from another task's data.
    """
    if not (len(datasets) == len(bases) == len(triplets_per_task)) or not datasets:
        raise ValueError("need aligned nonempty datasets/bases/triplets lists")
    union = BasisSet(
        np.vstack([b.vectors for b in bases]),
        tuple(rec for b in bases for rec in (b.provenance or _default_prov(b))),
    )
    features = [
        triplet_features(ds, union, tri) for ds, tri in zip(datasets, triplets_per_task)
    ]
    W, trace = rda_solve(
        features, (len(datasets), union.num_vectors), cfg, validation_fn
    )
    return MultiTaskModel(union, W, cfg.beta, trace=trace)


def _default_prov(basis: BasisSet):
    return tuple((-1, -1, i) for i in range(basis.num_vectors))


def fit_scml_local(
    dataset: Dataset,
    basis: BasisSet,
    triplets,
    cfg: TrainConfig,
    embed_dim: int,
    warm: GlobalModel,
    validation_fn=None,
    embedding: KpcaModel | None = None,
) -> LocalModel:
    """Train the metric tensor, warm-started from a global solution.

    Fits the kernel-PCA embedding (median-distance bandwidth) on the
    training features unless a prebuilt one is passed, initializes A = 0
    and c_i = sqrt(w*_i) so the initial tensor reproduces the warm global
    metric, then runs forward-backward splitting. validation_fn, when
    given, receives a LocalModel for the current iterate.
    """
    if warm.basis.num_vectors != basis.num_vectors:
        raise ValueError("warm model must share the basis")
    X = dataset.features
    if embedding is None:
        sigma = median_bandwidth(X)
        embedding = kpca_fit(X, min(embed_dim, dataset.n), sigma)
    emb = embedding
    Z = kpca_transform(emb, X)
    feats = triplet_features(dataset, basis, triplets)
    A0 = np.zeros((emb.out_dim + 1, basis.num_vectors))
    A0[-1] = np.sqrt(warm.w)
    hook = None
    if validation_fn is not None:
        hook = lambda A: validation_fn(LocalModel(basis, A, emb, cfg.beta))  # noqa: E731
    Atilde, trace = fobos_solve(A0, feats, Z, cfg, hook)
    return LocalModel(basis, Atilde, emb, cfg.beta, trace=trace)


def robustness_bound(gamma_cover, R, K_star, beta, U, N, n, delta) -> float:
    """Deviation bound 16*gamma*R*K*/beta + 3U sqrt((N ln 2 + ln(1/delta)) / (0.5 n)).

    The cover size N is caller-supplied; the evaluator is agnostic to the
    cover metric used to obtain it.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0, 1]")
    if N < 1:
        raise ValueError("N must be >= 1")
    first = 16.0 * gamma_cover * R * K_star / beta
    second = 3.0 * U * math.sqrt((N * math.log(2.0) + math.log(1.0 / delta)) / (0.5 * n))
    return first + second


def model_to_dict(model) -> dict:
    """Serialize a model to the JSON schema {kind, basis, params, embedding?, config}."""
    if isinstance(model, GlobalModel):
        return {
            "kind": "global",
            "basis": model.basis.to_dict(),
            "params": {"w": model.w.tolist()},
            "config": {"beta": model.beta},
        }
    if isinstance(model, MultiTaskModel):
        return {
            "kind": "multitask",
            "basis": model.basis.to_dict(),
            "params": {"W": model.W.tolist()},
            "config": {"beta": model.beta},
        }
    if isinstance(model, LocalModel):
        return {
            "kind": "local",
            "basis": model.basis.to_dict(),
            "params": {"Atilde": model.Atilde.tolist()},
            "embedding": model.embedding.to_dict(),
            "config": {"beta": model.beta},
        }
    raise TypeError(f"not a model: {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("kind")
    basis = BasisSet.from_dict(d["basis"])
    beta = float(d["config"]["beta"])
    if kind == "global":
        return GlobalModel(basis, np.asarray(d["params"]["w"], dtype=np.float64), beta)
    if kind == "multitask":
        return MultiTaskModel(basis, np.asarray(d["params"]["W"], dtype=np.float64), beta)
    if kind == "local":
        emb = KpcaModel.from_dict(d["embedding"])
        return LocalModel(
            basis, np.asarray(d["params"]["Atilde"], dtype=np.float64), emb, beta
        )
    raise ValueError(f"unknown model kind {kind!r}")
