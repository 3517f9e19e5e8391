"""Stochastic composite solvers: subgradients, proximal maps, and the two
training loops.

The convex global/multi-task objectives are solved with regularized dual
averaging: each step folds a minibatch subgradient into a running average
gbar and returns the exact minimizer of

    <gbar, w> + beta * reg(w) + (gamma / sqrt(t)) * 0.5 ||w||^2   over w >= 0

with reg the l1 norm (global) or the column-wise l2,1 norm (multi-task).
The nonconvex local objective is solved with forward-backward splitting:
a subgradient step with decaying rate followed by the group
soft-threshold prox of the column l2,1 norm. No PSD-cone projection
appears anywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import TripletFeatures

__all__ = [
    "TrainConfig",
    "RdaState",
    "TrainingTrace",
    "subgrad_global",
    "subgrad_local",
    "rda_step_l1_nonneg",
    "rda_step_l21_nonneg",
    "prox_fobos_l21",
    "rda_solve",
    "fobos_solve",
    "global_objective",
    "multitask_objective",
    "local_objective",
]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by both solver loops.

    early_stop_patience counts epochs without validation improvement;
    0 disables early stopping.
    """

    beta: float = 1e-2
    gamma_rda: float = 1.0
    eta0: float = 0.1
    epochs: int = 50
    minibatch: int = 10
    rng_seed: int = 0
    early_stop_patience: int = 5

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.gamma_rda <= 0 or self.eta0 <= 0:
            raise ValueError("gamma_rda and eta0 must be > 0")
        if self.epochs < 1 or self.minibatch < 1:
            raise ValueError("epochs and minibatch must be >= 1")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")

    def replace(self, **kw) -> "TrainConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass
class RdaState:
    """Running average of subgradients plus the step-scale constants."""

    gbar: np.ndarray
    gamma: float
    beta: float
    t: int = 0

    def update(self, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.gbar.shape:
            raise ValueError("subgradient shape does not match state")
        self.gbar = (self.t * self.gbar + g) / (self.t + 1)
        self.t += 1


@dataclass
class TrainingTrace:
    """Per-epoch objective / validation / sparsity record of a solve."""

    epochs: list = field(default_factory=list)  # dicts per epoch
    max_abs_gbar: float = 0.0

    def append(self, epoch, objective, val_error, nnz):
        self.epochs.append(
            {
                "epoch": int(epoch),
                "objective": float(objective),
                "val_error": None if val_error is None else float(val_error),
                "nnz": int(nnz),
            }
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "objective", "val_error", "nnz"])
            for rec in self.epochs:
                val = "" if rec["val_error"] is None else "%.17g" % rec["val_error"]
                writer.writerow(
                    [rec["epoch"], "%.17g" % rec["objective"], val, rec["nnz"]]
                )


def _mean_active_diff(diff, w):
    """Batch subgradient of the mean hinge: mean over active rows of (p - q).

    A triplet is active when 1 + <w, p - q> > 0; the kink (margin exactly
    0) is treated as inactive.
    """
    margins = 1.0 + diff @ w
    active = margins > 0.0
    if not np.any(active):
        return np.zeros(diff.shape[1])
    return active @ diff / diff.shape[0]


def subgrad_global(w, batch: TripletFeatures) -> np.ndarray:
    """Subgradient of the batch-mean hinge loss at w."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape[0] != batch.num_basis:
        raise ValueError("weight length does not match features")
    return _mean_active_diff(batch.p - batch.q, w)


def _local_margins_and_coef(Atilde, diff, Zt):
    U = Zt @ Atilde  # (m, K): a_i . z-tilde per triplet per column
    weights = U * U
    margins = 1.0 + np.einsum("ij,ij->i", weights, diff)
    return U, margins


def _local_subgrad(Atilde, diff, Zt):
    U, margins = _local_margins_and_coef(Atilde, diff, Zt)
    active = margins > 0.0
    if not np.any(active):
        return np.zeros_like(Atilde)
    coef = 2.0 * U * diff
    coef[~active] = 0.0
    return Zt.T @ coef / diff.shape[0]


def subgrad_local(Atilde, batch: TripletFeatures, Z) -> np.ndarray:
    """Subgradient of the batch-mean hinge under anchor-dependent weights.

    Z holds the anchor embeddings row-aligned with the batch; the weight
    of column m for a triplet with augmented embedding z~ = [z; 1] is
    (a_m . z~)^2, and an active triplet contributes
    2 (a_m . z~)(p_m - q_m) z~ to column m.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    Atilde = np.asarray(Atilde, dtype=np.float64)
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[0] != len(batch):
        raise ValueError("Z rows must align with batch triplets")
    if Z.shape[1] + 1 != Atilde.shape[0]:
        raise ValueError("Atilde rows must equal embedding dim + 1")
    if Atilde.shape[1] != batch.num_basis:
        raise ValueError("Atilde columns do not match features")
    Zt = np.hstack([Z, np.ones((Z.shape[0], 1))])
    return _local_subgrad(Atilde, batch.p - batch.q, Zt)


def rda_step_l1_nonneg(state: RdaState, g) -> np.ndarray:
    """Fold g into the average and solve the l1 + nonneg subproblem.

    Returns w with w_i = (sqrt(t)/gamma) * max(0, -gbar_i - beta), the
    exact minimizer of <gbar, w> + beta ||w||_1 + (gamma/sqrt(t)) 0.5||w||^2
    over w >= 0.
    """
    state.update(g)
    scale = np.sqrt(state.t) / state.gamma
    return scale * np.maximum(0.0, -state.gbar - state.beta)


def rda_step_l21_nonneg(state: RdaState, G) -> np.ndarray:
    """Fold G into the average and solve the column l2,1 + nonneg subproblem.

    Per column j: v = -(sqrt(t)/gamma) gbar_j, v+ = max(v, 0), and the
    column is (1 - beta sqrt(t) / (gamma ||v+||))_+ * v+ -- clipping to the
    orthant then group-shrinking is the exact joint minimizer.
    """
    state.update(G)
    scale = np.sqrt(state.t) / state.gamma
    vplus = np.maximum(0.0, -scale * state.gbar)
    norms = np.linalg.norm(vplus, axis=0)
    factor = np.zeros_like(norms)
    nz = norms > 0
    factor[nz] = np.maximum(0.0, 1.0 - state.beta * scale / norms[nz])
    return vplus * factor[None, :]


def prox_fobos_l21(Atilde, step: float, beta: float) -> np.ndarray:
    """Group soft-threshold: scale each column a by (1 - step*beta/||a||)_+.

    No sign constraint; the squared weight parameterization keeps the
    induced metric weights nonnegative regardless.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    A = np.asarray(Atilde, dtype=np.float64)
    norms = np.linalg.norm(A, axis=0)
    factor = np.zeros_like(norms)
    nz = norms > step * beta
    factor[nz] = 1.0 - step * beta / norms[nz]
    return A * factor[None, :]


def global_objective(w, features: TripletFeatures, beta: float) -> float:
    """Mean hinge over all triplets plus beta ||w||_1 (w >= 0 assumed)."""
    diff = features.p - features.q
    hinge = np.maximum(0.0, 1.0 + diff @ w).mean()
    return float(hinge + beta * np.abs(w).sum())


def multitask_objective(W, features_list, beta: float) -> float:
    """Sum of per-task mean hinges plus beta * sum of column l2 norms."""
    total = 0.0
    for t, feats in enumerate(features_list):
        diff = feats.p - feats.q
        total += np.maximum(0.0, 1.0 + diff @ W[t]).mean()
    return float(total + beta * np.linalg.norm(W, axis=0).sum())


def local_objective(Atilde, features: TripletFeatures, Zt, beta: float) -> float:
    """Mean hinge under anchor-dependent weights plus the column l2,1 norm."""
    _, margins = _local_margins_and_coef(Atilde, features.p - features.q, Zt)
    hinge = np.maximum(0.0, margins).mean()
    return float(hinge + beta * np.linalg.norm(Atilde, axis=0).sum())


def _batch_slices(m, batch_size):
    return [slice(i, min(i + batch_size, m)) for i in range(0, m, batch_size)]


def rda_solve(features, shape, cfg: TrainConfig, validation_fn=None):
    """Run regularized dual averaging over shuffled minibatch epochs.

    `shape` selects the variant: an int K solves the l1 global problem on
    one TripletFeatures; a (T, K) tuple solves the column-l2,1 multi-task
    problem on a list of per-task TripletFeatures. Returns (iterate,
    TrainingTrace); the iterate is the last one (early stopping included).
    """
    if isinstance(shape, tuple):
        return _rda_solve_multitask(features, shape, cfg, validation_fn)
    return _rda_solve_global(features, int(shape), cfg, validation_fn)


def _early_stop(best, current, patience_left, patience):
    if patience == 0:
        return best, patience_left, False
    if current < best:
        return current, patience, False
    patience_left -= 1
    return best, patience_left, patience_left <= 0


def _rda_solve_global(features: TripletFeatures, K, cfg, validation_fn):
    if len(features) == 0:
        raise ValueError("no triplet features to train on")
    if features.num_basis != K:
        raise ValueError("feature width does not match K")
    diff = features.p - features.q
    m = diff.shape[0]
    rng = np.random.default_rng(cfg.rng_seed)
    state = RdaState(np.zeros(K), cfg.gamma_rda, cfg.beta)
    w = np.zeros(K)
    trace = TrainingTrace()
    best_val = np.inf
    patience_left = cfg.early_stop_patience
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m)
        for sl in _batch_slices(m, cfg.minibatch):
            g = _mean_active_diff(diff[order[sl]], w)
            w = rda_step_l1_nonneg(state, g)
            peak = np.abs(state.gbar).max()
            if peak > trace.max_abs_gbar:
                trace.max_abs_gbar = float(peak)
        obj = global_objective(w, features, cfg.beta)
        val = validation_fn(w) if validation_fn is not None else None
        trace.append(epoch, obj, val, int(np.count_nonzero(w)))
        if val is not None:
            best_val, patience_left, stop = _early_stop(
                best_val, val, patience_left, cfg.early_stop_patience
            )
            if stop:
                break
    return w, trace


class _TaskSampler:
    """Cycles each task through its own reshuffled triplet order.

    Every task runs its own generator from the same seed: tasks with
    identical triplet sets then see identical batch sequences, which
    keeps the objective's symmetry visible in the iterates.
    """

    def __init__(self, sizes, batch, seed):
        self.sizes = sizes
        self.batch = batch
        self.rngs = [np.random.default_rng(seed) for _ in sizes]
        self.orders = [rng.permutation(s) for rng, s in zip(self.rngs, sizes)]
        self.pos = [0] * len(sizes)

    def next_batch(self, t):
        size, pos = self.sizes[t], self.pos[t]
        if pos + self.batch > size:
            self.orders[t] = self.rngs[t].permutation(size)
            pos = 0
        out = self.orders[t][pos : pos + self.batch]
        self.pos[t] = pos + self.batch
        return out


def _rda_solve_multitask(features_list, shape, cfg, validation_fn):
    T, K = shape
    if len(features_list) != T:
        raise ValueError("need one TripletFeatures per task")
    diffs = []
    for feats in features_list:
        if len(feats) == 0:
            raise ValueError("every task needs nonempty triplet features")
        if feats.num_basis != K:
            raise ValueError("feature width does not match K")
        diffs.append(feats.p - feats.q)
    state = RdaState(np.zeros((T, K)), cfg.gamma_rda, cfg.beta)
    W = np.zeros((T, K))
    trace = TrainingTrace()
    best_val = np.inf
    patience_left = cfg.early_stop_patience
    steps_per_epoch = max(
        (d.shape[0] + cfg.minibatch - 1) // cfg.minibatch for d in diffs
    )
    sampler = _TaskSampler([d.shape[0] for d in diffs], cfg.minibatch, cfg.rng_seed)
    for epoch in range(1, cfg.epochs + 1):
        for _ in range(steps_per_epoch):
            G = np.empty((T, K))
            for t in range(T):
                rows = sampler.next_batch(t)
                G[t] = _mean_active_diff(diffs[t][rows], W[t])
            W = rda_step_l21_nonneg(state, G)
            peak = np.abs(state.gbar).max()
            if peak > trace.max_abs_gbar:
                trace.max_abs_gbar = float(peak)
        obj = multitask_objective(W, features_list, cfg.beta)
        val = validation_fn(W) if validation_fn is not None else None
        nnz_cols = int(np.count_nonzero(np.linalg.norm(W, axis=0)))
        trace.append(epoch, obj, val, nnz_cols)
        if val is not None:
            best_val, patience_left, stop = _early_stop(
                best_val, val, patience_left, cfg.early_stop_patience
            )
            if stop:
                break
    return W, trace


def fobos_solve(Atilde_init, features: TripletFeatures, Z, cfg: TrainConfig, validation_fn=None):
    """Forward-backward splitting on the anchor-weighted hinge objective.

    Z is the (n_train, d) embedding table; rows are gathered per triplet
    through features.anchors. Alternates a subgradient step with rate
    eta0/sqrt(t) and the l2,1 prox. Tracks the best iterate by validation
    error (by objective when no validation hook is given) and never
    returns anything worse than the initialization: if the candidate's
    objective exceeds the initial objective, the initialization is
    returned unchanged.
    """
    if len(features) == 0:
        raise ValueError("no triplet features to train on")
    A = np.asarray(Atilde_init, dtype=np.float64).copy()
    Z = np.asarray(Z, dtype=np.float64)
    diff = features.p - features.q
    emb = Z[features.anchors]
    Zt = np.hstack([emb, np.ones((emb.shape[0], 1))])
    if Zt.shape[1] != A.shape[0] or A.shape[1] != features.num_basis:
        raise ValueError("Atilde shape does not match embedding/features")
    m = diff.shape[0]
    rng = np.random.default_rng(cfg.rng_seed)
    trace = TrainingTrace()

    def objective(mat):
        return local_objective(mat, features, Zt, cfg.beta)

    init_obj = objective(A)
    init_val = validation_fn(A) if validation_fn is not None else None
    best_key = init_val if validation_fn is not None else init_obj
    best_A = A.copy()
    best_val_seen = np.inf if init_val is None else init_val
    patience_left = cfg.early_stop_patience
    t = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m)
        for sl in _batch_slices(m, cfg.minibatch):
            rows = order[sl]
            t += 1
            eta = cfg.eta0 / np.sqrt(t)
            grad = _local_subgrad(A, diff[rows], Zt[rows])
            A = prox_fobos_l21(A - eta * grad, eta, cfg.beta)
        obj = objective(A)
        val = validation_fn(A) if validation_fn is not None else None
        nnz_cols = int(np.count_nonzero(np.linalg.norm(A, axis=0)))
        trace.append(epoch, obj, val, nnz_cols)
        key = val if validation_fn is not None else obj
        if key < best_key:
            best_key = key
            best_A = A.copy()
        if val is not None:
            best_val_seen, patience_left, stop = _early_stop(
                best_val_seen, val, patience_left, cfg.early_stop_patience
            )
            if stop:
                break
    if objective(best_A) <= init_obj:
        return best_A, trace
    return np.asarray(Atilde_init, dtype=np.float64).copy(), trace
