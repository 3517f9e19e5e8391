"""k-NN classification under any learned metric, dataset splitting, and
regularization-strength selection on validation data.

Tie rules are fully pinned for reproducibility: neighbor ties break
toward the smaller training index, vote ties toward the smaller summed
distance and then the smaller class id.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset

__all__ = ["split", "knn_predict", "error_rate", "select_beta", "cross_distances"]


def _largest_remainder(total_per_class, fractions):
    """Integer allocation of each class count over splits, within 1 of ideal."""
    ideal = total_per_class * fractions
    base = np.floor(ideal).astype(np.int64)
    short = int(total_per_class - base.sum())
    if short > 0:
        # hand leftovers to the largest fractional parts; ties to earlier split
        order = np.argsort(-(ideal - base), kind="stable")
        base[order[:short]] += 1
    return base


def split(dataset: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 0, counts=None):
    """Stratified, disjoint train/validation/test split, deterministic per seed.

    Either `ratios` summing to 1 (every point lands in exactly one split)
    or fixed `counts` whose sum may be below n (leftover points unused).
    """
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    classes = np.unique(labels)
    n = dataset.n
    if counts is not None:
        counts = tuple(int(c) for c in counts)
        if sum(counts) > n:
            raise ValueError("split counts exceed dataset size")
        # fourth virtual bin holds the unused leftovers
        fractions = np.array([c / n for c in counts] + [1.0 - sum(counts) / n])
    else:
        ratios = np.asarray(ratios, dtype=np.float64)
        if ratios.shape != (3,) or abs(ratios.sum() - 1.0) > 1e-9:
            raise ValueError("ratios must be 3 values summing to 1")
        fractions = ratios
    num_bins = fractions.shape[0]
    parts: list[list[np.ndarray]] = [[] for _ in range(num_bins)]
    for c in classes:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        alloc = _largest_remainder(members.size, fractions)
        start = 0
        for s in range(num_bins):
            parts[s].append(members[start : start + alloc[s]])
            start += alloc[s]
    if counts is not None:
        # per-class rounding can drift off the exact totals; trade with the pool
        _fix_totals(parts, counts)
    out = []
    for s in range(3):
        idx = np.sort(np.concatenate(parts[s]))
        if idx.size == 0:
            raise ValueError("a split came out empty; adjust ratios/counts")
        out.append(dataset.subset(idx))
    return tuple(out)


def _fix_totals(parts, counts):
    pool = parts[3]
    for s in range(3):
        size = sum(p.size for p in parts[s])
        while size > counts[s]:
            big = max(range(len(parts[s])), key=lambda c: parts[s][c].size)
            parts[s][big], moved = parts[s][big][:-1], parts[s][big][-1:]
            pool[big] = np.concatenate([pool[big], moved])
            size -= 1
        while size < counts[s]:
            big = max(range(len(pool)), key=lambda c: pool[c].size)
            if pool[big].size == 0:
                raise ValueError("split counts exceed class supply")
            pool[big], moved = pool[big][:-1], pool[big][-1:]
            parts[s][big] = np.concatenate([parts[s][big], moved])
            size += 1


def _euclidean_cross(Xq, Xr):
    Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
    Xr = np.asarray(Xr, dtype=np.float64)
    a2 = np.einsum("ij,ij->i", Xq, Xq)[:, None]
    b2 = np.einsum("ij,ij->i", Xr, Xr)[None, :]
    d = a2 + b2 - 2.0 * (Xq @ Xr.T)
    np.maximum(d, 0.0, out=d)
    return d


def cross_distances(metric, X_query, X_ref) -> np.ndarray:
    """(nq, nr) squared distances under a metric: "euclidean" or a model."""
    if isinstance(metric, str):
        if metric.lower() == "euclidean":
            return _euclidean_cross(X_query, X_ref)
        raise ValueError(f"unknown metric name {metric!r}")
    return metric.cross_distances(X_query, X_ref)


def _vote(dist_row, labels, k, num_classes):
    order = np.argsort(dist_row, kind="stable")[:k]
    votes = np.bincount(labels[order], minlength=num_classes)
    top = votes.max()
    tied = np.flatnonzero(votes == top)
    if tied.size == 1:
        return int(tied[0])
    sums = np.array(
        [dist_row[order[labels[order] == c]].sum() for c in tied]
    )
    best = np.flatnonzero(sums == sums.min())
    return int(tied[best[0]])  # summed-distance tie -> smaller class id


def knn_predict(metric, train: Dataset, x, k: int = 3, exclude_index=None) -> int:
    """Majority vote among the k nearest training points under `metric`."""
    if train.n == 0:
        raise ValueError("empty training set")
    if k > train.n:
        raise ValueError("k exceeds training size")
    d = cross_distances(metric, np.atleast_2d(x), train.features)[0]
    if exclude_index is not None:
        d = d.copy()
        d[exclude_index] = np.inf
    return _vote(d, train.labels, k, train.num_classes)


def error_rate(metric, train: Dataset, eval_set: Dataset, k: int = 3, leave_one_out: bool = False) -> float:
    """Fraction of eval points whose k-NN prediction misses their label.

    leave_one_out treats eval_set as the training set itself (row i is
    excluded from its own neighbor list).
    """
    if eval_set.n == 0:
        raise ValueError("empty evaluation set")
    D = cross_distances(metric, eval_set.features, train.features)
    if leave_one_out:
        if eval_set.n != train.n:
            raise ValueError("leave_one_out needs eval_set aligned with train")
        np.fill_diagonal(D, np.inf)
    wrong = 0
    for i in range(eval_set.n):
        pred = _vote(D[i], train.labels, k, train.num_classes)
        if pred != eval_set.labels[i]:
            wrong += 1
    return wrong / eval_set.n


def select_beta(fit_fn, beta_grid, train: Dataset, val: Dataset, k: int = 3):
    """Fit once per beta, return (beta, model) minimizing validation error.

    Ties prefer the larger beta (the sparser model). fit_fn is called as
    fit_fn(beta, train, val).
    """
    grid = list(beta_grid)
    if not grid:
        raise ValueError("empty beta grid")
    best = None
    for beta in grid:
        model = fit_fn(beta, train, val)
        err = error_rate(model, train, val, k=k)
        if best is None or err < best[2] or (err == best[2] and beta > best[0]):
            best = (beta, model, err)
    return best[0], best[1]
