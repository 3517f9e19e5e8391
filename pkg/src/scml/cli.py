"""Dataset ingestion, experiment orchestration, and report emission.

Subcommands: run (full experiment over seeds), sweep (basis-budget
study), basis (generate and save a basis set), eval (score a dataset
with a saved model), bound (generalization-bound evaluator).

Reports are JSON with 17-significant-digit floats and sorted keys so
identical configs and seeds produce byte-identical files; wall-clock
measurements live in a separate "runtime" field.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .basisgen import BasisGenConfig, generate_basis
from .core import BasisSet, Dataset, triplet_features
from .embed import pca_fit, pca_transform
from .evaluate import error_rate, select_beta, split
from .models import (
    GlobalModel,
    fit_mt_scml,
    fit_scml_global,
    fit_scml_local,
    local_weights,
    model_from_dict,
    model_to_dict,
    robustness_bound,
)
from .optim import TrainConfig
from .triplets import generate_triplets, triplets_to_csv

__all__ = [
    "ExperimentConfig",
    "ingest",
    "export_dataset_csv",
    "run_experiment",
    "basis_sweep",
    "dumps_deterministic",
    "main",
]

DEFAULT_BETA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


# ---------------------------------------------------------------------------
# deterministic JSON


def _format_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return "%.17g" % x


def _dump(obj, out, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj, key=str)
        for i, k in enumerate(keys):
            out.append(f'{pad_in}"{k}": ')
            _dump(obj[k], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad_in)
            _dump(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, np.ndarray):
        _dump(obj.tolist(), out, indent, level)
    else:
        out.append(json.dumps(str(obj)))


def dumps_deterministic(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and %.17g floats (byte-stable)."""
    out: list[str] = []
    _dump(obj, out, indent, 0)
    return "".join(out) + "\n"


# ---------------------------------------------------------------------------
# ingestion


def _parse_float(token, path, lineno):
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: non-numeric feature value {token!r}") from None


def _ingest_csv(path) -> Dataset:
    rows = []
    header = None
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1:
                try:
                    [float(v) for v in row[:-1]]
                except ValueError:
                    header = row
                    continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: need at least one feature and a label")
            rows.append((lineno, row))
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    width = len(rows[0][1])
    feats = np.empty((len(rows), width - 1))
    raw_labels = []
    for i, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        feats[i] = [_parse_float(v, path, lineno) for v in row[:-1]]
        raw_labels.append(row[-1].strip())
    _, labels = np.unique(np.asarray(raw_labels), return_inverse=True)
    names = tuple(h.strip() for h in header[:-1]) if header else None
    return Dataset(feats, labels.astype(np.int64), feature_names=names)


def _ingest_libsvm(path) -> Dataset:
    entries = []
    max_idx = 0
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            label = parts[0]
            pairs = []
            for tok in parts[1:]:
                if ":" not in tok:
                    raise ValueError(f"{path}:{lineno}: malformed pair {tok!r}")
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad feature index {idx_s!r}") from None
                if idx < 1:
                    raise ValueError(f"{path}:{lineno}: feature indices are 1-based")
                pairs.append((idx, _parse_float(val_s, path, lineno)))
                max_idx = max(max_idx, idx)
            entries.append((label, pairs))
    if not entries:
        raise ValueError(f"{path}: empty dataset")
    feats = np.zeros((len(entries), max_idx))
    raw_labels = []
    for i, (label, pairs) in enumerate(entries):
        raw_labels.append(label)
        for idx, val in pairs:
            feats[i, idx - 1] = val
    _, labels = np.unique(np.asarray(raw_labels), return_inverse=True)
    return Dataset(feats, labels.astype(np.int64))


def ingest(path, fmt: str = "csv") -> Dataset:
    """Load a dataset file; labels are remapped to dense ids [0, C).

    csv: last column is the label, other columns numeric features, header
    auto-detected by a non-numeric first row. libsvm: "label idx:val ..."
    with 1-based sparse indices densified.
    """
    if fmt == "csv":
        return _ingest_csv(path)
    if fmt == "libsvm":
        return _ingest_libsvm(path)
    raise ValueError(f"unknown format {fmt!r}")


def export_dataset_csv(dataset: Dataset, path) -> None:
    """Inverse of csv ingest (dense labels are written as ints)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        if dataset.feature_names:
            writer.writerow(list(dataset.feature_names) + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow(["%.17g" % v for v in x] + [int(y)])


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment; mirrors the JSON config document."""

    data: tuple[str, ...]
    mode: str = "global"  # global | multitask | local | euclidean-baseline
    data_format: str = "csv"
    standardize: bool = True
    pca_dim: int | None = None
    basisgen: BasisGenConfig = field(default_factory=BasisGenConfig)
    n_targets: int = 3
    n_impostors: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    embed_dim: int = 40
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_counts: tuple[int, int, int] | None = None
    knn_k: int = 3
    seeds: tuple[int, ...] = (1, 2, 3)
    output_dir: str | None = None
    export_triplets: bool = False

    def __post_init__(self):
        if isinstance(self.data, (str, Path)):
            object.__setattr__(self, "data", (str(self.data),))
        else:
            object.__setattr__(self, "data", tuple(str(p) for p in self.data))
        if self.mode not in ("global", "multitask", "local", "euclidean-baseline"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "multitask" and len(self.data) < 2:
            raise ValueError("multitask mode needs at least 2 dataset paths")
        if self.mode != "multitask" and len(self.data) != 1:
            raise ValueError(f"{self.mode} mode takes exactly one dataset path")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.beta_grid:
            raise ValueError("beta_grid must be nonempty")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "basisgen" in d:
            bg = dict(d["basisgen"])
            if "J_levels" in bg:
                bg["J_levels"] = tuple(bg["J_levels"])
            d["basisgen"] = BasisGenConfig(**bg)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        for key in ("beta_grid", "seeds", "split_ratios", "split_counts", "data"):
            if key in d and d[key] is not None and not isinstance(d[key], (str, Path)):
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["data"] = list(self.data)
        return d

    def replace(self, **kw) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, **kw)


# ---------------------------------------------------------------------------
# pipeline stages


def _standardize_with_train(train, others):
    from .datasets import standardize

    out = standardize(train, *others)
    return (out, ()) if not others else (out[0], out[1:])


def _preprocess(dataset, cfg, seed):
    """split -> standardize from train -> optional PCA; train stats only."""
    tr, va, te = split(dataset, ratios=cfg.split_ratios, seed=seed, counts=cfg.split_counts)
    if cfg.standardize:
        tr, (va, te) = _standardize_with_train(tr, (va, te))
    if cfg.pca_dim is not None:
        pca = pca_fit(tr.features, cfg.pca_dim)
        tr, va, te = (
            Dataset(pca_transform(pca, ds.features), ds.labels, num_classes=ds.num_classes,
                    normalization_state=ds.normalization_state)
            for ds in (tr, va, te)
        )
    return tr, va, te


def _make_val_fn(basis, train, val, k):
    """Early-stopping hook: k-NN validation error for a weight iterate."""

    def val_fn(w):
        return error_rate(GlobalModel(basis, w, 0.0), train, val, k=k)

    return val_fn


def _fit_global_for_beta(basis, triplets, cfg, k):
    def fit_fn(beta, train, val):
        tc = cfg.train.replace(beta=beta)
        return fit_scml_global(
            train, basis, triplets, tc, _make_val_fn(basis, train, val, k)
        )

    return fit_fn


def _run_seed_single(dataset, cfg: ExperimentConfig, seed: int):
    timings = {}
    t0 = time.perf_counter()
    tr, va, te = _preprocess(dataset, cfg, seed)
    timings["preprocess"] = time.perf_counter() - t0
    record = {
        "seed": seed,
        "split_sizes": [tr.n, va.n, te.n],
        "errors": {},
        "selected": {},
        "beta": {},
    }
    record["errors"]["euclidean"] = error_rate("euclidean", tr, te, k=cfg.knn_k)
    if cfg.mode == "euclidean-baseline":
        return record, timings, None

    t0 = time.perf_counter()
    bg = dataclasses.replace(cfg.basisgen, rng_seed=cfg.basisgen.rng_seed + seed)
    basis = generate_basis(tr, bg)
    timings["basis"] = time.perf_counter() - t0
    record["basis_K"] = basis.num_vectors

    t0 = time.perf_counter()
    triplets = generate_triplets(tr, cfg.n_targets, cfg.n_impostors)
    timings["triplets"] = time.perf_counter() - t0
    record["n_triplets"] = int(triplets.shape[0])

    t0 = time.perf_counter()
    train_cfg = cfg.train.replace(rng_seed=cfg.train.rng_seed + seed)
    cfg_seeded = cfg.replace(train=train_cfg)
    beta_g, global_model = select_beta(
        _fit_global_for_beta(basis, triplets, cfg_seeded, cfg.knn_k),
        cfg.beta_grid,
        tr,
        va,
        k=cfg.knn_k,
    )
    timings["fit_global"] = time.perf_counter() - t0
    record["beta"]["global"] = beta_g
    record["selected"]["global"] = global_model.nnz
    record["errors"]["global"] = error_rate(global_model, tr, te, k=cfg.knn_k)
    model = global_model

    if cfg.mode == "local":
        t0 = time.perf_counter()
        from .embed import kpca_fit, median_bandwidth

        embedding = kpca_fit(
            tr.features, min(cfg.embed_dim, tr.n), median_bandwidth(tr.features)
        )

        def fit_local(beta, train, val):
            tc = train_cfg.replace(beta=beta)
            return fit_scml_local(
                train, basis, triplets, tc, cfg.embed_dim, global_model,
                validation_fn=lambda m: error_rate(m, train, val, k=cfg.knn_k),
                embedding=embedding,
            )

        beta_l, local_model = select_beta(fit_local, cfg.beta_grid, tr, va, k=cfg.knn_k)
        timings["fit_local"] = time.perf_counter() - t0
        record["beta"]["local"] = beta_l
        record["selected"]["local"] = int(local_model.selected_columns.size)
        record["errors"]["local"] = error_rate(local_model, tr, te, k=cfg.knn_k)
        model = local_model
        record["_viz"] = _weight_projection_2d(local_model, tr)

    return record, timings, (model, tr)


def _run_seed_multitask(datasets, cfg: ExperimentConfig, seed: int):
    timings = {}
    t0 = time.perf_counter()
    splits = [_preprocess(ds, cfg, seed) for ds in datasets]
    timings["preprocess"] = time.perf_counter() - t0
    record = {"seed": seed, "errors": {}, "selected": {}, "beta": {}}
    record["errors"]["euclidean"] = [
        error_rate("euclidean", tr, te, k=cfg.knn_k) for tr, va, te in splits
    ]

    t0 = time.perf_counter()
    bases, triplets = [], []
    for t, (tr, va, te) in enumerate(splits):
        bg = dataclasses.replace(
            cfg.basisgen, rng_seed=cfg.basisgen.rng_seed + seed + 7919 * t
        )
        bases.append(generate_basis(tr, bg))
        triplets.append(generate_triplets(tr, cfg.n_targets, cfg.n_impostors))
    timings["basis+triplets"] = time.perf_counter() - t0

    trains = [s[0] for s in splits]
    vals = [s[1] for s in splits]
    tests = [s[2] for s in splits]
    train_cfg = cfg.train.replace(rng_seed=cfg.train.rng_seed + seed)
    union = BasisSet(np.vstack([b.vectors for b in bases]))

    def fit_for_beta(beta):
        tc = train_cfg.replace(beta=beta)

        def val_fn(W):
            from .models import MultiTaskModel

            model = MultiTaskModel(union, W, beta)
            errs = [
                error_rate(model.task_model(t), trains[t], vals[t], k=cfg.knn_k)
                for t in range(len(trains))
            ]
            return float(np.mean(errs))

        return fit_mt_scml(trains, bases, triplets, tc, val_fn)

    t0 = time.perf_counter()
    best = None
    for beta in cfg.beta_grid:
        model = fit_for_beta(beta)
        errs = [
            error_rate(model.task_model(t), trains[t], vals[t], k=cfg.knn_k)
            for t in range(len(trains))
        ]
        mean_err = float(np.mean(errs))
        if best is None or mean_err < best[0] or (mean_err == best[0] and beta > best[1]):
            best = (mean_err, beta, model)
    _, beta_mt, model = best
    timings["fit_multitask"] = time.perf_counter() - t0

    record["beta"]["multitask"] = beta_mt
    record["selected"]["multitask"] = int(model.selected_columns.size)
    record["errors"]["multitask"] = [
        error_rate(model.task_model(t), trains[t], tests[t], k=cfg.knn_k)
        for t in range(len(trains))
    ]
    return record, timings, (model, trains[0])


def _weight_projection_2d(local_model, train):
    """Per-training-point 2D feature PCA + 1D PCA of the weight vectors."""
    coords = pca_transform(pca_fit(train.features, min(2, train.dim)), train.features)
    if coords.ndim == 1 or coords.shape[1] == 1:
        coords = np.column_stack([coords.ravel(), np.zeros(train.n)])
    weights = local_weights(local_model, train.features)
    wproj = pca_transform(pca_fit(weights, 1), weights).ravel()
    return [
        {
            "x0": float(coords[i, 0]),
            "x1": float(coords[i, 1]),
            "weight_projection": float(wproj[i]),
            "label": int(train.labels[i]),
        }
        for i in range(train.n)
    ]


def _mean_stderr(values):
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


def run_experiment(cfg: ExperimentConfig):
    """Run the full protocol over all seeds and aggregate a report.

    A failing seed is recorded (with the reason) and skipped; the
    experiment raises only when every seed fails. Returns the report
    dict; files are written when cfg.output_dir is set.
    """
    datasets = [ingest(p, cfg.data_format) for p in cfg.data]
    per_seed, failures, runtimes, artifacts = [], [], {}, {}
    for seed in cfg.seeds:
        try:
            start = time.perf_counter()
            if cfg.mode == "multitask":
                record, timings, model_info = _run_seed_multitask(datasets, cfg, seed)
            else:
                record, timings, model_info = _run_seed_single(datasets[0], cfg, seed)
            timings["total"] = time.perf_counter() - start
            viz = record.pop("_viz", None)
            per_seed.append(record)
            runtimes[str(seed)] = timings
            artifacts[seed] = (model_info, viz)
        except Exception as exc:  # noqa: BLE001 - a seed may fail for any reason
            failures.append({"seed": seed, "reason": f"{type(exc).__name__}: {exc}"})
    if not per_seed:
        raise RuntimeError(f"all seeds failed: {failures}")

    aggregate = {}
    keys = per_seed[0]["errors"].keys()
    for key in keys:
        vals = [rec["errors"][key] for rec in per_seed]
        if isinstance(vals[0], list):  # multitask: per-task lists
            flat = [float(np.mean(v)) for v in vals]
            mean, stderr = _mean_stderr(flat)
        else:
            mean, stderr = _mean_stderr(vals)
        aggregate[key] = {"mean": mean, "stderr": stderr}

    report = {
        "config": cfg.to_dict(),
        "per_seed": per_seed,
        "aggregate": aggregate,
        "failures": failures,
        "runtime": runtimes,
    }

    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(dumps_deterministic(report))
        for seed, (model_info, viz) in artifacts.items():
            if model_info is not None:
                model, train = model_info
                if model.trace is not None:
                    model.trace.to_csv(out / f"trace_seed{seed}.csv")
                (out / f"model_seed{seed}.json").write_text(
                    dumps_deterministic(model_to_dict(model))
                )
            if viz is not None:
                _write_viz_csv(viz, out / f"weights2d_seed{seed}.csv")
        _write_errors_csv(per_seed, out / "errors.csv")
        if cfg.export_triplets and cfg.mode != "euclidean-baseline":
            tr, _, _ = _preprocess(datasets[0], cfg, cfg.seeds[0])
            triplets_to_csv(
                generate_triplets(tr, cfg.n_targets, cfg.n_impostors),
                out / f"triplets_seed{cfg.seeds[0]}.csv",
            )
    return report


def _write_viz_csv(viz_rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x0", "x1", "weight_projection", "label"])
        for row in viz_rows:
            writer.writerow(
                [
                    "%.17g" % row["x0"],
                    "%.17g" % row["x1"],
                    "%.17g" % row["weight_projection"],
                    row["label"],
                ]
            )


def _write_errors_csv(per_seed, path):
    keys = sorted(per_seed[0]["errors"])
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed"] + keys)
        for rec in per_seed:
            row = [rec["seed"]]
            for key in keys:
                val = rec["errors"][key]
                if isinstance(val, list):
                    val = float(np.mean(val))
                row.append("%.17g" % val)
            writer.writerow(row)


def basis_sweep(cfg: ExperimentConfig, K_values):
    """Fit global (and local when cfg.mode == "local") at each basis budget.

    Returns rows of (K, mode, selected count, test error) aggregated over
    cfg.seeds; K_values must be sorted ascending.
    """
    K_values = [int(k) for k in K_values]
    if K_values != sorted(K_values):
        raise ValueError("K_values must be sorted ascending")
    modes = ["global", "local"] if cfg.mode == "local" else ["global"]
    rows = []
    for K in K_values:
        swept = cfg.replace(
            basisgen=dataclasses.replace(
                cfg.basisgen, num_regions=None, basis_budget=K
            ),
            mode=modes[-1],
            output_dir=None,
        )
        report = run_experiment(swept)
        for mode in modes:
            selected = [rec["selected"][mode] for rec in report["per_seed"]]
            errors = [rec["errors"][mode] for rec in report["per_seed"]]
            rows.append(
                {
                    "K": K,
                    "mode": mode,
                    "selected_mean": float(np.mean(selected)),
                    "test_error_mean": float(np.mean(errors)),
                }
            )
    report = {"config": cfg.to_dict(), "K_values": K_values, "rows": rows}
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(dumps_deterministic(report))
        with open(out / "sweep.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["K", "mode", "selected_mean", "test_error_mean"])
            for row in rows:
                writer.writerow(
                    [
                        row["K"],
                        row["mode"],
                        "%.17g" % row["selected_mean"],
                        "%.17g" % row["test_error_mean"],
                    ]
                )
    return report


# ---------------------------------------------------------------------------
# command line


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    kw = {}
    if args.seed is not None:
        kw["seeds"] = (args.seed,)
    if args.mode is not None:
        kw["mode"] = args.mode
    if args.out is not None:
        kw["output_dir"] = args.out
    if getattr(args, "data", None):
        kw["data"] = tuple(args.data)
    return cfg.replace(**kw) if kw else cfg


def _cmd_run(args):
    cfg = _apply_overrides(ExperimentConfig.from_json(args.config), args)
    report = run_experiment(cfg)
    for key, agg in sorted(report["aggregate"].items()):
        print(f"{key}: mean={agg['mean']:.4f} stderr={agg['stderr']:.4f}")
    if cfg.output_dir:
        print(f"report written to {Path(cfg.output_dir) / 'report.json'}")
    return 0


def _cmd_sweep(args):
    cfg = _apply_overrides(ExperimentConfig.from_json(args.config), args)
    report = basis_sweep(cfg, [int(k) for k in args.k_values.split(",")])
    for row in report["rows"]:
        print(
            f"K={row['K']} mode={row['mode']} selected={row['selected_mean']:.1f} "
            f"test_error={row['test_error_mean']:.4f}"
        )
    return 0


def _cmd_basis(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seeds=(args.seed,))
    dataset = ingest(cfg.data[0], cfg.data_format)
    seed = cfg.seeds[0]
    tr, _, _ = _preprocess(dataset, cfg, seed)
    basis = generate_basis(
        tr, dataclasses.replace(cfg.basisgen, rng_seed=cfg.basisgen.rng_seed + seed)
    )
    Path(args.out).write_text(dumps_deterministic(basis.to_dict()))
    print(f"basis with K={basis.num_vectors} written to {args.out}")
    return 0


def _cmd_eval(args):
    model = model_from_dict(json.loads(Path(args.model).read_text()))
    from .models import MultiTaskModel

    if isinstance(model, MultiTaskModel):
        model = model.task_model(args.task)
    train = ingest(args.train, args.format)
    data = ingest(args.data, args.format)
    err = error_rate(model, train, data, k=args.k)
    print(dumps_deterministic({"error_rate": err, "n": data.n, "k": args.k}), end="")
    return 0


def _cmd_bound(args):
    value = robustness_bound(
        args.gamma_cover, args.radius, args.k_star, args.beta,
        args.upper_bound, args.cover_size, args.n, args.delta,
    )
    print("%.17g" % value)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scml",
        description="Sparse combinations of rank-one metrics: train and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment from a JSON config")
    run.add_argument("-c", "--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override seeds with one seed")
    run.add_argument("--mode", default=None,
                     choices=["global", "multitask", "local", "euclidean-baseline"])
    run.add_argument("--out", default=None, help="override output directory")
    run.add_argument("--data", nargs="*", default=None, help="override dataset paths")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="study the effect of the basis budget")
    sweep.add_argument("-c", "--config", required=True)
    sweep.add_argument("--k-values", required=True, help="comma-separated budgets, ascending")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--mode", default=None,
                       choices=["global", "multitask", "local", "euclidean-baseline"])
    sweep.add_argument("--out", default=None)
    sweep.set_defaults(func=_cmd_sweep)

    basis = sub.add_parser("basis", help="generate and save a basis set")
    basis.add_argument("-c", "--config", required=True)
    basis.add_argument("--seed", type=int, default=None)
    basis.add_argument("--out", required=True, help="output basis JSON path")
    basis.set_defaults(func=_cmd_basis)

    ev = sub.add_parser("eval", help="score a dataset with a saved model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--train", required=True, help="training set the model ranks against")
    ev.add_argument("--data", required=True, help="dataset to score")
    ev.add_argument("--format", default="csv", choices=["csv", "libsvm"])
    ev.add_argument("-k", type=int, default=3)
    ev.add_argument("--task", type=int, default=0, help="task row for multitask models")
    ev.set_defaults(func=_cmd_eval)

    bound = sub.add_parser("bound", help="evaluate the generalization bound")
    bound.add_argument("--gamma-cover", type=float, required=True)
    bound.add_argument("--radius", type=float, required=True, help="bound R on instance norms")
    bound.add_argument("--k-star", type=float, required=True, help="nonzero weight count")
    bound.add_argument("--beta", type=float, required=True)
    bound.add_argument("--upper-bound", type=float, required=True, help="loss bound U")
    bound.add_argument("--cover-size", type=float, required=True, help="cover size N")
    bound.add_argument("-n", type=int, required=True, help="sample size")
    bound.add_argument("--delta", type=float, required=True)
    bound.set_defaults(func=_cmd_bound)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
