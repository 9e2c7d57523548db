"""Experiment workflow: workload matrix, data collection, training, Top-k evaluation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .decision import baseline_default, rank_nodes, topk_hits
from .features import AppType, JobSpec, build_features, encode_app_type, feature_names
from .models import (
    Dataset,
    ModelKind,
    SchemaMismatchError,
    TrainConfig,
    TRAINERS,
    evaluate,
)
from .simulator import SimCluster

INPUT_SIZES = (100_000, 500_000, 1_000_000, 5_000_000, 10_000_000)
EXECUTOR_COUNTS = (1, 2)
EXECUTOR_MEMORY_MB = (512, 1024)
REPEATS = 10
DEFAULT_BG_INTENSITY = 1 / 3
DEFAULT_TRIALS = 200

CSV_HEADER = (
    "run_id", "timestamp", "node", "app_type", "input_size", "executor_count",
    "executor_memory_mb", "rtt_mean_s", "rtt_max_s", "rtt_std_s", "tx_bps", "rx_bps",
    "cpu_load1", "mem_available_bytes", "duration_s",
)
METHOD_ORDER = ("baseline", "linear", "gbdt", "forest")
METHOD_LABELS = {"baseline": "Kubernetes Default", "linear": "Linear Regression",
                 "gbdt": "Gradient-Boosted Trees", "forest": "Random Forest"}
MODEL_ORDER = ("linear", "forest", "gbdt")


@dataclass(frozen=True)
class WorkloadMatrix:
    configs: tuple
    target_nodes: tuple
    repeats: int = REPEATS

    def runs(self):
        """(config, node, repeat) tuples in collection order."""
        return list(product(self.configs, self.target_nodes, range(self.repeats)))


def generate_matrix(seed: int = 0, nodes=None) -> WorkloadMatrix:
    """The fixed 60-configuration grid; `seed` is accepted for interface symmetry and unused."""
    configs = sorted(
        JobSpec(app, size, ex, mem)
        for app, size, ex, mem in product(AppType, INPUT_SIZES, EXECUTOR_COUNTS, EXECUTOR_MEMORY_MB)
    )
    nodes = tuple(sorted(nodes)) if nodes is not None else tuple(f"node-{i}" for i in range(1, 7))
    return WorkloadMatrix(configs=tuple(configs), target_nodes=nodes)


# -- dataset collection ------------------------------------------------------


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def group_key(job: JobSpec, node: str) -> str:
    return f"{job.app.value}/{job.input_size}/{job.executor_count}/{job.executor_memory}/{node}"


@dataclass
class CollectedData:
    dataset: Dataset
    rows: list  # CSV rows (dicts keyed by CSV_HEADER)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            w.writerow([_fmt(row[k]) for k in CSV_HEADER])
        return buf.getvalue()


def collect_dataset(cluster: SimCluster, matrix: WorkloadMatrix, bg_intensity: float = DEFAULT_BG_INTENSITY,
                    out_path=None) -> CollectedData:
    """Run every (config, node, repeat) tuple once and log pre-run telemetry + duration."""
    missing = set(matrix.target_nodes) - set(cluster.nodes)
    if missing:
        raise ValueError(f"matrix targets unknown nodes {sorted(missing)}")
    rows, X, y, groups = [], [], [], []
    for run_id, (job, node, _) in enumerate(matrix.runs()):
        cluster.apply_background_load(bg_intensity)
        run = cluster.run_job(job, node)
        fv = build_features(node, run.snapshot_before, job)
        rows.append(_row(run_id, run.snapshot_before.timestamp, node, job, fv, run.duration_s))
        X.append(fv)
        y.append(run.duration_s)
        groups.append(group_key(job, node))
    data = CollectedData(Dataset(np.array(X), np.array(y), feature_names(), np.array(groups)), rows)
    if out_path is not None:
        Path(out_path).write_text(data.to_csv())
    return data


def _row(run_id, timestamp, node, job, fv, duration) -> dict:
    row = {
        "run_id": run_id,
        "timestamp": float(timestamp),
        "node": node,
        "app_type": job.app.value,
        "input_size": job.input_size,
        "executor_count": job.executor_count,
        "executor_memory_mb": job.executor_memory,
        "duration_s": float(duration),
    }
    for name, value in zip(feature_names()[:7], fv[:7]):
        row[name] = float(value)
    return row


def load_dataset_csv(path) -> CollectedData:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise SchemaMismatchError(f"{path}: unexpected dataset header {header}")
        rows, X, y, groups = [], [], [], []
        for line in reader:
            if len(line) != len(CSV_HEADER):
                raise SchemaMismatchError(f"{path}: row {len(rows) + 1} has {len(line)} columns")
            raw = dict(zip(CSV_HEADER, line))
            job = JobSpec(AppType.parse(raw["app_type"]), int(raw["input_size"]),
                          int(raw["executor_count"]), int(raw["executor_memory_mb"]))
            row = {k: raw[k] for k in ("node", "app_type")}
            for k in ("run_id", "input_size", "executor_count", "executor_memory_mb"):
                row[k] = int(raw[k])
            for k in ("timestamp", *feature_names()[:7], "duration_s"):
                row[k] = float(raw[k])
            fv = [row[k] for k in feature_names()[:7]]
            fv += [*(float(v) for v in encode_app_type(job.app)), job.input_size, job.executor_count, job.executor_memory]
            rows.append(row)
            X.append(fv)
            y.append(row["duration_s"])
            groups.append(group_key(job, row["node"]))
    if not rows:
        raise ValueError(f"{path}: dataset has no rows")
    return CollectedData(Dataset(np.array(X), np.array(y), feature_names(), np.array(groups)), rows)


# -- training ----------------------------------------------------------------


def group_split(groups, test_fraction: float = 0.2, seed: int = 0):
    """Row indices (train, test) with every group wholly on one side."""
    groups = np.asarray(groups)
    unique = np.unique(groups)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(unique))
    n_test = max(1, round(test_fraction * len(unique)))
    test_groups = set(unique[perm[:n_test]].tolist())
    in_test = np.array([g in test_groups for g in groups.tolist()])
    return np.flatnonzero(~in_test), np.flatnonzero(in_test)


@dataclass
class TrainResult:
    models: dict  # name -> TrainedModel
    metrics: dict  # name -> (mse, mae, r2) on held-out rows
    train_idx: np.ndarray
    test_idx: np.ndarray


def train_all(dataset: Dataset, split_seed: int = 0, cfg: TrainConfig | None = None) -> TrainResult:
    if len(dataset) < 100:
        raise ValueError(f"dataset too small ({len(dataset)} rows, need >= 100)")
    cfg = cfg or TrainConfig(seed=split_seed)
    groups = dataset.groups if dataset.groups is not None else np.arange(len(dataset))
    train_idx, test_idx = group_split(groups, 0.2, split_seed)
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    models, metrics = {}, {}
    for name in MODEL_ORDER:
        model = TRAINERS[ModelKind(name)](train, cfg)
        models[name] = model
        metrics[name] = evaluate(model, test)
    return TrainResult(models, metrics, train_idx, test_idx)


# -- evaluation --------------------------------------------------------------


@dataclass
class ResultsTable:
    accuracy: dict = field(default_factory=dict)  # method -> (top1, top2)
    model_metrics: dict = field(default_factory=dict)  # model -> (mse, mae, r2)

    def __post_init__(self):
        for method, (t1, t2) in self.accuracy.items():
            if not 0 <= t1 <= t2 <= 1:
                raise ValueError(f"{method}: need 0 <= top1 <= top2 <= 1")

    def format(self) -> str:
        lines = [f"{'Method':<24}{'Top-1':>8}{'Top-2':>8}"]
        for m in _ordered(self.accuracy, METHOD_ORDER):
            t1, t2 = self.accuracy[m]
            lines.append(f"{METHOD_LABELS.get(m, m):<24}{t1:>8.3f}{t2:>8.3f}")
        return "\n".join(lines)


def _ordered(d, order):
    return [k for k in order if k in d] + sorted(k for k in d if k not in order)


def evaluate_schedulers(cluster: SimCluster, models: dict, n_trials: int = DEFAULT_TRIALS, seed: int = 0,
                        bg_intensity: float = DEFAULT_BG_INTENSITY, matrix: WorkloadMatrix | None = None,
                        include_baseline: bool = True) -> ResultsTable:
    """Score every method on fresh trials; all methods see the same snapshot per trial.

    `models` maps method name to anything with ``predict_nodes``. Jobs are
    drawn uniformly from the matrix configs with a generator seeded by `seed`.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    matrix = matrix or generate_matrix(seed)
    job_rng = np.random.default_rng(seed)
    caps = {n: cluster.topology.capacity(n) for n in cluster.nodes}
    methods = (["baseline"] if include_baseline else []) + list(models)
    decisions = {m: [] for m in methods}
    truth = []
    for _ in range(n_trials):
        cluster.apply_background_load(bg_intensity)
        job = matrix.configs[int(job_rng.integers(len(matrix.configs)))]
        snap = cluster.sample_snapshot()
        truth.append(cluster.fastest_node(job))
        if include_baseline:
            decisions["baseline"].append(baseline_default(snap, job, caps))
        for name, model in models.items():
            decisions[name].append(rank_nodes(model, snap, job))
        cluster.clock += 60.0
    accuracy = {}
    for m in methods:
        h1 = topk_hits(decisions[m], truth, 1)
        h2 = topk_hits(decisions[m], truth, 2)
        accuracy[m] = (sum(h1) / n_trials, sum(h2) / n_trials)
    return ResultsTable(accuracy=accuracy)


def emit_results(table: ResultsTable, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = out_dir / "results.csv"
    lines = ["method,top1,top2"]
    for m in _ordered(table.accuracy, METHOD_ORDER):
        t1, t2 = table.accuracy[m]
        lines.append(f"{m},{t1!r},{t2!r}")
    results.write_text("\n".join(lines) + "\n")
    metrics = out_dir / "model_metrics.csv"
    write_model_metrics(table.model_metrics, metrics)
    return results, metrics


def write_model_metrics(metrics: dict, path) -> None:
    lines = ["model,mse,mae,r2"]
    for m in _ordered(metrics, MODEL_ORDER):
        mse, mae, r2 = metrics[m]
        lines.append(f"{m},{float(mse)!r},{float(mae)!r},{float(r2)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_model_metrics(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {r["model"]: (float(r["mse"]), float(r["mae"]), float(r["r2"])) for r in reader}


def load_results(out_dir) -> ResultsTable:
    out_dir = Path(out_dir)
    with open(out_dir / "results.csv", newline="") as fh:
        accuracy = {r["method"]: (float(r["top1"]), float(r["top2"])) for r in csv.DictReader(fh)}
    metrics_path = out_dir / "model_metrics.csv"
    metrics = read_model_metrics(metrics_path) if metrics_path.exists() else {}
    return ResultsTable(accuracy=accuracy, model_metrics=metrics)


def top1_gap(table: ResultsTable) -> dict:
    base = table.accuracy["baseline"][0]
    return {m: t1 - base for m, (t1, _) in table.accuracy.items() if m != "baseline"}


def expected_runs(matrix: WorkloadMatrix) -> int:
    return len(matrix.configs) * len(matrix.target_nodes) * matrix.repeats


__all__ = [
    "CSV_HEADER", "CollectedData", "ResultsTable", "TrainResult", "WorkloadMatrix",
    "collect_dataset", "emit_results", "evaluate_schedulers", "expected_runs", "generate_matrix",
    "group_split", "load_dataset_csv", "load_results", "read_model_metrics", "train_all",
    "write_model_metrics",
]
