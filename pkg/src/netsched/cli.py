"""Command-line entry point: collect, train, evaluate, schedule, topology."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .decision import rank_nodes
from .features import AppType, JobSpec
from .models import ModelError, TrainConfig, load_model, save_model
from .simulator import dump_config, init_cluster, load_config
from .telemetry import QueryConfig, TelemetryError, fetch_snapshot, load_snapshot

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
MODEL_FILES = {name: f"{name}.model" for name in harness.MODEL_ORDER}


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def derive_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(stage,)).generate_state(1)[0])


def _sim_config(path):
    if path is None:
        return None, None
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return load_config(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from None


def cmd_collect(args) -> int:
    topo, params = _sim_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cluster = init_cluster(topo, params, seed=args.seed)
    matrix = harness.generate_matrix(args.seed, cluster.nodes)
    path = out / "dataset.csv"
    data = harness.collect_dataset(cluster, matrix, args.bg_intensity, out_path=path)
    print(f"{len(data.dataset)} rows -> {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    if not Path(args.dataset).is_file():
        raise UsageError(f"dataset not found: {args.dataset}")
    data = harness.load_dataset_csv(args.dataset)
    result = harness.train_all(data.dataset, split_seed=args.seed, cfg=TrainConfig(seed=args.seed))
    model_dir = Path(args.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    for name, model in result.models.items():
        save_model(model, model_dir / MODEL_FILES[name])
    harness.write_model_metrics(result.metrics, model_dir / "model_metrics.csv")
    for name, (mse, mae, r2) in result.metrics.items():
        _log(f"{name:<8} held-out mse={mse:.4g} mae={mae:.4g} r2={r2:.4f}")
    print(f"models -> {model_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model_dir = Path(args.model_dir)
    missing = [f for f in MODEL_FILES.values() if not (model_dir / f).is_file()]
    if missing:
        raise UsageError(f"missing model files in {model_dir}: {', '.join(missing)}")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    topo, params = _sim_config(args.config)
    models = {name: load_model(model_dir / f) for name, f in MODEL_FILES.items()}
    cluster = init_cluster(topo, params, seed=derive_seed(args.seed, 1))
    table = harness.evaluate_schedulers(cluster, models, args.trials, args.seed, args.bg_intensity,
                                        harness.generate_matrix(args.seed, cluster.nodes))
    metrics_path = model_dir / "model_metrics.csv"
    if metrics_path.is_file():
        table.model_metrics = harness.read_model_metrics(metrics_path)
    results, _ = harness.emit_results(table, args.out)
    print(table.format())
    _log(f"results -> {results}")
    return EXIT_OK


def cmd_schedule(args) -> int:
    if (args.snapshot is None) == (args.endpoint is None):
        raise UsageError("give exactly one of --snapshot or --endpoint")
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    model = load_model(args.model)
    if args.snapshot is not None:
        if not Path(args.snapshot).is_file():
            raise UsageError(f"snapshot file not found: {args.snapshot}")
        snapshot = load_snapshot(args.snapshot)
    else:
        qcfg = QueryConfig.from_file(args.query_config) if args.query_config else QueryConfig()
        if args.timeout is not None:
            qcfg = QueryConfig(**{**qcfg.__dict__, "timeout_s": args.timeout})
        snapshot = fetch_snapshot(args.endpoint, qcfg)
    try:
        job = JobSpec(args.app, args.input_size, args.executors, args.executor_memory)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    decision = rank_nodes(model, snapshot, job)
    print(decision.to_json())
    return EXIT_OK


def cmd_topology(args) -> int:
    if not args.dump:
        raise UsageError("topology: nothing to do (use --dump)")
    topo, params = _sim_config(args.config)
    print(json.dumps(dump_config(topo, params), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="netsched", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--seed", type=int, default=42, help="master seed; the only entropy source")
        if config:
            p.add_argument("--config", default=None, help="topology/oracle JSON (see `topology --dump`)")

    p = sub.add_parser("collect", help="simulate the workload matrix and write dataset.csv", formatter_class=fmt)
    common(p)
    p.add_argument("--out", default="data", help="output directory")
    p.add_argument("--bg-intensity", type=float, default=harness.DEFAULT_BG_INTENSITY,
                   help="fraction of nodes carrying background load per run")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train linear, forest and gbdt models", formatter_class=fmt)
    common(p, config=False)
    p.add_argument("--dataset", default="data/dataset.csv")
    p.add_argument("--model-dir", default="models")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Top-1/Top-2 accuracy against the default scheduler", formatter_class=fmt)
    common(p)
    p.add_argument("--model-dir", default="models")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--trials", type=int, default=harness.DEFAULT_TRIALS)
    p.add_argument("--bg-intensity", type=float, default=harness.DEFAULT_BG_INTENSITY)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", help="rank nodes for one job and print the decision JSON", formatter_class=fmt)
    p.add_argument("--model", default="models/forest.model")
    p.add_argument("--snapshot", default=None, help="snapshot JSON file")
    p.add_argument("--endpoint", default=None, help="Prometheus base URL")
    p.add_argument("--query-config", default=None, help="JSON file overriding metric queries")
    p.add_argument("--timeout", type=float, default=None, help="per-query timeout in seconds (default 5)")
    p.add_argument("--app", choices=[a.value for a in AppType], default="sort")
    p.add_argument("--input-size", type=int, default=100_000)
    p.add_argument("--executors", type=int, default=1)
    p.add_argument("--executor-memory", type=int, default=512, help="MB")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("topology", help="print simulator configuration", formatter_class=fmt)
    p.add_argument("--dump", action="store_true", help="print topology and oracle parameters as JSON")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_topology)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (TelemetryError, ModelError, ValueError, OSError, KeyError) as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
