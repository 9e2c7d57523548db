"""Placement decisions: predicted-duration ranking, default-scheduler baseline, Top-k."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .features import JobSpec
from .telemetry import ClusterSnapshot

MIB = 1024 * 1024
GIB = 1024 * MIB


class NoFeasibleNodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeCapacity:
    cpu_total: float = 6.0
    mem_total: float = 8 * GIB

    def __post_init__(self):
        if not (self.cpu_total > 0 and self.mem_total > 0):
            raise ValueError("node capacity must be positive")


@dataclass(frozen=True)
class PlacementDecision:
    job: JobSpec
    ranking: tuple  # ((node, predicted_duration_s), ...) best first
    chosen: str
    snapshot_timestamp: float

    @property
    def ranked_nodes(self) -> list[str]:
        return [n for n, _ in self.ranking]

    def manifest_record(self) -> dict:
        return {"job": self.job.to_dict(), "node": self.chosen, "nodeAffinity": self.chosen}

    def to_dict(self) -> dict:
        return {
            "job": self.job.to_dict(),
            "snapshot_timestamp": self.snapshot_timestamp,
            "ranking": [{"node": n, "predicted_duration_s": d} for n, d in self.ranking],
            "chosen": self.chosen,
            "manifest": self.manifest_record(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def decide(job: JobSpec, scores: Mapping[str, float], timestamp: float) -> PlacementDecision:
    """Rank nodes ascending by score, ties broken by node name."""
    if not scores:
        raise NoFeasibleNodeError("no nodes to rank")
    for node, value in scores.items():
        if not math.isfinite(value):
            raise ValueError(f"non-finite prediction for {node}")
    ranking = tuple(sorted(((n, float(v)) for n, v in scores.items()), key=lambda nv: (nv[1], nv[0])))
    return PlacementDecision(job=job, ranking=ranking, chosen=ranking[0][0], snapshot_timestamp=timestamp)


def rank_nodes(model, snapshot: ClusterSnapshot, job: JobSpec) -> PlacementDecision:
    """Predict the job's duration on every node and pick the fastest.

    `model` is anything with ``predict_nodes(snapshot, job) -> {node: seconds}``,
    normally a TrainedModel.
    """
    if not snapshot.nodes:
        raise NoFeasibleNodeError("empty snapshot")
    predictions = model.predict_nodes(snapshot, job)
    if set(predictions) != set(snapshot.nodes):
        raise ValueError("model did not predict exactly the snapshot's nodes")
    return decide(job, predictions, snapshot.timestamp)


def least_allocated_score(cpu_load: float, mem_available: float, cap: NodeCapacity) -> float:
    cpu_free = min(max((cap.cpu_total - cpu_load) / cap.cpu_total, 0.0), 1.0)
    mem_free = mem_available / cap.mem_total
    return (cpu_free + mem_free) / 2


def baseline_default(
    snapshot: ClusterSnapshot,
    job: JobSpec,
    capacities: Mapping[str, NodeCapacity] | None = None,
) -> PlacementDecision:
    """Emulate kube-scheduler: filter on memory, then score by least-allocated resources.

    Ranking entries carry the negated score so the best node still sorts first.
    """
    capacities = capacities or {}
    requested = job.executor_memory * MIB
    scores = {}
    for node, tel in snapshot.nodes.items():
        if tel.mem_available < requested:
            continue
        cap = capacities.get(node, NodeCapacity())
        scores[node] = -least_allocated_score(tel.cpu_load, tel.mem_available, cap)
    if not scores:
        raise NoFeasibleNodeError("no feasible node")
    return decide(job, scores, snapshot.timestamp)


def topk_hits(decisions: Sequence[PlacementDecision], truth: Sequence[str], k: int) -> list[bool]:
    if len(decisions) != len(truth):
        raise ValueError(f"got {len(decisions)} decisions but {len(truth)} truths")
    if k < 1:
        raise ValueError("k must be >= 1")
    return [t in d.ranked_nodes[:k] for d, t in zip(decisions, truth)]


def topk_accuracy(decisions: Sequence[PlacementDecision], truth: Sequence[str], k: int) -> float:
    hits = topk_hits(decisions, truth, k)
    if not hits:
        raise ValueError("no decisions to score")
    return sum(hits) / len(hits)
