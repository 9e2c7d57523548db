"""Feature construction: (node telemetry, job spec) -> 13-value vector."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .telemetry import ClusterSnapshot

FEATURE_NAMES = (
    "rtt_mean_s",
    "rtt_max_s",
    "rtt_std_s",
    "tx_bps",
    "rx_bps",
    "cpu_load1",
    "mem_available_bytes",
    "app_is_sort",
    "app_is_pagerank",
    "app_is_join",
    "input_size",
    "executor_count",
    "executor_memory_mb",
)
N_FEATURES = len(FEATURE_NAMES)


def feature_names() -> list[str]:
    return list(FEATURE_NAMES)


class AppType(enum.Enum):
    SORT = "sort"
    PAGERANK = "pagerank"
    JOIN = "join"

    @classmethod
    def parse(cls, value) -> "AppType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown app type {value!r}") from None


_APP_ORDER = (AppType.SORT, AppType.PAGERANK, AppType.JOIN)


@dataclass(frozen=True)
class JobSpec:
    app: AppType
    input_size: int
    executor_count: int
    executor_memory: int  # MB

    def __post_init__(self):
        object.__setattr__(self, "app", AppType.parse(self.app))
        for name in ("input_size", "executor_count", "executor_memory"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def __lt__(self, other):
        if not isinstance(other, JobSpec):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return (_APP_ORDER.index(self.app), self.input_size, self.executor_count, self.executor_memory)

    def to_dict(self) -> dict:
        return {
            "app": self.app.value,
            "input_size": self.input_size,
            "executor_count": self.executor_count,
            "executor_memory_mb": self.executor_memory,
        }


def encode_app_type(app: AppType) -> tuple[int, int, int]:
    app = AppType.parse(app)
    return tuple(int(app is a) for a in _APP_ORDER)


def build_features(node: str, snapshot: ClusterSnapshot, job: JobSpec) -> np.ndarray:
    """Feature vector for running `job` on `node`, ordered as FEATURE_NAMES."""
    try:
        tel = snapshot.nodes[node]
    except KeyError:
        raise KeyError(f"node not in snapshot: {node!r}") from None
    stats = tel.rtt_stats()
    return np.array(
        [
            stats.mean,
            stats.max,
            stats.std,
            tel.tx_rate,
            tel.rx_rate,
            tel.cpu_load,
            tel.mem_available,
            *encode_app_type(job.app),
            job.input_size,
            job.executor_count,
            job.executor_memory,
        ],
        dtype=float,
    )


def build_feature_matrix(snapshot: ClusterSnapshot, job: JobSpec) -> tuple[list[str], np.ndarray]:
    nodes = snapshot.node_ids
    return nodes, np.vstack([build_features(n, snapshot, job) for n in nodes])
