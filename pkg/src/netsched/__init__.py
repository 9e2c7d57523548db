"""Network-aware job placement: telemetry-driven completion-time prediction and ranking."""

from .decision import NodeCapacity, PlacementDecision, baseline_default, rank_nodes, topk_accuracy
from .features import AppType, JobSpec, build_features, encode_app_type, feature_names
from .telemetry import ClusterSnapshot, NodeTelemetry, RttStats, fetch_snapshot, load_snapshot, rtt_stats, save_snapshot

__version__ = "0.1.0"
