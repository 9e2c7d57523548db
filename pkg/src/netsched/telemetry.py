"""Per-node telemetry snapshots: validation, file I/O and Prometheus ingestion."""

from __future__ import annotations

import json
import math
import time
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional


class TelemetryError(Exception):
    """Base class for every telemetry failure."""


class SnapshotParseError(TelemetryError):
    """The snapshot file is not valid JSON."""


class SnapshotSchemaError(TelemetryError):
    """The snapshot document does not have the expected structure."""


class InvalidTelemetryError(TelemetryError, ValueError):
    """A telemetry value breaks an invariant (negative, non-finite, incomplete mesh)."""


class FetchError(TelemetryError):
    """The metrics endpoint could not be queried or answered badly."""


class MissingMetricError(FetchError):
    """A node is missing one of the required metric families."""


@dataclass(frozen=True)
class RttStats:
    mean: float
    max: float
    std: float


def _check_value(value, where: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidTelemetryError(f"invalid telemetry: {where} is not a number") from None
    if not math.isfinite(value) or value < 0:
        raise InvalidTelemetryError(f"invalid telemetry: {where} = {value!r}")
    return value


def rtt_stats(rtts: Iterable[float]) -> RttStats:
    """Mean, max and population standard deviation of a node's peer RTTs."""
    values = [float(v) for v in rtts]
    if not values:
        raise InvalidTelemetryError("no peers")
    for v in values:
        if not math.isfinite(v) or v < 0:
            raise InvalidTelemetryError(f"invalid telemetry: rtt value {v!r}")
    # sorting makes the float sums independent of input order
    values.sort()
    n = len(values)
    mean = math.fsum(values) / n
    if values[0] == values[-1]:
        return RttStats(values[0], values[0], 0.0)
    top = values[-1]
    # normalise by the max so tiny RTTs cannot underflow the squared deviations
    unit = [v / top for v in values]
    unit_mean = math.fsum(unit) / n
    var = math.fsum((u - unit_mean) ** 2 for u in unit) / n
    mean = min(max(mean, values[0]), top)
    return RttStats(mean=mean, max=top, std=top * math.sqrt(var))


@dataclass(frozen=True)
class NodeTelemetry:
    rtt_to_peers: Mapping[str, float]
    tx_rate: float
    rx_rate: float
    cpu_load: float
    mem_available: float

    def __post_init__(self):
        rtts = {}
        for peer, value in self.rtt_to_peers.items():
            rtts[str(peer)] = _check_value(value, f"rtt to {peer}")
        object.__setattr__(self, "rtt_to_peers", dict(sorted(rtts.items())))
        for name in ("tx_rate", "rx_rate", "cpu_load", "mem_available"):
            object.__setattr__(self, name, _check_value(getattr(self, name), name))

    def rtt_stats(self) -> RttStats:
        return rtt_stats(self.rtt_to_peers.values())


@dataclass(frozen=True)
class ClusterSnapshot:
    """One timestamped reading of every node; validated as a full RTT mesh."""

    timestamp: float
    nodes: Mapping[str, NodeTelemetry] = field(default_factory=dict)

    def __post_init__(self):
        ts = float(self.timestamp)
        if not math.isfinite(ts):
            raise InvalidTelemetryError("invalid telemetry: timestamp is not finite")
        object.__setattr__(self, "timestamp", ts)
        nodes = dict(sorted(self.nodes.items()))
        if len(nodes) < 2:
            raise InvalidTelemetryError("invalid telemetry: snapshot needs at least 2 nodes")
        for name, tel in nodes.items():
            if not name:
                raise InvalidTelemetryError("invalid telemetry: empty node name")
            if not isinstance(tel, NodeTelemetry):
                raise SnapshotSchemaError(f"node {name}: expected NodeTelemetry")
            if name in tel.rtt_to_peers:
                raise InvalidTelemetryError(f"invalid telemetry: node {name} has an rtt to itself")
            expected = set(nodes) - {name}
            got = set(tel.rtt_to_peers)
            if got != expected:
                missing = sorted(expected - got)
                extra = sorted(got - expected)
                raise InvalidTelemetryError(
                    f"invalid telemetry: node {name} rtt mesh mismatch "
                    f"(missing {missing}, unknown {extra})"
                )
        object.__setattr__(self, "nodes", nodes)

    @property
    def node_ids(self) -> list[str]:
        return list(self.nodes)

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "nodes": {
                name: {
                    "rtt_s": dict(tel.rtt_to_peers),
                    "tx_bps": tel.tx_rate,
                    "rx_bps": tel.rx_rate,
                    "cpu_load1": tel.cpu_load,
                    "mem_available_bytes": tel.mem_available,
                }
                for name, tel in self.nodes.items()
            },
        }

    @classmethod
    def from_dict(cls, doc) -> "ClusterSnapshot":
        if not isinstance(doc, dict):
            raise SnapshotSchemaError("snapshot must be a JSON object")
        for key in ("timestamp", "nodes"):
            if key not in doc:
                raise SnapshotSchemaError(f"snapshot is missing field {key!r}")
        if not isinstance(doc["nodes"], dict):
            raise SnapshotSchemaError("field 'nodes' must be an object")
        if isinstance(doc["timestamp"], bool) or not isinstance(doc["timestamp"], (int, float)):
            raise SnapshotSchemaError("field 'timestamp' must be a number")
        nodes = {}
        for name, entry in doc["nodes"].items():
            if not isinstance(entry, dict):
                raise SnapshotSchemaError(f"node {name}: entry must be an object")
            for key in ("rtt_s", "tx_bps", "rx_bps", "cpu_load1", "mem_available_bytes"):
                if key not in entry:
                    raise SnapshotSchemaError(f"node {name}: missing field {key!r}")
            if not isinstance(entry["rtt_s"], dict):
                raise SnapshotSchemaError(f"node {name}: field 'rtt_s' must be an object")
            try:
                nodes[name] = NodeTelemetry(
                    rtt_to_peers=entry["rtt_s"],
                    tx_rate=entry["tx_bps"],
                    rx_rate=entry["rx_bps"],
                    cpu_load=entry["cpu_load1"],
                    mem_available=entry["mem_available_bytes"],
                )
            except InvalidTelemetryError as exc:
                raise InvalidTelemetryError(f"{exc} (node {name})") from None
        return cls(timestamp=doc["timestamp"], nodes=nodes)


def save_snapshot(snapshot: ClusterSnapshot, path) -> None:
    Path(path).write_text(json.dumps(snapshot.to_dict(), indent=2) + "\n")


def load_snapshot(path) -> ClusterSnapshot:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"{path}: {exc}") from None
    return ClusterSnapshot.from_dict(doc)


# -- Prometheus ingestion ----------------------------------------------------


@dataclass(frozen=True)
class QueryConfig:
    """Instant-query strings, one per metric family, plus label names used for joining."""

    cpu_load1: str = "node_load1"
    mem_available_bytes: str = "node_memory_MemAvailable_bytes"
    tx_bps: str = "rate(node_network_transmit_bytes_total[1m])"
    rx_bps: str = "rate(node_network_receive_bytes_total[1m])"
    rtt_s: str = "ping_rtt_mean_seconds"
    node_label: str = "node"
    source_label: str = "source"
    target_label: str = "target"
    timeout_s: float = 5.0

    @classmethod
    def from_file(cls, path) -> "QueryConfig":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown query config keys: {sorted(unknown)}")
        return cls(**doc)


_NODE_FAMILIES = ("tx_bps", "rx_bps", "cpu_load1", "mem_available_bytes")


def _instant_query(base_url: str, query: str, timeout: float) -> list:
    url = base_url.rstrip("/") + "/api/v1/query?" + urllib.parse.urlencode({"query": query})
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"query {query!r}: HTTP {exc.code}") from None
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"query {query!r}: {exc}") from None
    if status != 200:
        raise FetchError(f"query {query!r}: HTTP {status}")
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        raise FetchError(f"query {query!r}: response is not JSON") from None
    if doc.get("status") != "success":
        raise FetchError(f"query {query!r}: status {doc.get('status')!r}")
    data = doc.get("data") or {}
    if data.get("resultType") != "vector":
        raise FetchError(f"query {query!r}: expected a vector result")
    return data.get("result", [])


def _sample_value(sample: dict, query: str) -> float:
    try:
        value = float(sample["value"][1])
    except (KeyError, IndexError, TypeError, ValueError):
        raise FetchError(f"query {query!r}: unparseable sample {sample!r}") from None
    return value


def fetch_snapshot(endpoint: str, query_config: Optional[QueryConfig] = None) -> ClusterSnapshot:
    """Query a Prometheus-compatible HTTP API and join the results into a snapshot.

    Every metric family is fetched with one instant query; queries run
    concurrently. A node missing any family, or a missing mesh pair, is an
    error rather than a default.
    """
    cfg = query_config or QueryConfig()
    started = time.time()
    families = {name: getattr(cfg, name) for name in _NODE_FAMILIES + ("rtt_s",)}
    with ThreadPoolExecutor(max_workers=len(families)) as pool:
        futures = {
            name: pool.submit(_instant_query, endpoint, q, cfg.timeout_s)
            for name, q in families.items()
        }
        results = {name: fut.result() for name, fut in futures.items()}

    per_node: Dict[str, Dict[str, float]] = {}
    for name in _NODE_FAMILIES:
        query = families[name]
        for sample in results[name]:
            node = sample.get("metric", {}).get(cfg.node_label)
            if not node:
                raise FetchError(f"query {query!r}: sample without {cfg.node_label!r} label")
            per_node.setdefault(node, {})[name] = _sample_value(sample, query)

    rtts: Dict[str, Dict[str, float]] = {}
    for sample in results["rtt_s"]:
        labels = sample.get("metric", {})
        src, dst = labels.get(cfg.source_label), labels.get(cfg.target_label)
        if not src or not dst:
            raise FetchError(f"query {cfg.rtt_s!r}: sample without source/target labels")
        if src != dst:
            rtts.setdefault(src, {})[dst] = _sample_value(sample, cfg.rtt_s)

    all_nodes = sorted(set(per_node) | set(rtts) | {t for m in rtts.values() for t in m})
    nodes = {}
    for node in all_nodes:
        values = per_node.get(node, {})
        for name in _NODE_FAMILIES:
            if name not in values:
                raise MissingMetricError(f"missing metric {families[name]} for {node}")
        peers = rtts.get(node, {})
        for peer in all_nodes:
            if peer != node and peer not in peers:
                raise MissingMetricError(f"missing metric {cfg.rtt_s} for {node} -> {peer}")
        try:
            nodes[node] = NodeTelemetry(
                rtt_to_peers=peers,
                tx_rate=values["tx_bps"],
                rx_rate=values["rx_bps"],
                cpu_load=values["cpu_load1"],
                mem_available=values["mem_available_bytes"],
            )
        except InvalidTelemetryError as exc:
            raise InvalidTelemetryError(f"{exc} (node {node})") from None
    return ClusterSnapshot(timestamp=started, nodes=nodes)
