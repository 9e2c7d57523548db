"""Deterministic discrete-state model of a geo-distributed 3-site cluster.

The ground-truth duration of a job on a node is

    base_seconds[app] * (input_size / 1e5) / executor_count**alpha
      * (1 + beta_net * shuffle_bytes / bw_eff)
      * (1 + beta_cpu * bg_cpu_load / cpu_total)
      * (1 + beta_rtt * rtt_mean / rtt_ref)
      * join_skew (Join on the hot-partition node only)
      * eps

with shuffle_bytes = bytes_shuffled_per_record[app] * input_size,
bw_eff = max(bw_cap - bg_net_bps, bw_cap / 100), rtt_mean the node's mean
noiseless RTT to its peers and eps ~ lognormal(0, noise_sigma).

Noiseless link RTT between nodes i and j is
base_rtt * (1 + rtt_load_gamma * (bg_net_i + bg_net_j) / bw_cap).

All randomness comes from one numpy Generator seeded at construction. The
draw order of every method is fixed and documented on the method.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .decision import GIB, MIB, NodeCapacity
from .features import AppType, JobSpec
from .telemetry import ClusterSnapshot, NodeTelemetry

# Table-3 anchor: noiseless Sort of 1e5 records, 1 executor, unloaded node at rtt_ref.
SORT_ANCHOR_S = 18.18
EPOCH0 = 1_700_000_000.0


class TopologyError(ValueError):
    pass


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Topology:
    sites: tuple  # ((site, (node, ...)), ...)
    base_rtt: dict  # {(site_a, site_b) sorted: seconds}
    intra_site_rtt: float = 0.0003
    capacities: dict = field(default_factory=dict)  # node -> NodeCapacity; missing = default

    def __post_init__(self):
        sites = tuple((str(s), tuple(str(n) for n in nodes)) for s, nodes in self.sites)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "base_rtt", {_pair(*k): float(v) for k, v in self.base_rtt.items()})
        names = [s for s, _ in sites]
        if len(set(names)) != len(names):
            raise TopologyError("duplicate site name")
        nodes = [n for _, ns in sites for n in ns]
        if len(set(nodes)) != len(nodes):
            dup = sorted({n for n in nodes if nodes.count(n) > 1})
            raise TopologyError(f"duplicate node name(s): {dup}")
        if len(nodes) < 2 or any(not n for n in nodes):
            raise TopologyError("topology needs at least 2 named nodes")
        if not self.intra_site_rtt > 0:
            raise TopologyError("intra_site_rtt must be positive")
        for a, b in combinations(names, 2):
            rtt = self.base_rtt.get(_pair(a, b))
            if rtt is None:
                raise TopologyError(f"no base_rtt for sites {a}/{b}")
            if not (math.isfinite(rtt) and rtt > self.intra_site_rtt):
                raise TopologyError(f"base_rtt {a}/{b} must exceed intra_site_rtt")
        unknown = set(self.capacities) - set(nodes)
        if unknown:
            raise TopologyError(f"capacities for unknown nodes {sorted(unknown)}")

    @property
    def nodes(self) -> list[str]:
        return sorted(n for _, ns in self.sites for n in ns)

    def site_of(self, node: str) -> str:
        for s, ns in self.sites:
            if node in ns:
                return s
        raise KeyError(node)

    def capacity(self, node: str) -> NodeCapacity:
        return self.capacities.get(node, NodeCapacity())

    def rtt(self, a: str, b: str) -> float:
        sa, sb = self.site_of(a), self.site_of(b)
        return self.intra_site_rtt if sa == sb else self.base_rtt[_pair(sa, sb)]

    def to_dict(self) -> dict:
        return {
            "sites": {s: list(ns) for s, ns in self.sites},
            "base_rtt_s": [{"a": a, "b": b, "rtt_s": v} for (a, b), v in sorted(self.base_rtt.items())],
            "intra_site_rtt_s": self.intra_site_rtt,
            "capacities": {
                n: {"cpu_total": c.cpu_total, "mem_total": c.mem_total}
                for n, c in sorted(self.capacities.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        return cls(
            sites=tuple((s, tuple(ns)) for s, ns in doc["sites"].items()),
            base_rtt={(e["a"], e["b"]): e["rtt_s"] for e in doc["base_rtt_s"]},
            intra_site_rtt=doc.get("intra_site_rtt_s", 0.0003),
            capacities={n: NodeCapacity(**c) for n, c in doc.get("capacities", {}).items()},
        )


def default_topology() -> Topology:
    # inter-site RTTs are stand-ins for three distinct geographic distances
    return Topology(
        sites=(("ucsd", ("node-1", "node-2")), ("fiu", ("node-3", "node-4")), ("sri", ("node-5", "node-6"))),
        base_rtt={("ucsd", "sri"): 0.011, ("fiu", "ucsd"): 0.031, ("fiu", "sri"): 0.065},
        intra_site_rtt=0.0003,
    )


def _calibrated_sort_base(shuffle_per_record=100.0, beta_net=1.0, beta_rtt=0.5, bw_cap=1.25e9):
    shuffle = shuffle_per_record * 1e5
    return SORT_ANCHOR_S / ((1 + beta_net * shuffle / bw_cap) * (1 + beta_rtt))


_SORT_BASE = _calibrated_sort_base()


@dataclass(frozen=True)
class OracleParams:
    base_seconds: dict = field(default_factory=lambda: {
        "sort": _SORT_BASE, "pagerank": 1.5 * _SORT_BASE, "join": 1.2 * _SORT_BASE})
    bytes_shuffled_per_record: dict = field(default_factory=lambda: {
        "sort": 100.0, "pagerank": 250.0, "join": 120.0})
    alpha: float = 0.7
    beta_net: float = 1.0
    beta_cpu: float = 0.5
    beta_rtt: float = 0.5
    rtt_ref: float = 0.010
    bw_cap: float = 1.25e9
    noise_sigma: float = 0.08
    # load dynamics
    rtt_load_gamma: float = 0.5
    join_skew: float = 1.25
    bg_download_bytes: float = 10e6
    bg_period_s: tuple = (0.0125, 0.025)
    bg_cpu_load: tuple = (0.5, 1.5)
    bg_mem_bytes: tuple = (64 * MIB, 256 * MIB)
    system_mem_used: float = 1.5 * GIB
    skew_mem_bytes: float = 1.0 * GIB
    # telemetry measurement noise, each multiplied by noise_sigma
    rtt_jitter: float = 0.5
    net_noise_bps: float = 5e5
    cpu_noise: float = 1.0
    mem_noise_bytes: float = 64 * MIB

    def __post_init__(self):
        for key in ("base_seconds", "bytes_shuffled_per_record"):
            table = {AppType.parse(k).value: float(v) for k, v in getattr(self, key).items()}
            if set(table) != {a.value for a in AppType}:
                raise ValueError(f"{key} must cover every app type")
            if any(not v > 0 for v in table.values()):
                raise ValueError(f"{key} values must be positive")
            object.__setattr__(self, key, table)
        for key in ("bg_period_s", "bg_cpu_load", "bg_mem_bytes"):
            lo, hi = (float(v) for v in getattr(self, key))
            if not 0 <= lo <= hi:
                raise ValueError(f"{key} must be an ordered non-negative range")
            object.__setattr__(self, key, (lo, hi))
        positive = ("alpha", "beta_net", "beta_cpu", "beta_rtt", "rtt_ref", "bw_cap", "bg_download_bytes")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")
        if self.bg_period_s[0] <= 0:
            raise ValueError("bg_period_s must be positive")
        non_negative = ("noise_sigma", "rtt_load_gamma", "system_mem_used", "skew_mem_bytes",
                        "rtt_jitter", "net_noise_bps", "cpu_noise", "mem_noise_bytes")
        for key in non_negative:
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0")
        if self.join_skew < 1:
            raise ValueError("join_skew must be >= 1")

    def noiseless(self) -> "OracleParams":
        return dataclasses.replace(self, noise_sigma=0.0)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        for key in ("bg_period_s", "bg_cpu_load", "bg_mem_bytes"):
            doc[key] = list(doc[key])
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "OracleParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown oracle parameters {sorted(unknown)}")
        return cls(**doc)


def oracle_formula(
    params: OracleParams,
    job: JobSpec,
    bg_net_bps: float,
    bg_cpu_load: float,
    rtt_mean: float,
    cpu_total: float,
    skewed: bool = False,
) -> float:
    """Noiseless ground-truth duration for the given node state."""
    app = job.app.value
    scale = params.base_seconds[app] * (job.input_size / 1e5) / job.executor_count ** params.alpha
    shuffle = params.bytes_shuffled_per_record[app] * job.input_size
    bw_eff = max(params.bw_cap - bg_net_bps, params.bw_cap / 100)
    d = (
        scale
        * (1 + params.beta_net * shuffle / bw_eff)
        * (1 + params.beta_cpu * bg_cpu_load / cpu_total)
        * (1 + params.beta_rtt * rtt_mean / params.rtt_ref)
    )
    if skewed and job.app is AppType.JOIN:
        d *= params.join_skew
    return d


@dataclass
class NodeState:
    bg_cpu_load: float = 0.0
    bg_net_bps: float = 0.0
    mem_used: float = 0.0


@dataclass(frozen=True)
class SimulatedRun:
    job: JobSpec
    node: str
    snapshot_before: ClusterSnapshot
    duration_s: float


class SimCluster:
    """Mutable cluster state plus its random stream. Single-threaded."""

    def __init__(self, topology: Topology, params: OracleParams, seed: int):
        self.topology = topology
        self.params = params
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.nodes = topology.nodes
        self.clock = EPOCH0
        self.skew_node: str | None = None
        self.state = {n: NodeState(mem_used=params.system_mem_used) for n in self.nodes}
        for n in self.nodes:
            if params.system_mem_used > topology.capacity(n).mem_total:
                raise TopologyError(f"system memory exceeds capacity on {n}")
        self._base = np.array([[topology.rtt(a, b) if a != b else 0.0 for b in self.nodes]
                               for a in self.nodes])

    def __repr__(self):
        return f"SimCluster(nodes={self.nodes}, seed={self.seed})"

    def _check_node(self, node):
        if node not in self.state:
            raise KeyError(f"unknown node {node!r}")

    def apply_background_load(self, intensity: float) -> "SimCluster":
        """Re-randomise background load on ceil(intensity * N) nodes.

        Draw order: ``rng.permutation(N)``, the first k indices (into the
        sorted node list) are loaded; then for each loaded node in that order
        one uniform download period, one uniform cpu load and one uniform pod
        memory; finally ``rng.integers(N)`` picks the hot-partition node.
        """
        if not 0 <= intensity <= 1:
            raise ValueError("intensity must be in [0, 1]")
        p = self.params
        n = len(self.nodes)
        k = math.ceil(intensity * n - 1e-9)
        order = self.rng.permutation(n)
        for name in self.nodes:
            self.state[name] = NodeState(mem_used=p.system_mem_used)
        for i in order[:k]:
            period = self.rng.uniform(*p.bg_period_s)
            cpu = self.rng.uniform(*p.bg_cpu_load)
            mem = self.rng.uniform(*p.bg_mem_bytes)
            st = self.state[self.nodes[i]]
            st.bg_net_bps = p.bg_download_bytes / period
            st.bg_cpu_load = cpu
            st.mem_used += mem
        self.skew_node = self.nodes[int(self.rng.integers(n))]
        self.state[self.skew_node].mem_used += p.skew_mem_bytes
        for name in self.nodes:
            st = self.state[name]
            st.mem_used = min(st.mem_used, self.topology.capacity(name).mem_total)
        return self

    def loaded_nodes(self) -> list[str]:
        return [n for n in self.nodes if self.state[n].bg_net_bps > 0]

    def noiseless_rtt_matrix(self) -> np.ndarray:
        bg = np.array([self.state[n].bg_net_bps for n in self.nodes])
        inflate = 1 + self.params.rtt_load_gamma * (bg[:, None] + bg[None, :]) / self.params.bw_cap
        return self._base * inflate

    def rtt_mean(self, node: str) -> float:
        self._check_node(node)
        i = self.nodes.index(node)
        row = self.noiseless_rtt_matrix()[i]
        return float(np.delete(row, i).mean())

    def sample_snapshot(self) -> ClusterSnapshot:
        """Noisy telemetry reading of the current state.

        Draw order: an (N, N) standard-normal block for RTT jitter, then an
        (N, 4) block for tx, rx, cpu and memory noise (rows = sorted nodes).
        """
        p = self.params
        s = p.noise_sigma
        n = len(self.nodes)
        rtt_z = self.rng.standard_normal((n, n))
        node_z = self.rng.standard_normal((n, 4))
        rtt = self.noiseless_rtt_matrix()
        measured = np.maximum(rtt * (1 + s * p.rtt_jitter * rtt_z), 0.0)
        nodes = {}
        for i, name in enumerate(self.nodes):
            st = self.state[name]
            cap = self.topology.capacity(name)
            z = node_z[i]
            nodes[name] = NodeTelemetry(
                rtt_to_peers={peer: float(measured[i, j]) for j, peer in enumerate(self.nodes) if j != i},
                tx_rate=max(st.bg_net_bps + s * p.net_noise_bps * z[0], 0.0),
                rx_rate=max(st.bg_net_bps + s * p.net_noise_bps * z[1], 0.0),
                cpu_load=max(st.bg_cpu_load + s * p.cpu_noise * z[2], 0.0),
                mem_available=max(cap.mem_total - st.mem_used - s * p.mem_noise_bytes * z[3], 0.0),
            )
        return ClusterSnapshot(timestamp=self.clock, nodes=nodes)

    def oracle_duration(self, job: JobSpec, node: str, noiseless: bool = False) -> float:
        """Ground-truth duration; the noisy variant draws one lognormal factor."""
        self._check_node(node)
        st = self.state[node]
        d = oracle_formula(
            self.params, job, st.bg_net_bps, st.bg_cpu_load, self.rtt_mean(node),
            self.topology.capacity(node).cpu_total, skewed=(node == self.skew_node),
        )
        if noiseless:
            return d
        return d * float(self.rng.lognormal(0.0, self.params.noise_sigma))

    def run_job(self, job: JobSpec, node: str, settle_s: float = 10.0) -> SimulatedRun:
        self._check_node(node)
        snap = self.sample_snapshot()
        duration = self.oracle_duration(job, node)
        self.clock += duration + settle_s
        return SimulatedRun(job=job, node=node, snapshot_before=snap, duration_s=duration)

    def counterfactual_durations(self, job: JobSpec) -> dict:
        return {n: self.oracle_duration(job, n, noiseless=True) for n in self.nodes}

    def fastest_node(self, job: JobSpec) -> str:
        durations = self.counterfactual_durations(job)
        return min(durations, key=lambda n: (durations[n], n))


def init_cluster(topology: Topology | None = None, params: OracleParams | None = None, seed: int = 0) -> SimCluster:
    return SimCluster(topology or default_topology(), params or OracleParams(), seed)


class OraclePredictor:
    """Wraps a cluster's noiseless oracle so it can stand in for a trained model."""

    def __init__(self, cluster: SimCluster):
        self.cluster = cluster

    def predict_nodes(self, snapshot, job) -> dict:
        return self.cluster.counterfactual_durations(job)


# -- config file -------------------------------------------------------------


def dump_config(topology: Topology | None = None, params: OracleParams | None = None) -> dict:
    return {
        "topology": (topology or default_topology()).to_dict(),
        "oracle": (params or OracleParams()).to_dict(),
    }


def load_config(path) -> tuple[Topology, OracleParams]:
    """Read topology and oracle parameters from a JSON file; absent sections take defaults."""
    doc = json.loads(Path(path).read_text())
    topo = Topology.from_dict(doc["topology"]) if "topology" in doc else default_topology()
    params = OracleParams.from_dict(doc["oracle"]) if "oracle" in doc else OracleParams()
    return topo, params
