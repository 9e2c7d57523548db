"""
A tour of the simulated six-node cluster.

We load a little background traffic onto a few nodes, read a telemetry
snapshot and compare what each node would take for the same Sort job.
"""

import numpy as np

from netsched.features import AppType, JobSpec
from netsched.simulator import default_topology, init_cluster

# %%
# Three sites, two nodes each. Cross-site RTTs are much larger than the
# in-site ones.
topo = default_topology()
for site, nodes in topo.sites:
    print(site, nodes)
print("node-1 -> node-5 rtt:", topo.rtt("node-1", "node-5"))

# %%
# Background load lands on a random third of the nodes.
cluster = init_cluster(seed=7)
cluster.apply_background_load(1 / 3)
print("loaded:", cluster.loaded_nodes())

snap = cluster.sample_snapshot()
for name, tel in snap.nodes.items():
    s = tel.rtt_stats()
    print(f"{name}  rtt_mean={s.mean * 1e3:6.2f}ms  tx={tel.tx_rate / 1e6:7.1f}MB/s  load1={tel.cpu_load:4.2f}")

# %%
# Counterfactual durations are only available in simulation.
job = JobSpec(AppType.SORT, 5_000_000, 2, 1024)
durations = cluster.counterfactual_durations(job)
for name in sorted(durations, key=durations.get):
    print(f"{name}  {durations[name]:8.2f}s")
print("fastest:", cluster.fastest_node(job))

# %%
# A real run adds multiplicative noise on top.
runs = np.array([cluster.run_job(job, "node-1").duration_s for _ in range(5)])
print("node-1 runs:", np.round(runs, 2))
