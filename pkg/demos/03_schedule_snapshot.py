"""
Rank nodes for one job from a saved snapshot, the way the CLI does.

A quick forest is trained inline so the script is self contained.
"""

import json
import tempfile
from pathlib import Path

from netsched import harness
from netsched.decision import baseline_default, rank_nodes
from netsched.features import AppType, JobSpec
from netsched.models import TrainConfig, load_model, save_model, train_random_forest
from netsched.simulator import init_cluster
from netsched.telemetry import load_snapshot, save_snapshot

# %%
cluster = init_cluster(seed=3)
data = harness.collect_dataset(cluster, harness.generate_matrix(3))
forest = train_random_forest(data.dataset, TrainConfig(seed=3, n_trees=30))

tmp = Path(tempfile.mkdtemp())
save_model(forest, tmp / "forest.model")
model = load_model(tmp / "forest.model")

# %%
cluster.apply_background_load(0.5)
save_snapshot(cluster.sample_snapshot(), tmp / "snap.json")
snap = load_snapshot(tmp / "snap.json")
print("loaded nodes:", cluster.loaded_nodes())

# %%
job = JobSpec(AppType.PAGERANK, 5_000_000, 2, 1024)
decision = rank_nodes(model, snap, job)
print(json.dumps(decision.to_dict(), indent=2))

# the resource-only baseline for comparison
print("baseline picks:", baseline_default(snap, job).chosen)
print("true fastest:  ", cluster.fastest_node(job))
