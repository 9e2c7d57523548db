"""
Top-1 / Top-2 accuracy of each scheduler on fresh trials.

Trials use a separate cluster seed from collection so no training state
leaks into evaluation.
"""

from netsched import harness
from netsched.simulator import OraclePredictor, init_cluster

# %%
data = harness.collect_dataset(init_cluster(seed=42), harness.generate_matrix(42))
trained = harness.train_all(data.dataset, split_seed=42)

# %%
table = harness.evaluate_schedulers(init_cluster(seed=43), trained.models, n_trials=200, seed=42)
print(table.format())
print("top-1 gain over baseline:", {m: round(g, 3) for m, g in harness.top1_gap(table).items()})

# %%
# Sanity check of the plumbing: the noiseless oracle is always right.
probe = init_cluster(seed=43)
ceiling = harness.evaluate_schedulers(probe, {"oracle": OraclePredictor(probe)}, n_trials=50, seed=1,
                                      include_baseline=False)
print(ceiling.format())
