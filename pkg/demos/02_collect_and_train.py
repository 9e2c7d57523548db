"""
Collect a training set from the simulator and fit the three regressors.

The whole thing takes a few seconds; the printed importances show which
telemetry the tree models actually lean on.
"""

import numpy as np

from netsched import harness
from netsched.models import feature_importance, standardized_weights
from netsched.simulator import init_cluster

# %%
cluster = init_cluster(seed=42)
matrix = harness.generate_matrix(42)
print("runs in the matrix:", harness.expected_runs(matrix))

data = harness.collect_dataset(cluster, matrix)
print("rows:", len(data.dataset), " mean duration: %.1fs" % data.dataset.y.mean())

# %%
# Grouped 80/20 split: every repeat of a (configuration, node) pair stays
# on the same side.
result = harness.train_all(data.dataset, split_seed=42)
for name, (mse, mae, r2) in result.metrics.items():
    print(f"{name:<7} mse={mse:12.1f}  mae={mae:8.2f}  r2={r2:6.3f}")

# %%
imp = feature_importance(result.models["forest"])
top = sorted(imp, key=imp.get, reverse=True)[:5]
print("forest top features:", [(k, round(imp[k], 3)) for k in top])

w = standardized_weights(result.models["linear"])
print("largest linear weights:", sorted(w, key=lambda k: -abs(w[k]))[:3])

# %%
# Predictions vs truth on a handful of held-out rows.
test = data.dataset.subset(result.test_idx[:8])
pred = result.models["gbdt"].predict_many(test.X)
print(np.column_stack([test.y, pred]).round(1))
