"""CART regression tree with variance-reduction splits.

Split selection is exact and deterministic: every midpoint between
consecutive distinct values of every allowed feature is scored by its
reduction in sum of squared error. Gains within ``TIE_RTOL * parent_sse`` of
the best are treated as ties and resolved by lowest feature index, then
lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TIE_RTOL = 1e-9
LEAF = -1


@dataclass
class RegressionTree:
    """Flat array tree; node 0 is the root, leaves have feature == -1.

    A sample goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[idx]
            internal = feat != LEAF
            if not internal.any():
                return self.value[idx].astype(float)
            r, n, f = rows[internal], idx[internal], feat[internal]
            go_left = X[r, f] <= self.threshold[n]
            idx[r] = np.where(go_left, self.left[n], self.right[n])

    def splits(self) -> list[tuple[int, float]]:
        """(feature, threshold) of every internal node in preorder."""
        out = []
        stack = [0]
        while stack:
            i = stack.pop()
            if self.feature[i] != LEAF:
                out.append((int(self.feature[i]), float(self.threshold[i])))
                stack.append(int(self.right[i]))
                stack.append(int(self.left[i]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionTree":
        ints = ("feature", "left", "right", "n_samples")
        return cls(**{
            k: np.asarray(doc[k], dtype=np.intp if k in ints else float)
            for k in ("feature", "threshold", "left", "right", "value", "gain", "n_samples")
        })

    def validate(self, n_features: int) -> None:
        n = self.n_nodes
        if n == 0:
            raise ValueError("tree has no nodes")
        for arr in (self.threshold, self.left, self.right, self.value, self.gain, self.n_samples):
            if len(arr) != n:
                raise ValueError("tree arrays have inconsistent lengths")
        if not np.all(np.isfinite(self.value)):
            raise ValueError("tree has non-finite leaf values")
        internal = self.feature != LEAF
        if np.any(self.feature[internal] >= n_features) or np.any(self.feature[internal] < 0):
            raise ValueError("tree split feature out of range")
        children = np.concatenate([self.left[internal], self.right[internal]])
        if np.any(children <= 0) or np.any(children >= n) or len(set(children.tolist())) != len(children):
            raise ValueError("tree child links are corrupt")


def best_split(X, y, features, min_samples_leaf):
    """Best (feature, threshold, gain) over `features`, or None if no valid split.

    `y` should be centred on the node mean to keep the sums well conditioned.
    """
    n = len(y)
    total = y.sum()
    parent_term = total * total / n
    sse_parent = float(np.dot(y, y) - parent_term)
    tol = TIE_RTOL * max(sse_parent, 0.0)
    lo, hi = min_samples_leaf - 1, n - min_samples_leaf - 1
    if hi < lo:
        return None

    best = None  # (gain, feature, threshold)
    candidates = []
    n_left = np.arange(1, n + 1, dtype=float)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        csum = np.cumsum(y[order])
        pos = np.arange(lo, hi + 1)
        pos = pos[xs[pos] < xs[pos + 1]]
        if len(pos) == 0:
            continue
        s_left = csum[pos]
        nl = n_left[pos]
        s_right = total - s_left
        gains = s_left * s_left / nl + s_right * s_right / (n - nl) - parent_term
        k = int(np.argmax(gains))
        g = float(gains[k])
        if best is None or g > best:
            best = g
        candidates.append((f, xs, pos, gains))

    if best is None or best <= tol:
        return None
    for f, xs, pos, gains in sorted(candidates, key=lambda c: c[0]):
        hit = np.flatnonzero(gains >= best - tol)
        if len(hit):
            i = pos[hit[0]]  # positions ascend, so the first hit has the lowest threshold
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not thr < xs[i + 1]:
                thr = xs[i]
            return f, float(thr), float(gains[hit[0]])
    return None


def fit_tree(
    X,
    y,
    max_depth: int = 8,
    min_samples_leaf: int = 1,
    feature_indices=None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> RegressionTree:
    """Grow a regression tree greedily.

    If `max_features` is smaller than the allowed feature set, each split
    considers a fresh random subset of that size drawn from `rng`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if len(y) == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    if max_depth < 0 or min_samples_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_samples_leaf >= 1")
    allowed = np.arange(X.shape[1]) if feature_indices is None else np.unique(feature_indices)
    subsample = max_features is not None and max_features < len(allowed)
    if subsample and rng is None:
        raise ValueError("feature subsampling needs an rng")

    feature, threshold, left, right, value, gain, n_samples = [], [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        gain.append(0.0)
        n_samples.append(len(idx))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    queue = [(root, np.arange(len(y)), 0)]
    # breadth-first so node numbering is stable
    head = 0
    while head < len(queue):
        node, idx, depth = queue[head]
        head += 1
        yy = y[idx]
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf or np.all(yy == yy[0]):
            continue
        feats = allowed
        if subsample:
            feats = np.sort(rng.choice(allowed, size=max_features, replace=False))
        split = best_split(X[idx], yy - value[node], feats, min_samples_leaf)
        if split is None:
            continue
        f, thr, g = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node], gain[node] = f, thr, g
        left[node] = new_node(idx[mask])
        right[node] = new_node(idx[~mask])
        queue.append((left[node], idx[mask], depth + 1))
        queue.append((right[node], idx[~mask], depth + 1))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
        gain=np.asarray(gain, dtype=float),
        n_samples=np.asarray(n_samples, dtype=np.intp),
    )
