"""Independent reference computations used by the tests.

Nothing here calls into the code paths it checks.
"""

from fractions import Fraction

import numpy as np

TIE_RTOL = 1e-9


def exact_rtt_stats(values):
    """Mean, max and population variance with rational arithmetic."""
    fr = [Fraction(v) for v in values]
    mean = sum(fr) / len(fr)
    var = sum((v - mean) ** 2 for v in fr) / len(fr)
    return float(mean), max(values), float(var)


def _sse(y):
    return float(np.sum((y - y.mean()) ** 2)) if len(y) else 0.0


def brute_force_splits(X, y, max_depth, min_samples_leaf=1):
    """Preorder (feature, threshold) list of a tree grown by exhaustive search.

    Every (feature, midpoint) pair is tried and scored by directly recomputing
    the SSE of both children.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []

    def grow(idx, depth):
        yy = y[idx]
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf or np.all(yy == yy[0]):
            return
        parent = _sse(yy)
        cands = []
        for f in range(X.shape[1]):
            vals = np.unique(X[idx, f])
            for a, b in zip(vals[:-1], vals[1:]):
                t = 0.5 * (a + b)
                if not t < b:
                    t = a
                mask = X[idx, f] <= t
                nl = int(mask.sum())
                if nl < min_samples_leaf or len(idx) - nl < min_samples_leaf:
                    continue
                gain = parent - _sse(yy[mask]) - _sse(yy[~mask])
                cands.append((gain, f, t))
        if not cands:
            return
        tol = TIE_RTOL * parent
        best = max(c[0] for c in cands)
        if best <= tol:
            return
        _, f, t = min((c for c in cands if c[0] >= best - tol), key=lambda c: (c[1], c[2]))
        out.append((f, t))
        mask = X[idx, f] <= t
        grow(idx[mask], depth + 1)
        grow(idx[~mask], depth + 1)

    grow(np.arange(len(y)), 0)
    return out


def ridge_normal_equations(X, y, lam):
    """Raw-unit ridge solution whose penalty equals lam * ||standardised weights||^2.

    Solves [1 X]^T [1 X] theta + P theta = [1 X]^T y with
    P = diag(0, lam * std_j^2) (std_j = 1 for constant columns).
    Returns (slopes, intercept).
    """
    X = np.asarray(X, dtype=float)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    A = np.hstack([np.ones((len(X), 1)), X])
    P = np.diag(np.concatenate([[0.0], lam * std ** 2]))
    theta = np.linalg.solve(A.T @ A + P, A.T @ y)
    return theta[1:], theta[0]
