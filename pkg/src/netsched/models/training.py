"""Training routines for the three regressor families."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .base import Dataset, ModelKind, TrainConfig, TrainedModel
from .tree import fit_tree


def train_linear(data: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    """Ridge regression on standardised features with an unpenalised intercept.

    Columns with zero variance keep a scale of 1, so they centre to zero and
    receive zero weight.
    """
    if len(data) < 2:
        raise ValueError("linear regression needs at least 2 rows")
    X, y = data.X, data.y
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    y_mean = float(y.mean())
    d = X.shape[1]
    # min-norm least squares on the augmented system handles lambda == 0
    A = np.vstack([Z, math.sqrt(cfg.ridge_lambda) * np.eye(d)])
    b = np.concatenate([y - y_mean, np.zeros(d)])
    weights, *_ = np.linalg.lstsq(A, b, rcond=None)
    return TrainedModel(
        kind=ModelKind.LINEAR,
        schema=list(data.schema),
        config=cfg,
        params={"intercept": y_mean, "weights": weights, "mean": mean, "scale": scale},
    )


def linear_coefficients(model: TrainedModel) -> tuple[np.ndarray, float]:
    """Slopes and intercept in raw (unstandardised) feature units."""
    p = model.params
    slopes = np.asarray(p["weights"]) / p["scale"]
    return slopes, float(p["intercept"] - slopes @ p["mean"])


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tree_index,)))


def _fit_forest_tree(X, y, cfg: TrainConfig, t: int):
    rng = tree_rng(cfg.seed, t)
    n = len(y)
    idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    max_features = math.ceil(cfg.feature_subsample * X.shape[1])
    return fit_tree(
        X[idx], y[idx],
        max_depth=cfg.max_depth,
        min_samples_leaf=cfg.min_samples_leaf,
        max_features=max_features,
        rng=rng,
    )


def train_random_forest(data: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    X, y = data.X, data.y
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            trees = list(pool.map(lambda t: _fit_forest_tree(X, y, cfg, t), range(cfg.n_trees)))
    else:
        trees = [_fit_forest_tree(X, y, cfg, t) for t in range(cfg.n_trees)]
    return TrainedModel(ModelKind.RANDOM_FOREST, list(data.schema), cfg, {"trees": trees})


def train_gbdt(data: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    """Squared-loss boosting: each round fits a tree to the current residuals."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    X, y = data.X, data.y
    base = float(y.mean())
    lr = cfg.learning_rate
    total = np.zeros(len(y))
    trees = []
    for _ in range(cfg.n_rounds):
        residual = y - (base + lr * total)
        tree = fit_tree(X, residual, max_depth=cfg.gbdt_max_depth,
                        min_samples_leaf=cfg.min_samples_leaf)
        total += tree.predict(X)
        trees.append(tree)
    return TrainedModel(
        ModelKind.GRADIENT_BOOSTED,
        list(data.schema),
        cfg,
        {"base_prediction": base, "learning_rate": lr, "trees": trees},
    )


TRAINERS = {
    ModelKind.LINEAR: train_linear,
    ModelKind.RANDOM_FOREST: train_random_forest,
    ModelKind.GRADIENT_BOOSTED: train_gbdt,
}
