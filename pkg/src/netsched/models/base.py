"""Dataset, training config and the serialisable TrainedModel container."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..features import N_FEATURES, build_feature_matrix, feature_names
from .tree import RegressionTree

FORMAT_NAME = "netsched-model"
FORMAT_VERSION = 1


class ModelError(Exception):
    pass


class SchemaMismatchError(ModelError, ValueError):
    pass


class ModelFormatError(ModelError):
    """Unreadable, corrupt or wrong-version model file."""


class ModelKind(enum.Enum):
    LINEAR = "linear"
    RANDOM_FOREST = "forest"
    GRADIENT_BOOSTED = "gbdt"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: list = field(default_factory=feature_names)
    groups: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.schema = list(self.schema)
        if self.X.shape[0] != len(self.y):
            raise ValueError("X and y have different row counts")
        if self.X.shape[1] != len(self.schema):
            raise SchemaMismatchError(
                f"rows have {self.X.shape[1]} values but the schema has {len(self.schema)}"
            )
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")
        if not np.all(np.isfinite(self.y)) or np.any(self.y <= 0):
            raise ValueError("durations must be finite and > 0")
        if self.groups is not None:
            self.groups = np.asarray(self.groups)
            if len(self.groups) != len(self.y):
                raise ValueError("groups must have one entry per row")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        groups = None if self.groups is None else self.groups[idx]
        return Dataset(self.X[idx], self.y[idx], self.schema, groups)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    ridge_lambda: float = 1e-6
    n_trees: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 2
    feature_subsample: float = 1 / 3
    bootstrap: bool = True
    n_rounds: int = 200
    learning_rate: float = 0.1
    gbdt_max_depth: int = 4
    n_jobs: int = 1

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.n_trees < 1 or self.min_samples_leaf < 1 or self.n_rounds < 0:
            raise ValueError("n_trees and min_samples_leaf must be >= 1, n_rounds >= 0")
        if self.max_depth < 0 or self.gbdt_max_depth < 0:
            raise ValueError("tree depths must be >= 0")
        if not 0 < self.feature_subsample <= 1:
            raise ValueError("feature_subsample must be in (0, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("n_jobs")  # execution detail, never changes the model
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass
class TrainedModel:
    """A fitted regressor.

    `params` holds, per kind:
      linear: intercept, weights, mean, scale (weights act on standardised inputs)
      forest: trees
      gbdt:   base_prediction, learning_rate, trees
    """

    kind: ModelKind
    schema: list
    config: TrainConfig
    params: dict

    def predict_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.schema):
            raise SchemaMismatchError(
                f"feature vector has {X.shape[1]} values, model expects {len(self.schema)}"
            )
        p = self.params
        if self.kind is ModelKind.LINEAR:
            Z = (X - p["mean"]) / p["scale"]
            return p["intercept"] + Z @ p["weights"]
        total = np.zeros(len(X))
        for tree in p["trees"]:
            total += tree.predict(X)
        if self.kind is ModelKind.RANDOM_FOREST:
            return total / len(p["trees"])
        return p["base_prediction"] + p["learning_rate"] * total

    def staged_predict(self, X):
        """Yield gbdt predictions after 0, 1, ..., n_rounds trees."""
        if self.kind is not ModelKind.GRADIENT_BOOSTED:
            raise ModelError("staged_predict is only defined for gbdt models")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = self.params
        total = np.zeros(len(X))
        yield p["base_prediction"] + p["learning_rate"] * total
        for tree in p["trees"]:
            total += tree.predict(X)
            yield p["base_prediction"] + p["learning_rate"] * total

    def predict_nodes(self, snapshot, job) -> dict:
        if list(self.schema) != feature_names():
            raise SchemaMismatchError("model schema does not match feature_names()")
        nodes, X = build_feature_matrix(snapshot, job)
        return dict(zip(nodes, self.predict_many(X).tolist()))


def predict(model: TrainedModel, fv) -> float:
    fv = np.asarray(fv, dtype=float)
    if fv.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    return float(model.predict_many(fv[None, :])[0])


def evaluate(model: TrainedModel, data: Dataset) -> tuple[float, float, float]:
    """(mse, mae, r2) of the model on `data`; r2 is nan for a constant target."""
    if list(data.schema) != list(model.schema):
        raise SchemaMismatchError("dataset schema differs from model schema")
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    err = data.y - model.predict_many(data.X)
    sse = float(np.dot(err, err))
    sst = float(np.sum((data.y - data.y.mean()) ** 2))
    mse = sse / len(data)
    mae = float(np.mean(np.abs(err)))
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    return mse, mae, r2


def feature_importance(model: TrainedModel) -> dict:
    """Share of the total SSE reduction contributed by each feature."""
    if model.kind is ModelKind.LINEAR:
        raise ModelError("unsupported: feature_importance needs a tree model; use standardized_weights")
    totals = np.zeros(len(model.schema))
    for tree in model.params["trees"]:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    s = totals.sum()
    if s > 0:
        totals = totals / s
    return dict(zip(model.schema, totals.tolist()))


def standardized_weights(model: TrainedModel) -> dict:
    if model.kind is not ModelKind.LINEAR:
        raise ModelError("standardized_weights needs a linear model")
    return dict(zip(model.schema, np.asarray(model.params["weights"]).tolist()))


# -- serialisation -----------------------------------------------------------


def _params_to_json(model: TrainedModel) -> dict:
    p = model.params
    if model.kind is ModelKind.LINEAR:
        return {k: (np.asarray(p[k]).tolist() if k != "intercept" else float(p[k]))
                for k in ("intercept", "weights", "mean", "scale")}
    doc = {"trees": [t.to_dict() for t in p["trees"]]}
    if model.kind is ModelKind.GRADIENT_BOOSTED:
        doc["base_prediction"] = float(p["base_prediction"])
        doc["learning_rate"] = float(p["learning_rate"])
    return doc


def _params_from_json(kind: ModelKind, doc: dict, n_features: int) -> dict:
    if kind is ModelKind.LINEAR:
        params = {
            "intercept": float(doc["intercept"]),
            "weights": np.asarray(doc["weights"], dtype=float),
            "mean": np.asarray(doc["mean"], dtype=float),
            "scale": np.asarray(doc["scale"], dtype=float),
        }
        for k in ("weights", "mean", "scale"):
            if params[k].shape != (n_features,):
                raise ModelFormatError(f"linear parameter {k!r} has the wrong length")
        if np.any(params["scale"] == 0):
            raise ModelFormatError("linear scale contains zeros")
        return params
    trees = [RegressionTree.from_dict(t) for t in doc["trees"]]
    if not trees and kind is ModelKind.RANDOM_FOREST:
        raise ModelFormatError("forest has no trees")
    for t in trees:
        t.validate(n_features)
    params = {"trees": trees}
    if kind is ModelKind.GRADIENT_BOOSTED:
        params["base_prediction"] = float(doc["base_prediction"])
        params["learning_rate"] = float(doc["learning_rate"])
    return params


def model_to_json(model: TrainedModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind.value,
        "schema": list(model.schema),
        "config": model.config.to_dict(),
        "params": _params_to_json(model),
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {doc.get('version')!r}")
    schema = doc.get("schema")
    if schema != feature_names():
        raise SchemaMismatchError(f"{path}: model schema does not match feature_names()")
    try:
        kind = ModelKind(doc["kind"])
        params = _params_from_json(kind, doc["params"], N_FEATURES)
        config = TrainConfig.from_dict(doc["config"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelFormatError(f"{path}: corrupt model file ({exc!r})") from None
    return TrainedModel(kind=kind, schema=schema, config=config, params=params)
