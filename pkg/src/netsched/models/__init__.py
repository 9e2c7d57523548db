from .base import (
    Dataset,
    ModelError,
    ModelFormatError,
    ModelKind,
    SchemaMismatchError,
    TrainConfig,
    TrainedModel,
    evaluate,
    feature_importance,
    load_model,
    model_to_json,
    predict,
    save_model,
    standardized_weights,
)
from .training import (
    TRAINERS,
    linear_coefficients,
    train_gbdt,
    train_linear,
    train_random_forest,
    tree_rng,
)
from .tree import RegressionTree, best_split, fit_tree

__all__ = [
    "Dataset",
    "ModelError",
    "ModelFormatError",
    "ModelKind",
    "RegressionTree",
    "SchemaMismatchError",
    "TRAINERS",
    "TrainConfig",
    "TrainedModel",
    "best_split",
    "evaluate",
    "feature_importance",
    "fit_tree",
    "linear_coefficients",
    "load_model",
    "model_to_json",
    "predict",
    "save_model",
    "standardized_weights",
    "train_gbdt",
    "train_linear",
    "train_random_forest",
    "tree_rng",
]
