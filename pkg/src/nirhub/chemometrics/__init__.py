"""Train, evaluate, and apply the per-instance classifier."""

from nirhub.chemometrics.knn import (
    DEFAULT_K,
    DEFAULT_MIN_SPECTRA_PER_CLASS,
    DISTANCES,
    Model,
    Prediction,
    TrainingSet,
    classify,
    leave_one_out,
    model_from_json,
    model_to_json,
    train,
)

__all__ = [
    "DEFAULT_K",
    "DEFAULT_MIN_SPECTRA_PER_CLASS",
    "DISTANCES",
    "Model",
    "Prediction",
    "TrainingSet",
    "classify",
    "leave_one_out",
    "model_from_json",
    "model_to_json",
    "train",
]
