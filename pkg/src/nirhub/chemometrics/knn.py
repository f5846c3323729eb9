"""k-nearest-neighbor classifier over preprocessed feature vectors.

Deterministic by construction: neighbor selection orders examples by
(distance, label) so results never depend on insertion order, and vote ties
break by smallest mean distance to the query, then lexicographic class name.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from numpy.typing import ArrayLike, NDArray

from nirhub.errors import (
    ConfigError,
    DimensionError,
    InsufficientDataError,
)
from nirhub.spectra.formats import format_timestamp, parse_timestamp
from nirhub.spectra.spectrum import PipelineConfig

DEFAULT_MIN_SPECTRA_PER_CLASS = 12
DEFAULT_K = 5
DISTANCES = ("euclidean", "cosine")


@dataclass
class TrainingSet:
    """Labeled feature vectors plus the pipeline that produced them."""

    vectors: NDArray[np.float64]  # (n_examples, grid_points)
    labels: list[str]
    pipeline: PipelineConfig
    min_spectra_per_class: int = DEFAULT_MIN_SPECTRA_PER_CLASS

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.labels = [str(lbl) for lbl in self.labels]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))

    def class_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(self.labels).items()))

    def check(self) -> None:
        """Raise unless the set is trainable."""
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.labels):
            raise DimensionError(
                f"expected one {self.pipeline.grid_points}-point vector per label, "
                f"got array of shape {self.vectors.shape} for {len(self.labels)} labels"
            )
        if self.vectors.shape[1] != self.pipeline.grid_points:
            raise DimensionError(
                f"vectors have {self.vectors.shape[1]} features but the pipeline "
                f"grid has {self.pipeline.grid_points} points"
            )
        counts = self.class_counts()
        deficits = {
            cls: n for cls, n in counts.items() if n < self.min_spectra_per_class
        }
        if len(counts) < 2:
            raise InsufficientDataError(
                f"training needs at least 2 classes, got {len(counts)}",
                details={"deficits": deficits, "classes": len(counts)},
            )
        if deficits:
            short = ", ".join(
                f"{cls} has {n}/{self.min_spectra_per_class}"
                for cls, n in deficits.items()
            )
            raise InsufficientDataError(
                f"classes below the {self.min_spectra_per_class}-spectra threshold: {short}",
                details={"deficits": deficits},
            )


@dataclass
class Prediction:
    label: str
    confidence: float  # winning votes / k
    neighbor_labels: list[str]  # the k nearest labels, closest first

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "confidence": self.confidence,
            "neighbor_labels": list(self.neighbor_labels),
        }


@dataclass
class Model:
    """Immutable trained classifier; retraining produces a new value."""

    version: int
    k: int
    distance: str
    training_set: TrainingSet
    evaluation: float  # leave-one-out accuracy
    trained_at: datetime
    algorithm: str = "knn"


def _distances(
    vectors: NDArray[np.float64], query: NDArray[np.float64], distance: str
) -> NDArray[np.float64]:
    if distance == "euclidean":
        return np.linalg.norm(vectors - query, axis=1)
    if distance == "cosine":
        norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(query)
        dots = vectors @ query
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(norms > 0, dots / norms, 0.0)
        return 1.0 - sims
    raise ConfigError(f"unknown distance {distance!r}; expected one of {DISTANCES}")


def _vote(
    dists: NDArray[np.float64], labels: list[str], k: int
) -> Prediction:
    order = np.lexsort((np.asarray(labels, dtype=object), dists))[:k]
    nearest = [labels[i] for i in order]
    nearest_d = dists[order]
    counts = Counter(nearest)
    top = max(counts.values())
    tied = [cls for cls, n in counts.items() if n == top]
    if len(tied) > 1:
        mean_d = {
            cls: float(np.mean([d for lbl, d in zip(nearest, nearest_d) if lbl == cls]))
            for cls in tied
        }
        winner = min(tied, key=lambda cls: (mean_d[cls], cls))
    else:
        winner = tied[0]
    return Prediction(label=winner, confidence=top / k, neighbor_labels=nearest)


def _check_k(k: int, n_examples: int) -> None:
    if not isinstance(k, int) or k < 1 or k % 2 == 0:
        raise ConfigError(f"k must be a positive odd integer, got {k}")
    if k > n_examples - 1:
        raise ConfigError(
            f"k must be <= N-1 so every held-out example has k neighbors; "
            f"got k={k} with N={n_examples}"
        )


def leave_one_out(
    training_set: TrainingSet, k: int = DEFAULT_K, distance: str = "euclidean"
) -> float:
    """Fraction of examples classified correctly when each is held out."""
    training_set.check()
    _check_k(k, len(training_set))
    if distance not in DISTANCES:
        raise ConfigError(f"unknown distance {distance!r}; expected one of {DISTANCES}")
    vectors, labels = training_set.vectors, training_set.labels
    hits = 0
    for i in range(len(labels)):
        rest = np.delete(vectors, i, axis=0)
        rest_labels = labels[:i] + labels[i + 1 :]
        dists = _distances(rest, vectors[i], distance)
        if _vote(dists, rest_labels, k).label == labels[i]:
            hits += 1
    return hits / len(labels)


def train(
    training_set: TrainingSet,
    k: int = DEFAULT_K,
    distance: str = "euclidean",
    version: int = 1,
    trained_at: datetime | None = None,
) -> Model:
    """Validate the set, store it, and evaluate by leave-one-out."""
    accuracy = leave_one_out(training_set, k=k, distance=distance)
    return Model(
        version=version,
        k=k,
        distance=distance,
        training_set=training_set,
        evaluation=accuracy,
        trained_at=trained_at or datetime.now(timezone.utc),
    )


def classify(model: Model, features: ArrayLike) -> Prediction:
    """Majority label of the k nearest stored examples."""
    query = np.asarray(features, dtype=float)
    expected = model.training_set.vectors.shape[1]
    if query.ndim != 1 or query.shape[0] != expected:
        raise DimensionError(
            f"feature vector has length {query.size}, model expects {expected}"
        )
    dists = _distances(model.training_set.vectors, query, model.distance)
    return _vote(dists, model.training_set.labels, model.k)


def model_to_json(model: Model) -> dict:
    ts = model.training_set
    return {
        "version": model.version,
        "algorithm": model.algorithm,
        "k": model.k,
        "distance": model.distance,
        "evaluation": model.evaluation,
        "trained_at": format_timestamp(model.trained_at),
        "training_set": {
            "vectors": [[float(x) for x in row] for row in ts.vectors],
            "labels": list(ts.labels),
            "pipeline": ts.pipeline.to_json(),
            "min_spectra_per_class": ts.min_spectra_per_class,
        },
    }


def model_from_json(obj: dict) -> Model:
    ts = obj["training_set"]
    return Model(
        version=int(obj["version"]),
        algorithm=obj.get("algorithm", "knn"),
        k=int(obj["k"]),
        distance=obj["distance"],
        evaluation=float(obj["evaluation"]),
        trained_at=parse_timestamp(obj["trained_at"]),
        training_set=TrainingSet(
            vectors=np.asarray(ts["vectors"], dtype=float),
            labels=list(ts["labels"]),
            pipeline=PipelineConfig.from_json(ts["pipeline"]),
            min_spectra_per_class=int(ts["min_spectra_per_class"]),
        ),
    )
