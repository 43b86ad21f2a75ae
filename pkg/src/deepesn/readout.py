"""Linear readout trained by ridge regression on mean-state features.

Targets are one-hot per class in ascending class order (for the tablet
task: Control -> (1, 0), PD -> (0, 1)). A constant bias feature is appended
to every design vector, so the weight matrix carries a trailing bias
column. Classification takes the argmax of the score vector; ties resolve
to the lower class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, TrainingError
from .numerics import ridge_solve

__all__ = ["Readout", "train_readout", "classify", "score", "score_many", "classify_many"]


@dataclass(frozen=True)
class Readout:
    """Trained readout: ``weights`` is (n_classes, n_features + 1)."""

    weights: np.ndarray
    class_labels: tuple

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - 1


def train_readout(features, labels, lam: float, class_order=None) -> Readout:
    """Fit readout weights on whole-sequence feature vectors.

    Parameters
    ----------
    features : sequence of 1-D arrays or array of shape (n_samples, n_features)
        One mean-state vector per training sequence.
    labels : sequence
        One label per sample; at least two distinct labels required.
    lam : float
        Ridge regularization, >= 0.
    class_order : sequence, optional
        Explicit class ordering. Defaults to ascending sort of the distinct
        labels; index in this order defines the one-hot target row.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"features must be 2-D (n_samples, n_features), got shape {x.shape}")
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise TrainingError(f"got {x.shape[0]} feature rows but {len(labels)} labels")
    distinct = set(labels)
    if len(distinct) < 2:
        raise TrainingError("training set must contain at least two classes")
    if class_order is None:
        class_order = sorted(distinct)
    else:
        class_order = list(class_order)
        if distinct - set(class_order):
            raise TrainingError(f"labels outside class_order: {sorted(distinct - set(class_order))!r}")
    index = {label: i for i, label in enumerate(class_order)}

    design = np.vstack([x.T, np.ones((1, x.shape[0]))])  # bias row appended last
    targets = np.zeros((len(class_order), x.shape[0]))
    for col, label in enumerate(labels):
        targets[index[label], col] = 1.0
    weights = ridge_solve(design, targets, lam)
    return Readout(weights=weights, class_labels=tuple(class_order))


def score(readout: Readout, feature_vector) -> np.ndarray:
    """Raw score vector for one feature vector, one entry per class."""
    chi = np.asarray(feature_vector, dtype=np.float64)
    if chi.shape != (readout.n_features,):
        raise DimensionError(
            f"feature vector must have shape ({readout.n_features},), got {chi.shape}"
        )
    return readout.weights[:, :-1] @ chi + readout.weights[:, -1]


def score_many(readout: Readout, features) -> np.ndarray:
    """Score a batch: (n_samples, n_features) -> (n_samples, n_classes)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != readout.n_features:
        raise DimensionError(
            f"features must have shape (n_samples, {readout.n_features}), got {x.shape}"
        )
    return x @ readout.weights[:, :-1].T + readout.weights[:, -1]


def classify(readout: Readout, feature_vector):
    """Predicted label and score vector; ties go to the lower class index."""
    scores = score(readout, feature_vector)
    return readout.class_labels[int(np.argmax(scores))], scores


def classify_many(readout: Readout, features) -> list:
    """Predicted labels for a feature batch."""
    scores = score_many(readout, features)
    return [readout.class_labels[i] for i in np.argmax(scores, axis=1)]
