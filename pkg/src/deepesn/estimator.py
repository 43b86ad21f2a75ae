"""scikit-learn style estimator facade over the functional core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .bundle import load_bundle, save_bundle
from .exceptions import DimensionError, TrainingError
from .readout import score_many, train_readout
from .reservoir import DeepEsnConfig, build_stack, run_sequence

__all__ = ["DeepEsnClassifier", "check_sequences"]


def check_sequences(X, *, n_channels: int | None = None) -> list[np.ndarray]:
    """Validate a list of variable-length sequences.

    Parameters
    ----------
    X : iterable of array_like
        Each element is one sequence with shape (n_steps, n_channels),
        time-major as is usual for sequence estimators.
    n_channels : int, optional
        Required channel count; defaults to the first sequence's.

    Returns
    -------
    list of numpy.ndarray
        Float64 channel-major arrays of shape (n_channels, n_steps), the
        orientation the reservoir core uses.
    """
    out = []
    for i, item in enumerate(X):
        a = np.asarray(item, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError(f"sequence {i} must be 2-D (n_steps, n_channels), got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionError(f"sequence {i} has no time steps")
        if n_channels is None:
            n_channels = a.shape[1]
        if a.shape[1] != n_channels:
            raise DimensionError(
                f"sequence {i} has {a.shape[1]} channels, expected {n_channels}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError(f"sequence {i} contains non-finite values")
        out.append(a.T)
    if not out:
        raise ValueError("X must contain at least one sequence")
    return out


class DeepEsnClassifier(ClassifierMixin, BaseEstimator):
    """Deep echo state network classifier for whole sequences.

    A stack of leaky-integrator tanh reservoirs (fixed, randomly
    constructed, never trained) turns each input sequence into the time
    average of its concatenated layer states; a ridge-regression readout
    on those mean states does the classification.

    Parameters
    ----------
    num_layers : int, default=10
        Stacked reservoir layers.
    units_per_layer : int, default=50
        Recurrent units per layer.
    leak_rate : float, default=0.1
        Leaking rate shared by all layers, in (0, 1].
    input_scaling : float, default=1.0
        Spectral norm given to the input weight matrix.
    inter_layer_scaling : float, default=1.0
        Spectral norm given to each layer-to-layer weight matrix.
    spectral_radius : float, default=0.9
        Spectral radius of each layer's effective transition matrix
        (1 - a) I + a W, in (0, 1].
    ridge_lambda : float, default=1e-6
        Readout regularization strength, >= 0.
    washout : int, default=0
        Leading steps excluded from each sequence's mean state.
    random_state : int, default=0
        Master seed for the reservoir construction.

    Attributes
    ----------
    classes_ : numpy.ndarray
        Distinct labels seen in ``fit``, ascending.
    stack_ : ReservoirStack
        The constructed reservoir weights.
    readout_ : Readout
        The trained linear readout.
    n_features_in_ : int
        Input channels per time step.

    Examples
    --------
    >>> import numpy as np
    >>> t = np.arange(80) / 8.0
    >>> fast = [np.stack([np.sin(3 * t + p)] * 2, axis=1) for p in (0.0, 0.4)]
    >>> slow = [np.stack([np.sin(t + p)] * 2, axis=1) for p in (0.0, 0.4)]
    >>> clf = DeepEsnClassifier(num_layers=2, units_per_layer=10, random_state=7)
    >>> clf.fit(fast + slow, [1, 1, 0, 0]).predict(slow[:1])
    array([0])
    """

    def __init__(
        self,
        num_layers: int = 10,
        units_per_layer: int = 50,
        leak_rate: float = 0.1,
        input_scaling: float = 1.0,
        inter_layer_scaling: float = 1.0,
        spectral_radius: float = 0.9,
        ridge_lambda: float = 1e-6,
        washout: int = 0,
        random_state: int = 0,
    ):
        self.num_layers = num_layers
        self.units_per_layer = units_per_layer
        self.leak_rate = leak_rate
        self.input_scaling = input_scaling
        self.inter_layer_scaling = inter_layer_scaling
        self.spectral_radius = spectral_radius
        self.ridge_lambda = ridge_lambda
        self.washout = washout
        self.random_state = random_state

    def _config(self, input_dim: int) -> DeepEsnConfig:
        return DeepEsnConfig(
            num_layers=self.num_layers,
            units_per_layer=self.units_per_layer,
            leak_rates=(self.leak_rate,) * self.num_layers,
            input_scaling=self.input_scaling,
            inter_layer_scaling=self.inter_layer_scaling,
            spectral_radius=self.spectral_radius,
            input_dim=input_dim,
            master_seed=self.random_state,
        )

    def _features(self, sequences) -> np.ndarray:
        return np.stack(
            [
                run_sequence(self.stack_, seq, washout=self.washout).mean_state
                for seq in sequences
            ]
        )

    def fit(self, X, y) -> "DeepEsnClassifier":
        """Build the reservoir, map sequences to mean states, fit the readout.

        Parameters
        ----------
        X : iterable of array_like, each (n_steps, n_channels)
        y : iterable of labels, one per sequence

        Returns
        -------
        self
        """
        sequences = check_sequences(X)
        y = list(y)
        if len(y) != len(sequences):
            raise TrainingError(f"got {len(sequences)} sequences but {len(y)} labels")
        classes = sorted(set(y))
        if len(classes) < 2:
            raise TrainingError("fit needs at least two classes")
        self.n_features_in_ = sequences[0].shape[0]
        self.stack_ = build_stack(self._config(self.n_features_in_))
        features = self._features(sequences)
        self.readout_ = train_readout(features, y, self.ridge_lambda, class_order=classes)
        self.classes_ = np.asarray(classes)
        return self

    def _check_fitted(self):
        if not hasattr(self, "readout_"):
            raise TrainingError("this classifier is not fitted yet; call fit first")

    def transform(self, X) -> np.ndarray:
        """Mean-state feature matrix, shape (n_sequences, state_dim)."""
        self._check_fitted()
        return self._features(check_sequences(X, n_channels=self.n_features_in_))

    def decision_function(self, X) -> np.ndarray:
        """Raw readout scores, shape (n_sequences, n_classes).

        For two classes, the 1-D margin ``score[:, 1] - score[:, 0]`` as
        scikit-learn convention expects.
        """
        self._check_fitted()
        scores = score_many(self.readout_, self.transform(X))
        if scores.shape[1] == 2:
            return scores[:, 1] - scores[:, 0]
        return scores

    def predict_scores(self, X) -> np.ndarray:
        """Per-class raw scores, shape (n_sequences, n_classes)."""
        self._check_fitted()
        return score_many(self.readout_, self.transform(X))

    def predict(self, X) -> np.ndarray:
        """Predicted labels; score ties resolve to the lower class index."""
        scores = self.predict_scores(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def save(self, path) -> None:
        """Persist reservoir and readout as a model bundle."""
        self._check_fitted()
        save_bundle(path, self.stack_, self.readout_)

    @classmethod
    def from_bundle(cls, path) -> "DeepEsnClassifier":
        """Rebuild a fitted classifier from a model bundle."""
        stack, readout = load_bundle(path)
        if readout is None:
            raise TrainingError(f"{path}: bundle has no readout; cannot make a classifier")
        cfg = stack.config
        est = cls(
            num_layers=cfg.num_layers,
            units_per_layer=cfg.units_per_layer,
            leak_rate=cfg.leak_rates[0],
            input_scaling=cfg.input_scaling,
            inter_layer_scaling=cfg.inter_layer_scaling,
            spectral_radius=cfg.spectral_radius,
            random_state=cfg.master_seed,
        )
        est.stack_ = stack
        est.readout_ = readout
        est.classes_ = np.asarray(list(readout.class_labels))
        est.n_features_in_ = cfg.input_dim
        return est
