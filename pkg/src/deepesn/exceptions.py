"""Exception types shared across the package."""


class DeepEsnError(Exception):
    """Base class for package-specific errors."""


class DimensionError(DeepEsnError, ValueError):
    """An array argument has the wrong shape for the operation."""


class ConvergenceError(DeepEsnError, RuntimeError):
    """An iterative kernel exhausted its iteration cap.

    Carries the best estimate reached so far in ``best_estimate``
    (``None`` when the underlying solver produced nothing usable).
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class ConstructionError(DeepEsnError, RuntimeError):
    """Reservoir construction failed (degenerate random draw)."""


class ParseError(DeepEsnError, ValueError):
    """A data file line could not be parsed.

    ``line_number`` is 1-based; ``text`` is the offending line.
    """

    def __init__(self, message, line_number=None, text=None):
        super().__init__(message)
        self.line_number = line_number
        self.text = text


class DatasetError(DeepEsnError, ValueError):
    """A dataset violates a structural requirement."""


class TrainingError(DeepEsnError, ValueError):
    """Readout training received an unusable training set."""


class StratificationError(DeepEsnError, ValueError):
    """A stratified fold plan cannot be built from the given dataset."""


class UndefinedMetricError(DeepEsnError, ValueError):
    """A requested statistic is undefined on the given inputs."""


class AuditError(DeepEsnError, RuntimeError):
    """The model-selection purity audit found subject-id leakage."""
