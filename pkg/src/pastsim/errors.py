"""Exception hierarchy shared by all pastsim modules."""


class PastsimError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(PastsimError, ValueError):
    """A numeric or structural argument violates its precondition."""


class InvalidRegionError(PastsimError, ValueError):
    """A wetted region does not fit inside the grid interior."""


class NumericFailureError(PastsimError):
    """A numerical routine failed to converge or factorize.

    Carries the residual (or jitter level) that was reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoLeadingRowError(PastsimError):
    """The belt holds no row with deposited pastilles to measure."""


class ShapeError(PastsimError, ValueError):
    """An array's shape is incompatible with the layer or model."""


class FormatError(PastsimError):
    """A dataset or checkpoint file is malformed.

    ``offset`` is the byte offset of the problem; ``record`` the record
    index when the failure is inside the record stream.
    """

    def __init__(self, message, offset=None, record=None):
        super().__init__(message)
        self.offset = offset
        self.record = record


class TrainingFailureError(PastsimError):
    """Training diverged (non-finite loss). Carries the epoch index."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class UndefinedMetricError(PastsimError, ValueError):
    """Requested metric is undefined for the given data (e.g. zero-variance R^2)."""


class ObjectiveEvaluationError(PastsimError):
    """A closed-loop objective evaluation could not produce a finite value."""


class TuningFailureError(PastsimError):
    """Every objective evaluation in a tuning run failed."""


class ConfigError(PastsimError, ValueError):
    """A run-configuration file is invalid.

    ``line`` is the 1-based line number, ``key`` the offending key, when known.
    """

    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key
