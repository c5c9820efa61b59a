"""Exception taxonomy shared across the suite.

Every error raised on purpose derives from :class:`BenchmarkError` so callers
can distinguish suite-level failures from programming bugs.
"""


class BenchmarkError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ConfigurationError(BenchmarkError):
    """Invalid or inconsistent configuration values."""


class ShapeError(BenchmarkError):
    """Array shapes or channel counts do not match a declared contract."""


class AlignmentError(BenchmarkError):
    """Grids cannot be aligned (e.g. a subsampling stride does not divide)."""


class DegenerateReferenceError(BenchmarkError):
    """Relative error requested against a zero-norm reference."""


class DomainError(BenchmarkError):
    """Physical input outside the solver's admissible domain."""


class SolverError(BenchmarkError):
    """Numerical solve failed (instability, non-convergence, dry state)."""

    def __init__(self, message, suggested_dt=None, residual=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt
        self.residual = residual


class IngestionError(BenchmarkError):
    """External data file violates the documented adapter layout."""


class IntegrityError(BenchmarkError):
    """Stored data does not match its manifest checksum."""


class TrainingDivergedError(BenchmarkError):
    """Loss became non-finite during training."""

    def __init__(self, message, last_finite_epoch=None):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


class DuplicateRecordError(BenchmarkError):
    """Append rejected: a record with the same key already exists."""

    def __init__(self, message, existing=None):
        super().__init__(message)
        self.existing = existing
