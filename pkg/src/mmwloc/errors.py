"""Exception and warning types shared across the toolkit."""


class MmwlocError(Exception):
    """Base class for all toolkit errors."""


class EmptyChannel(MmwlocError):
    """Raised when a traced scene contains no propagation path at all."""


class DelayOverflow(MmwlocError):
    """Raised when a path delay falls outside the tap window."""


class ConfigError(MmwlocError):
    """Raised for invalid or inconsistent configuration values."""


class SingularCombiner(MmwlocError):
    """Raised when a combiner Gram matrix is not positive definite."""


class ShapeMismatch(MmwlocError):
    """Raised when observation blocks disagree with the configured layout."""


class SizeCap(MmwlocError):
    """Raised when the vectorized reference solver would exceed its memory cap."""


class DegenerateGeometry(MmwlocError):
    """Raised when all reflections are collinear with the direct path."""


class SingularSystem(MmwlocError):
    """Raised when the reflection-only position system is rank deficient."""


class NoValidCombination(MmwlocError):
    """Raised when every candidate path combination was filtered out."""


class SchemaError(MmwlocError):
    """Raised for malformed rows in a JSONL artifact."""


class StageError(MmwlocError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


class ConvergenceWarning(UserWarning):
    """Emitted when a greedy pursuit residual fails to decrease."""
