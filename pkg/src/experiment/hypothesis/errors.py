class HypothesisTestingError(ValueError):
    """Base class for every error raised by the hypothesis package."""


class ModelStructureError(HypothesisTestingError):
    """The kernel tensor or the model file is malformed."""


class ModelValidationError(HypothesisTestingError):
    """The model was rejected while loading strictly (rows too far from normalized)."""


class PreconditionError(HypothesisTestingError):
    """An operation was called outside the region where it is defined."""


class GridSizeError(HypothesisTestingError):
    """The requested lattice or action family is too large."""
