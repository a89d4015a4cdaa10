"""Exception types shared across the pipeline.

All data-level failures derive from GeoSocialError so the CLI can map them
to a single exit code; anything else escaping a stage is an internal error.
"""


class GeoSocialError(Exception):
    """Base class for all expected pipeline failures."""


class ConfigError(GeoSocialError):
    """Invalid configuration; the message lists every violation found."""


class OutOfBoundsError(GeoSocialError):
    """A coordinate fell outside the configured bounding box."""


class EmptyNetworkError(GeoSocialError):
    """An operation requires a non-empty network with positive weight."""


class ContractViolation(GeoSocialError):
    """Inputs broke a documented precondition (e.g. unassigned node)."""


class DegenerateMarginalsError(GeoSocialError):
    """Flow-matrix marginals make the null model undefined."""


class UndefinedSimilarityError(GeoSocialError):
    """Cosine similarity was requested for a zero vector."""


class PrerequisiteError(GeoSocialError):
    """A pipeline stage ran before the stage that feeds it."""
