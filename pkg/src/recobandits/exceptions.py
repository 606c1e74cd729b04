"""Error types shared across the library."""


class RecobanditsError(Exception):
    """Base class for all library-specific errors."""


class FactorizationFailure(RecobanditsError):
    """Cholesky factorization failed even at the maximum jitter level."""


class NoiseZero(RecobanditsError):
    """The operation requires strictly positive observation noise."""


class TreeTooLarge(RecobanditsError):
    """The exhaustive lookahead tree exceeds the enumeration guard."""


class DepthExceedsArms(RecobanditsError):
    """Single-play lookahead needs at least as many arms as steps."""


class InvalidLambda(RecobanditsError):
    """Branching concentration parameter outside the valid range (1/K, 1]."""


class IoFailure(RecobanditsError):
    """Output files could not be written."""


class ConfigError(RecobanditsError):
    """A configuration value is missing, malformed, or inconsistent."""
