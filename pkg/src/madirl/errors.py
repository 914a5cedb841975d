"""Exception types shared across the package."""


class MadirlError(Exception):
    """Base class for all package errors."""


class ShapeError(MadirlError):
    """Operand shapes do not conform to an operation's signature."""


class NumericError(MadirlError):
    """An operation produced NaN or Inf values."""


class ConfigError(MadirlError):
    """A hyperparameter or configuration value is out of range."""


class UsageError(MadirlError):
    """An API was called in an invalid order or state."""


class FormatError(MadirlError):
    """A serialized artifact is corrupt, truncated, or mismatched."""


class DegenerateBaselineError(MadirlError):
    """Expert and random baseline scores coincide; score normalization is undefined."""
