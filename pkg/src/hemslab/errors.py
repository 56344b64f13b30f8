"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError (and subclasses) -> 2,
CompatibilityError -> 3, InfeasibleError -> 4.
"""


class HemslabError(Exception):
    """Base class for package errors."""


class DataError(HemslabError):
    """Invalid input data or configuration."""


class ParseError(DataError):
    """A file or field could not be parsed."""


class AlignmentError(DataError):
    """Timestamps do not line up with the expected grid."""


class SchemaError(DataError):
    """A file violates its column schema or references unknown ids."""


class ConflictError(DataError):
    """Overlapping appliance events."""


class ConfigError(DataError):
    """Scenario configuration is missing or inconsistent."""


class CompatibilityError(HemslabError):
    """Checkpoint does not match the requested setup."""


class CheckpointFormatError(CompatibilityError):
    """Checkpoint bytes are corrupt or truncated."""


class UnsupportedVersionError(CompatibilityError):
    """Checkpoint format version is not supported."""


class InfeasibleError(HemslabError):
    """The oracle found no feasible schedule."""


class NumericalError(HemslabError):
    """Training produced non-finite numbers."""


class StateError(HemslabError):
    """An operation was called in an invalid state (e.g. step after terminal)."""
