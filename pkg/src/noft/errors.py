"""Exception hierarchy shared across the package.

Everything raised on purpose derives from NoftError, so callers can catch
one base class. File-format problems get their own branch (FormatError)
with one subclass per malformed-file kind.
"""


class NoftError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NoftError):
    """Dimension or length mismatch between operands."""


class DomainError(NoftError):
    """Value outside the mathematical domain of an operation."""


class ParameterError(NoftError):
    """Invalid hyperparameter (non-positive epsilon, zero iterations, ...)."""


class DegenerateInputError(NoftError):
    """Input carries no usable signal (zero norm, single value, ...)."""


class DegenerateVarianceError(DegenerateInputError):
    """Standardization of a constant tensor."""


class InstabilityError(NoftError):
    """Numeric overflow or underflow that invalidates a solve."""


class ConfigError(NoftError):
    """Bad or contradictory run configuration."""


class FormatError(NoftError):
    """Base class for malformed persisted files."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    """File carries an unsupported format version."""


class ChecksumError(FormatError):
    """Stored CRC32 does not match the payload."""


class TruncatedFileError(FormatError):
    """File ends before the declared content does."""
