"""Exception types shared across the package."""


class DpbnError(Exception):
    """Base class for all library errors."""


class OutOfRangeError(DpbnError, ValueError):
    """A value lies outside the open range an inverse is defined on."""


class NoConvergenceError(DpbnError, RuntimeError):
    """An iterative inversion failed to bracket or converge."""


class RankDeficientError(DpbnError, RuntimeError):
    """A weight matrix is (numerically) column rank deficient."""


class ShapeMismatchError(DpbnError, ValueError):
    """Array shapes disagree with the declared layer dimensions."""


class DataError(DpbnError):
    """Base class for corpus ingestion and preprocessing errors."""


class BadMagicError(DataError):
    """A binary file does not start with the expected magic number."""


class TruncatedFileError(DataError):
    """A binary file ends before its header-declared payload does."""


class DimMismatchError(DataError):
    """Declared dimensions are inconsistent (e.g. labels vs images count)."""


class InsufficientSamplesError(DataError):
    """A class subset request asks for more samples than are available."""


class DomainError(DataError):
    """Pixel values fall outside the domain a transform requires."""


class StageError(DataError):
    """A preprocessing step was applied out of order."""


class BadModelFileError(DpbnError):
    """A model file has a bad magic, version, layout, or checksum."""


class ConfigError(DpbnError):
    """A run configuration failed schema validation."""
