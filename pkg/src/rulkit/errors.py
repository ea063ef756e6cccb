"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems exit 2,
data and parse problems exit 3, numeric/verification failures exit 1.
"""


class DataFormatError(ValueError):
    """Input file or record does not match the expected format."""


class DataIntegrityError(DataFormatError):
    """Structurally valid input that violates a dataset invariant."""


class ConfigError(ValueError):
    """Invalid configuration, layer specification, or API usage."""


class NotFittedError(RuntimeError):
    """A transform or predict call arrived before fit."""


class NumericError(ArithmeticError):
    """Non-finite values or an unsolvable numeric system."""


class ModelFileError(ValueError):
    """A persisted model could not be loaded."""


class ChecksumError(ModelFileError):
    """Weight payload does not match the checksum in the manifest."""


class VersionError(ModelFileError):
    """Persisted file uses an unknown format version."""
