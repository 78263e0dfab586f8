"""
Error types
-----------
Typed exceptions raised by library code. Commands map them to exit codes:
 - ConfigError     -> 1 (usage)
 - DataError       -> 2 (data, I/O, checkpoint)
 - NumericalError  -> 3 (NaN loss, failed gradient check)
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class TransmatError(Exception):
    """Base class for all errors raised by transmat."""

    exit_code = EXIT_USAGE


class ConfigError(TransmatError, ValueError):
    """Invalid configuration file, flag combination or unknown key."""

    exit_code = EXIT_USAGE


class DataError(TransmatError):
    """Anything wrong with the data a command was given."""

    exit_code = EXIT_DATA


class InvalidTrimapError(DataError, ValueError):
    """A trimap plane holds a value outside {0, 128, 255}."""

    def __init__(self, value: int, location: tuple):
        self.value = value
        self.location = location
        super().__init__(f"Invalid trimap value {value} at (row, col) = {location}; allowed values are 0, 128, 255.")


class ShapeMismatchError(DataError, ValueError):
    """Planes or tensors that must share a shape do not."""


class NoUnknownRegionError(DataError, ValueError):
    """A trimap has no UNK pixel where at least one is required."""


class EmptyRegionError(DataError, ValueError):
    """A loss or metric was asked to reduce over an empty region."""


class DatasetError(DataError):
    """Dataset directory layout or contents are unusable."""


class CheckpointError(DataError):
    """Checkpoint file is malformed or incompatible with the config."""


class NumericalError(TransmatError):
    """Non-finite loss or a failed gradient check."""

    exit_code = EXIT_NUMERICAL
