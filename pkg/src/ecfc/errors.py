"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps each family to an exit code: configuration problems exit 2,
bad data exits 3 and checkpoint or file problems exit 4.
"""


class EcfcError(Exception):
    """Base class for all package errors."""


class ContractError(EcfcError, ValueError):
    """A caller violated a documented precondition."""


class ConfigError(EcfcError, ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(EcfcError, ValueError):
    """Input data is malformed or fails validation."""


class ParseError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ArityError(ParseError):
    pass


class GapError(DataError):
    def __init__(self, message, timestamp=None):
        self.timestamp = timestamp
        super().__init__(message)


class ValidationError(DataError):
    pass


class BoundsError(EcfcError, IndexError):
    """A requested index range is not covered by the series."""


class UndefinedMetricError(EcfcError, ValueError):
    """Every pair was excluded so the metric has no value."""


class CheckpointError(EcfcError, IOError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass
