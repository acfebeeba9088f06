"""Exception hierarchy.

The CLI maps ``DataError`` to exit code 2 and ``NumericError`` to exit code 3.
"""


class WaferGPTError(Exception):
    """Base class for every error raised by this package."""


class DataError(WaferGPTError, ValueError):
    """Bad or inconsistent input data."""


class MalformedInput(DataError):
    def __init__(self, row, reason=""):
        self.row = row
        msg = f"malformed input at row {row}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class EmptyFile(DataError):
    pass


class DegenerateRange(DataError):
    """Training data min equals max, so min-max normalization is undefined."""


class InvalidResolution(DataError):
    pass


class InvalidProfile(DataError):
    pass


class SpecOutOfBounds(DataError):
    pass


class MissingManifest(DataError):
    pass


class SingleClass(DataError):
    """ROC / metrics need both normal and abnormal sequences."""


class ShapeMismatch(DataError):
    pass


class TargetOutOfRange(DataError):
    pass


class CheckpointError(DataError):
    pass


class ConfigError(WaferGPTError, ValueError):
    def __init__(self, field, reason):
        self.field = field
        super().__init__(f"{field}: {reason}")


class NumericError(WaferGPTError, ArithmeticError):
    pass


class NonFiniteGradient(NumericError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, epoch, sequence, value):
        self.epoch = epoch
        self.sequence = sequence
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, sequence {sequence}")


class DegenerateSpread(UserWarning):
    """Training totals have zero spread; the three-sigma threshold collapses to the mean."""
