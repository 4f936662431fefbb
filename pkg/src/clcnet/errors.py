"""Exception hierarchy shared by the library and the command line."""


class ClcError(Exception):
    """Base class for all errors raised by clcnet."""

    exit_code = 1


class ConfigError(ClcError, ValueError):
    exit_code = 1


class DataError(ClcError, ValueError):
    exit_code = 2


class EmptySignalError(DataError):
    """Input too short to produce a single analysis frame."""


class GeometryError(DataError):
    """Spectrogram/coefficient shapes do not match the configured bank."""


class SampleRateError(DataError):
    pass


class NumericError(ClcError, ArithmeticError):
    exit_code = 3


class DegenerateSignalError(NumericError):
    pass


class IllConditionedError(NumericError):
    def __init__(self, message, lag=None):
        super().__init__(message)
        self.lag = lag
