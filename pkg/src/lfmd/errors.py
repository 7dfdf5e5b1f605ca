"""Exception hierarchy shared by every stage of the pipeline."""


class LFMDError(Exception):
    """Base class for all package errors."""


class ParameterError(LFMDError, ValueError):
    """An argument is outside the domain an operation accepts."""


class FormatError(LFMDError, ValueError):
    """A file does not follow the layout its reader expects."""


class ConsistencyError(LFMDError, ValueError):
    """Two inputs that must agree (e.g. image and label counts) do not."""


class InputError(LFMDError, ValueError):
    """Input data is missing or unusable."""


class ConfigError(LFMDError, ValueError):
    """An experiment configuration is invalid."""


class NumericError(LFMDError, ArithmeticError):
    """A numerical routine produced non-finite values or failed to converge."""
