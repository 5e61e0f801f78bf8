"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input/format/config problems exit 1,
numeric failures exit 2.
"""


class PageSumError(Exception):
    """Base class for every error raised by pagesum."""


class InputError(PageSumError, ValueError):
    """Caller supplied an argument outside an operation's domain."""


class NumericError(PageSumError, ArithmeticError):
    """A computation produced or received a non-finite value."""


class DegenerateMaskError(NumericError):
    """An attention row had every key masked out."""


class NonFiniteLossError(NumericError):
    def __init__(self, message, batch_id=None):
        super().__init__(message)
        self.batch_id = batch_id


class FormatError(PageSumError):
    """A file on disk does not follow the expected layout."""


class ConfigError(PageSumError):
    """A checkpoint or config is inconsistent with the requested model."""
