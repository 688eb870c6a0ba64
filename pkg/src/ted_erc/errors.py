class TedError(Exception):
    """Base class for errors raised by ted_erc."""


class DataError(TedError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(TedError, ValueError):
    """Invalid configuration key or value."""


class NumericError(TedError, ArithmeticError):
    """Non-finite loss or failed numerical check."""
