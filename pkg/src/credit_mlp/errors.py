"""Exception hierarchy; each family maps to one CLI exit code."""


class CreditMLPError(Exception):
    exit_code = 1


class ConfigError(CreditMLPError, ValueError):
    """Bad usage, configuration, or argument values."""

    exit_code = 1


class DataError(CreditMLPError, ValueError):
    """Input data that cannot be parsed or joined."""

    exit_code = 2


class NumericError(CreditMLPError, ArithmeticError):
    """Non-finite values during training or evaluation."""

    exit_code = 3
