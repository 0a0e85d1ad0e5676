"""Exception hierarchy; each class maps to a CLI exit code."""


class CdoaError(Exception):
    exit_code = 1


class ValidationError(CdoaError, ValueError):
    """Invalid configuration or arguments."""

    exit_code = 2


class DataMismatchError(CdoaError):
    """Inputs that do not belong together (hash, M or shape mismatch)."""

    exit_code = 3


class CorruptFileError(DataMismatchError):
    """Bad magic, truncated payload or checksum failure."""


class NumericError(CdoaError, ArithmeticError):
    """Non-finite values or degenerate numerics."""

    exit_code = 4
