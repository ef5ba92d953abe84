"""Shared exception types."""


class DataError(ValueError):
    """Malformed or incomplete input data (ragged days, price gaps, bad rows)."""


class InputError(ValueError):
    """Invalid argument to an operation (non-finite price, zero capacity)."""


class InfeasibleActionError(RuntimeError):
    """A strict-mode SoC update left the allowed state-of-charge band."""
