"""Exception types shared across the package.

Each class maps to a distinct CLI exit code (see cli.py), so callers can
tell schema problems from guard violations from model-validation failures.
"""


class SchemaError(ValueError):
    """A configuration file violates the documented schema."""


class NetworkValidationError(ValueError):
    """A network description violates a structural model assumption."""


class GuardError(RuntimeError):
    """An exhaustive computation would exceed its hard size guard."""


class InfeasibleToleranceError(ValueError):
    """Integer lattice scaling cannot reach the requested power window."""

    def __init__(self, message, nearest_achievable=None):
        super().__init__(message)
        self.nearest_achievable = nearest_achievable


class ChainMismatchError(ValueError):
    """A lattice chain does not match the network MAC it is assigned to."""
