"""Exception types shared across the package."""


class LossyKernelError(Exception):
    """Base class for all package errors."""


class CapExceeded(LossyKernelError):
    """An input is larger than a configured size limit."""


class ParseError(LossyKernelError, ValueError):
    """Malformed graph, family or decomposition text."""


class InvalidInput(LossyKernelError, ValueError):
    """A precondition on the arguments does not hold."""


class InvariantViolation(LossyKernelError, AssertionError):
    """An internal guarantee failed; always a bug, never recovered from."""


class OracleCapacityError(LossyKernelError):
    """An oracle was called on an instance larger than its capacity."""


class ConfigError(LossyKernelError, ValueError):
    """A user supplied parameter is inconsistent with the input, e.g. eta too small."""


class LiftError(LossyKernelError):
    """A solution handed to a lifting step violates that step's contract."""
