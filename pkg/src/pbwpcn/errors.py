"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach the requested tolerance."""


class ProtocolError(RuntimeError):
    """A message-passing rule was violated (e.g. direct AP-to-AP delivery)."""
