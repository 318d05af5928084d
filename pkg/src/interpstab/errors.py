"""Exception types raised by the library."""


class InterpError(Exception):
    """Base class for all library errors."""


class DomainError(InterpError, ValueError):
    """An argument lies outside the domain of an operation."""


class InvalidParameterError(InterpError, ValueError):
    """A parameter function failed verification."""


class ConstructionError(InterpError, RuntimeError):
    """A discretizing sequence could not be constructed."""


class CapacityError(InterpError, ValueError):
    """The brute-force oracle was asked for more than it can handle."""


class WindowError(InterpError, ValueError):
    """The working window is too small for the requested computation."""


class ContractError(InterpError, TypeError):
    """A K-engine was paired with an element of the wrong couple."""
