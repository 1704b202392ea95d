"""Exception hierarchy shared by every module."""


class SymlikError(Exception):
    """Base class for package errors."""


class InvalidParameterError(SymlikError, ValueError):
    """A family parameter vector violates the family invariants."""


class DomainError(SymlikError, ValueError):
    """An evaluation point lies outside the support of the family."""


class OrderingError(SymlikError, ValueError):
    """Rectangle bounds are not ordered componentwise."""


class SymbolError(SymlikError, ValueError):
    """A symbol cannot be built or is internally inconsistent."""


class TieError(SymbolError):
    """A marginal extreme is attained by more than one row."""


class ZeroLikelihoodError(SymlikError, RuntimeError):
    """The starting parameters give an observed symbol zero probability."""
