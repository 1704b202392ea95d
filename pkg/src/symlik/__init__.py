"""Exact likelihood inference from interval, rectangle and histogram summaries."""

from .distributions import (
    BivariateNormal,
    DataMatrix,
    LogNormal1D,
    Normal1D,
    SkewNormal1D,
    Uniform1D,
    get_family,
)
from .errors import (
    DomainError,
    InvalidParameterError,
    OrderingError,
    SymbolError,
    SymlikError,
    TieError,
    ZeroLikelihoodError,
)

__version__ = "0.1.0"
