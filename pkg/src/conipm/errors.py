"""Exception types shared across the package."""


class ConipmError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(ConipmError):
    """A vector or matrix has a shape incompatible with its context."""


class OracleMisuse(ConipmError):
    """A derivative oracle was evaluated at an infeasible point."""


class NumericalFailure(ConipmError):
    """A factorization or solve broke down numerically."""


class ParseError(ConipmError):
    """A model file could not be parsed."""
