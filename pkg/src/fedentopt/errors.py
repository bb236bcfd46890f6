"""Exception types raised across the package."""


class FedEntOptError(Exception):
    """Base class for all package errors."""


class ZeroMassError(FedEntOptError, ValueError):
    """A count vector with zero total mass cannot be normalized."""


class DimensionError(FedEntOptError, ValueError):
    pass


class DomainError(FedEntOptError, ValueError):
    """An argument lies outside its admissible domain."""


class InfeasibleError(FedEntOptError, ValueError):
    """The requested allocation or selection cannot be satisfied."""


class EmptyClassError(FedEntOptError, ValueError):
    pass


class NumericalError(FedEntOptError, ArithmeticError):
    pass


class FormatError(FedEntOptError, ValueError):
    """Input file does not follow the expected binary or text layout."""
