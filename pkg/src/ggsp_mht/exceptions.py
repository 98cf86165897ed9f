"""Exception types raised across the package."""


class GGSPError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GGSPError, ValueError):
    pass


class InvalidBandwidthError(InvalidInputError):
    pass


class DomainError(GGSPError, ValueError):
    """An argument lies outside the domain of a density or basis function."""


class IdentifiabilityError(GGSPError, ValueError):
    pass


class DegenerateMixtureError(GGSPError, ValueError):
    pass


class NumericalError(GGSPError, ArithmeticError):
    """Non-finite intermediate; ``index`` names the offending sample when known."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FitFailureError(GGSPError, RuntimeError):
    pass


class SelectionError(GGSPError, RuntimeError):
    pass


class ConfigError(InvalidInputError):
    pass
