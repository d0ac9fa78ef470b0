"""Exception types raised across the package."""


class GumbelSteinError(Exception):
    """Base class for all package errors."""


class DomainError(GumbelSteinError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonConvergence(GumbelSteinError, ArithmeticError):
    """Quadrature exhausted its subdivision budget before meeting tolerance."""


class BudgetExceeded(GumbelSteinError):
    """The requested enumeration or sampling exceeds the allowed budget."""


class DegenerateInput(GumbelSteinError, ValueError):
    """Input data cannot support the requested fit."""


class WindowTooSmall(GumbelSteinError, ValueError):
    """A truncation window fails its tail certificate."""
