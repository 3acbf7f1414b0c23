"""Exception types raised across the package."""


class ComplianceError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(ComplianceError, ValueError):
    pass


class SpanError(ComplianceError, ValueError):
    """Vector lies outside the span of an atom set, so the gauge is infinite."""


class ZeroVectorError(ComplianceError, ValueError):
    pass


class BudgetExceededError(ComplianceError):
    """An exhaustive enumeration would exceed the configured budget."""


class CertificateError(ComplianceError):
    """An operator supplied as a recovery failure does not actually fail."""


class InfeasibleError(ComplianceError):
    pass


class UnboundedError(ComplianceError):
    pass


class SolverStallError(ComplianceError):
    """The simplex iteration cap was reached."""
