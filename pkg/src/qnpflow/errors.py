"""Exception types shared across the package."""


class QnpflowError(Exception):
    """Base class for all package-specific errors."""


class ParseError(QnpflowError):
    """Raised when a file cannot be parsed (malformed syntax, missing keys, wrong types)."""


class ValidationError(QnpflowError):
    """Raised when parsed data violates a semantic invariant."""


class DimensionMismatch(QnpflowError):
    """Raised when array dimensions disagree with the network structure."""


class SingularJacobian(QnpflowError):
    """Raised when the Newton-Raphson linear solve hits a pivot below threshold."""


class NotConverged(QnpflowError):
    """Raised when an iterative solver exhausts its iteration budget.

    Carries the per-iteration mismatch norm history in ``history``.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class InvalidSpin(QnpflowError):
    """Raised when a spin quantum number is not a positive half-integer."""


class InvalidDensityMatrix(QnpflowError):
    """Raised when a matrix fails the density-matrix checks (trace, hermiticity, positivity)."""


class NoCoupling(QnpflowError):
    """Raised when every reservoir coupling is zero and no steady state is defined."""


class DegenerateCurve(QnpflowError):
    """Raised when a transfer curve carries no usable slope information for fitting."""


class UnknownSpin(QnpflowError):
    """Raised when a spin value has no tabulated steepness entry."""


class ShapeMismatch(QnpflowError):
    """Raised when neural-network array shapes disagree with the topology."""


class NonFinite(QnpflowError):
    """Raised when training produces NaN or Inf values."""


class MapeUndefined(QnpflowError):
    """Raised when MAPE is requested against targets containing exact zeros."""


class TooFewConverged(QnpflowError):
    """Raised when dataset generation loses more than the allowed share of samples."""


class VersionMismatch(QnpflowError):
    """Raised when a serialized model declares an unsupported format version."""
