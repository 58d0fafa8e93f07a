"""
Custom exceptions for the dstruct-tools package.
"""


class DStructToolsError(Exception):
    """Base exception for all dstruct-tools errors."""
    pass


class ArithmeticDomainError(DStructToolsError):
    """Raised for invalid field parameters or non-invertible elements."""
    pass


class SingularCurveError(DStructToolsError):
    """Raised when Weierstrass coefficients define a singular curve."""
    pass


class NotOnCurveError(DStructToolsError):
    """Raised when a point does not satisfy its curve equation."""
    pass


class TorsionError(DStructToolsError):
    """Raised when torsion is not rational within the configured tower bound."""
    pass


class OracleLimitError(DStructToolsError):
    """Raised when a brute-force oracle is asked for a prime that is too large."""
    pass


class IsogenyError(DStructToolsError):
    """Raised for invalid kernels or failed isogeny checks."""
    pass


class ModularPolynomialError(DStructToolsError):
    """Raised when a modular polynomial is unavailable or fails validation."""
    pass


class DownloadError(DStructToolsError):
    """Raised when downloading a table fails."""
    pass


class StructureError(DStructToolsError):
    """Raised when a curve and isogeny do not form a (d, eps)-structure."""
    pass


class AmbiguousStructureError(StructureError):
    """Raised when several candidate structures survive pointwise filtering."""
    pass


class EncodingError(DStructToolsError):
    """Raised when a structure encoding cannot be produced or decoded."""
    pass


class NotSplitError(DStructToolsError):
    """Raised when an ideal is not split or has no eigenpoint."""
    pass


class EnumerationLimitError(DStructToolsError):
    """Raised when brute-force enumeration is requested beyond its limit."""
    pass


class NoSeedError(DStructToolsError):
    """Raised when no starting vertex can be constructed."""
    pass


class BudgetExceededError(DStructToolsError):
    """Raised when a step or time budget runs out."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else {}


class ValidationError(DStructToolsError):
    """Raised when a public key fails validation."""

    def __init__(self, message: str, check: str = ""):
        super().__init__(message)
        self.check = check


class ParameterError(DStructToolsError):
    """Raised for inconsistent system parameters."""
    pass
