"""Exception types raised by the library."""


class NfcorrError(Exception):
    """Base class for all library errors."""


class ValidationError(NfcorrError, ValueError):
    """Input data violates a type invariant (normalization, symmetry, ...)."""


class DomainError(NfcorrError, ValueError):
    """A formula is undefined for the supplied parameters (e.g. S = 0)."""


class SingularityError(NfcorrError, ArithmeticError):
    """A scatterer coincides with (or is too close to) an array element."""


class BesselRangeError(NfcorrError, OverflowError):
    """Argument outside the supported range of the Bessel evaluator."""
