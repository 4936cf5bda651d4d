"""Exception types shared across the package."""


class ZxloError(Exception):
    """Base class for all package errors."""


class TypeMismatch(ZxloError):
    """Sequential composition of diagrams whose wire signatures do not align."""

    def __init__(self, position, expected, found):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(
            f"type mismatch at {position}: expected {expected}, found {found}"
        )


class ArityMismatch(ZxloError):
    pass


class NotPure(ZxloError):
    """Operation requires a pure diagram but channel commands are present."""


class NoAdjoint(ZxloError):
    """Generator has no adjoint in this calculus (triangle)."""


class CutoffTooSmall(ZxloError):
    pass


class NotPassiveLO(ZxloError):
    pass


class PhotonNumberMismatch(ZxloError):
    pass


class ShapeMismatch(ZxloError):
    pass


class UnboundedPrep(ZxloError):
    pass


class CausalityCycle(ZxloError):
    def __init__(self, variables):
        self.variables = list(variables)
        super().__init__(f"causality cycle through variables {self.variables}")


class DomainOverflow(ZxloError):
    pass


class NoBranches(ZxloError):
    pass


class SizeLimit(ZxloError):
    pass


class SearchExhausted(ZxloError):
    pass


class HorizonExceeded(ZxloError):
    pass


class BadPermutation(ZxloError):
    pass


class Unsupported(ZxloError):
    pass


class VerificationFailed(ZxloError):
    pass


class ParseError(ZxloError):
    """Malformed JSON input."""
