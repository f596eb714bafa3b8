"""Exception hierarchy.

Every error raised by the library derives from :class:`SpsdGeoError`.
:class:`ValidationError` covers malformed inputs (bad shapes, broken
invariants, bad configuration); :class:`NumericalError` covers failures of
the numerical procedures themselves (non-convergence, subspaces too far
apart for the logarithmic map). The CLI maps them to exit codes 2 and 3.
"""


class SpsdGeoError(Exception):
    pass


class ValidationError(SpsdGeoError, ValueError):
    pass


class NumericalError(SpsdGeoError, ArithmeticError):
    pass


class NonFinite(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class RankMismatch(ValidationError):
    def __init__(self, message, actual_rank=None):
        super().__init__(message)
        self.actual_rank = actual_rank


class NotAligned(ValidationError):
    pass


class BaseMismatch(ValidationError):
    pass


class ZeroVariance(ValidationError):
    pass


class InvalidComponentCount(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class TooFewPoints(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class EmptyClass(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class InvariantViolation(ValidationError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SubspaceTooFar(NumericalError):
    pass


class NoConvergence(NumericalError):
    """Raised when a fixed-point mean iteration exhausts ``max_iter``.

    ``last`` holds the final iterate, ``iterations`` the number of steps
    taken and ``grad_norm`` the Frobenius norm of the last mean tangent.
    """

    def __init__(self, message, last=None, iterations=None, grad_norm=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations
        self.grad_norm = grad_norm
