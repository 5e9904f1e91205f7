"""Exception hierarchy shared by every graphlog module."""


class GraphlogError(Exception):
    """Base class for all library errors."""


class ParseError(GraphlogError):
    """Malformed input file."""


class ValidationError(GraphlogError):
    """Input violates a structural or problem hypothesis."""


class UnknownVertex(GraphlogError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidP(ValidationError):
    pass


class BoundaryViolation(ValidationError):
    pass


class NonFiniteValue(GraphlogError, ArithmeticError):
    pass


class ZeroPair(GraphlogError):
    pass


class CouplingDegenerate(GraphlogError):
    """Coupling integral B vanishes, so the ray never meets the Nehari set."""


class RayOverflow(GraphlogError, OverflowError):
    pass


class EmptyCandidates(GraphlogError):
    pass


class EmptyIntersection(ValidationError):
    pass


class NoConvergedSeed(GraphlogError):
    """All seeds failed; ``report`` carries the best-effort result."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EpsilonTooLarge(ValidationError):
    pass


class DeltaTooLarge(ValidationError):
    pass


class PotentialNotPositive(ValidationError):
    pass


class NegativePotentialWarning(UserWarning):
    pass
