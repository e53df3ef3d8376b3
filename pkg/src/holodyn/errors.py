"""Exception hierarchy shared by all modules."""


class HolodynError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(HolodynError, ValueError):
    """A point or argument has the wrong number of coordinates."""


class ShapeError(HolodynError, ValueError):
    """Polynomials or maps with incompatible arity or degree were combined."""


class DegeneracyError(HolodynError, ValueError):
    """A lift has a common zero off the origin.

    The offending direction is kept in ``witness``.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DomainError(HolodynError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """Evaluation requested at (or numerically at) a pole."""


class UnsupportedError(HolodynError, ValueError):
    """The operation is not defined for this kind of input."""


class PreconditionError(HolodynError, ValueError):
    """A documented precondition of the operation does not hold."""


class ResourceError(HolodynError, RuntimeError):
    """The requested computation exceeds a configured size cap."""


class ConstructionError(HolodynError, ValueError):
    """A catalog constructor could not produce a valid object."""


class IllConditionedError(HolodynError, ArithmeticError):
    """A small divisor without exact resonance was met."""


class CommutationViolation(HolodynError, ValueError):
    """Inputs that were supposed to commute demonstrably do not."""


class InternalInvariantError(HolodynError, AssertionError):
    """An internal invariant was violated; this indicates a bug."""
