"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`LoopspecError`.  Validation problems (bad arguments, violated
preconditions) derive from :class:`ValidationError`; failures of a numerical
procedure on valid input derive from :class:`NumericalError`.  The CLI maps
the two families to different exit codes.
"""


class LoopspecError(Exception):
    """Base class for all package errors."""


class ValidationError(LoopspecError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(LoopspecError, ArithmeticError):
    """A numerical procedure failed on admissible input."""


# -- validation ---------------------------------------------------------------

class DegenerateInput(ValidationError):
    pass


class InvalidAxes(ValidationError):
    pass


class DegenerateAxes(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ZeroOrbit(ValidationError):
    pass


class NearSingularOrbit(ValidationError):
    pass


class NotPiPeriodic(ValidationError):
    pass


class BoundaryViolation(ValidationError):
    pass


class ConstraintViolation(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


# -- numerical ----------------------------------------------------------------

class NonConvergence(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class TruncationTooCoarse(NumericalError):
    pass


class ProjectionIllConditioned(NumericalError):
    pass


class ProjectionFailure(NumericalError):
    pass
