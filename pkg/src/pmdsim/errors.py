"""Exception hierarchy for pmdsim."""


class PmdError(Exception):
    """Base class for all pmdsim errors."""


class RangeError(PmdError, ValueError):
    """A parameter lies outside its admissible range."""


class PhysicalityError(PmdError, ValueError):
    """The survival sequence is not strictly decreasing.

    Attributes
    ----------
    n : int
        First index with ``survival(n) >= survival(n - 1)``.
    """

    def __init__(self, message, n):
        super().__init__(message)
        self.n = n


class SingularityError(PmdError, ArithmeticError):
    """A state-transition matrix has no unique stationary distribution."""


class HorizonError(PmdError, ValueError):
    """Requested horizon exceeds the cap for exact tables."""


class NoRealSolution(PmdError, ArithmeticError):
    """The model equations admit no real solution.

    Attributes
    ----------
    discriminant : float
        Discriminant of the quadratic in ``beta1 ** 2``.
    """

    def __init__(self, message, discriminant):
        super().__init__(message)
        self.discriminant = discriminant


class ConstructionError(PmdError, ArithmeticError):
    """A built model violates completeness beyond tolerance."""


class EmptyBlockError(PmdError, ValueError):
    """A partition block contains no causal state."""


class InvalidDensityMatrix(PmdError, ValueError):
    """Matrix is not Hermitian, unit-trace and positive semidefinite."""


class DegenerateSVD(PmdError, ArithmeticError):
    """Singular values coincide, so the singular frame is not unique."""


class MappingError(PmdError, RuntimeError):
    """No consistent assignment of walk exit ports to outcomes exists."""


class ConvergenceError(PmdError, RuntimeError):
    """A numerical solve failed after all restarts."""


# exit code 2 in the CLI
VALIDATION_ERRORS = (RangeError, PhysicalityError, HorizonError)
# exit code 3 in the CLI
SOLVER_ERRORS = (
    NoRealSolution,
    ConstructionError,
    SingularityError,
    DegenerateSVD,
    MappingError,
    ConvergenceError,
    EmptyBlockError,
)
