"""Exception hierarchy shared by the library and the CLI."""


class HFWError(Exception):
    """Base class for all library errors."""


class DomainError(HFWError, ValueError):
    """Argument outside the domain of an operation (bad frequency, parameter off the box, ...)."""


class NonConvergenceError(HFWError, ArithmeticError):
    """A series or iterative scheme could not reach its tolerance."""


class QuadratureError(HFWError, ArithmeticError):
    """Quadrature could not certify the requested tolerance.

    The achieved error bound is kept on ``error_bound``.
    """

    def __init__(self, message: str, error_bound: float):
        super().__init__(f"{message} (achieved error bound {error_bound:.3e})")
        self.error_bound = error_bound


class SingularMatrixError(HFWError, ArithmeticError):
    """An information matrix that must be inverted is singular."""


class DegenerateLimitError(HFWError, ArithmeticError):
    """A rate-matrix family violates the nondegeneracy condition of its limits."""


class EmbeddingError(HFWError):
    """Circulant embedding produced eigenvalues that are too negative."""


class FactorizationError(HFWError, ArithmeticError):
    """Dense factorization of a covariance matrix failed."""


class StudyError(HFWError):
    """A Monte Carlo study had too many failed replications."""
