"""Exception hierarchy shared across the package."""


class RiceBayesError(Exception):
    """Base class for package errors."""


class DomainError(RiceBayesError, ValueError):
    """An argument lies outside the domain of the function."""


class QuadratureError(RiceBayesError, ArithmeticError):
    """Numerical integration could not certify the requested tolerance."""


class DegenerateSampleError(RiceBayesError, ValueError):
    """The sample cannot support the requested estimator."""


class ImproperPosteriorError(RiceBayesError):
    """The prior/sample combination is not known to give a proper posterior.

    The verdict that triggered the refusal is kept on ``self.verdict``.
    """

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class ConvergenceError(RiceBayesError, ArithmeticError):
    """An iterative procedure failed to converge."""
