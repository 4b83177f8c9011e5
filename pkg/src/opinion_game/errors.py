"""Exception and warning types shared across the package."""


class OpinionGameError(Exception):
    """Base class for all package errors."""


class ValidationError(OpinionGameError, ValueError):
    """Invalid network, scenario or scenario-file content."""


class NumericalError(OpinionGameError, ArithmeticError):
    """A numerical precondition failed (singular system, divergence, ...)."""


class NoUniqueEquilibriumError(NumericalError):
    """H(t_f) is numerically singular: no unique open-loop equilibrium."""


class NotHurwitzError(NumericalError):
    """The stacked estimator matrix -Delta H is not Hurwitz."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DefectiveMatrixError(NumericalError):
    """Matrix is not (numerically) diagonalizable."""


class AssumptionWarning(UserWarning):
    """A modelling assumption (connectivity, Loewner ordering) is violated."""
