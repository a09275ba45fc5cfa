"""Exception hierarchy.

Errors fall in two families that the CLI maps to distinct exit codes:
parameter problems (the inputs describe an impossible or unsupported model)
and numerical failures (a computation produced non-finite values or did not
converge where convergence is required).
"""


class MvampError(Exception):
    """Base class for all package errors."""


class ParameterError(MvampError, ValueError):
    """Input parameters fall outside their valid domain."""


class InfeasibleRatesError(ParameterError):
    """Edge rates (a, b) cannot be realised for the requested (d, lambda, n)."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class ProbabilityOverflowError(ParameterError):
    """An edge probability a/n or b/n exceeds one."""


class DenseCapError(ParameterError):
    """Requested dense matrix size exceeds the configured node budget."""


class EnumerationBudgetError(ParameterError):
    """Exhaustive enumeration over latent states would be too large."""


class RegimeError(ParameterError):
    """A closed-form criterion is evaluated outside the regime where it is defined."""


class NumericalError(MvampError, ArithmeticError):
    """A computation produced non-finite intermediate values."""


class SolverError(NumericalError):
    """A root or eigen solver failed to find a solution it should exist."""


class DivergedRunError(NumericalError):
    """AMP iterates became non-finite or exceeded the divergence guard.

    ``last_finite`` holds the last finite iterate (an n x L array) and
    ``iteration`` the step at which the failure was detected.
    """

    def __init__(self, message, iteration, last_finite):
        super().__init__(message)
        self.iteration = iteration
        self.last_finite = last_finite
