"""Exception types shared across the package."""


class CorrNoiseError(Exception):
    """Base class for all package errors."""


class ParameterError(CorrNoiseError, ValueError):
    """A template, spec or call argument violates its invariants."""


class AdmissibilityError(CorrNoiseError, ValueError):
    """The requested noise level is outside the admissible range.

    ``constraint`` names the binding inequality so callers (and the CLI)
    can report it verbatim.
    """

    def __init__(self, message, constraint=None, epsilon=None, limit=None):
        super().__init__(message)
        self.constraint = constraint
        self.epsilon = epsilon
        self.limit = limit


class InfeasibleBudgetError(AdmissibilityError):
    """No positive noise level satisfies the condition-number budget."""


class ConvergenceError(CorrNoiseError, ArithmeticError):
    """The eigensolver failed to converge within its sweep limit."""


class NotPositiveDefiniteError(CorrNoiseError, ArithmeticError):
    """Cholesky factorisation hit a non-positive pivot."""

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class BoundsUnavailable(CorrNoiseError):
    """No analytic spectral certificate exists for this template.

    Raised for hub templates with a nonlinear decay exponent. Callers are
    expected to fall back to computed eigenvalues and the general
    perturbation routine.
    """
