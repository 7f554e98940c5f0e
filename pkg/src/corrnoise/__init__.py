"""Noisy correlation matrices from structured templates, with certified condition numbers."""
from .errors import (
    AdmissibilityError,
    BoundsUnavailable,
    ConvergenceError,
    CorrNoiseError,
    InfeasibleBudgetError,
    NotPositiveDefiniteError,
    ParameterError,
)
from .spectra import SymmetricMatrix, Spectrum, ValidityReport, eigenvalues, validate_correlation
from .templates import CorrelationTemplate, GroupSpec, Kind, SpectralBounds, analytic_bounds, build_template
from .noise import NoiseBudget, NoiseSpec, epsilon_for_kappa, perturb

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "BoundsUnavailable",
    "ConvergenceError",
    "CorrNoiseError",
    "CorrelationTemplate",
    "GroupSpec",
    "InfeasibleBudgetError",
    "Kind",
    "NoiseBudget",
    "NoiseSpec",
    "NotPositiveDefiniteError",
    "ParameterError",
    "SpectralBounds",
    "Spectrum",
    "SymmetricMatrix",
    "ValidityReport",
    "analytic_bounds",
    "build_template",
    "eigenvalues",
    "epsilon_for_kappa",
    "perturb",
    "validate_correlation",
]
