"""Structured template correlation matrices and their spectral certificates.

Three block recipes are supported: constant correlation (compound
symmetry), Toeplitz ``rho**|i-j|`` and hub-Toeplitz, whose first row decays
from ``rho`` in steps of ``tau``. Blocks sit on the diagonal of the
template; off-block entries are ``delta`` for constant-correlation
templates and zero otherwise.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import toeplitz

from .errors import BoundsUnavailable, ParameterError
from .spectra import SymmetricMatrix


class Kind(str, enum.Enum):
    CONSTANT = "constant"
    TOEPLITZ = "toeplitz"
    HUB = "hub"


@dataclass(frozen=True)
class GroupSpec:
    """One diagonal block.

    ``rho`` is the within-group correlation (constant), the lag-one factor
    (Toeplitz) or the hub's largest correlation (hub). ``tau`` is the hub
    step per lag and ``gamma`` the hub decay exponent.
    """

    kind: Kind
    size: int
    rho: float
    tau: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.size) != self.size or self.size < 1:
            raise ParameterError(f"group size must be a positive integer, got {self.size}")
        if self.kind is Kind.HUB:
            if not -1.0 < self.rho < 1.0:
                raise ParameterError(f"hub rho must lie in (-1, 1), got {self.rho}")
            if self.tau < 0:
                raise ParameterError(f"hub tau must be nonnegative, got {self.tau}")
            if not self.gamma > 0:
                raise ParameterError(f"hub gamma must be positive, got {self.gamma}")
            if self.size >= 3 and not self.rho_min > -1.0:
                raise ParameterError(
                    f"hub first row reaches {self.rho_min:.4g}; entries must stay in (-1, 1)"
                )
        else:
            if not 0.0 <= self.rho < 1.0:
                raise ParameterError(f"{self.kind.value} rho must lie in [0, 1), got {self.rho}")

    @classmethod
    def hub(cls, size: int, rho_max: float, rho_min: float, gamma: float = 1.0) -> GroupSpec:
        """Hub block decaying from ``rho_max`` (lag 1) to ``rho_min`` (lag g-1)."""
        if size < 3:
            raise ParameterError("a hub group defined by rho_max/rho_min needs size >= 3")
        return cls(Kind.HUB, size, rho_max, (rho_max - rho_min) / (size - 2), gamma)

    @property
    def rho_min(self) -> float:
        """Smallest hub correlation, at the last column of the first row."""
        return self.rho - self.tau * max(self.size - 2, 0)

    def first_row(self) -> np.ndarray:
        g = self.size
        if self.kind is Kind.CONSTANT:
            row = np.full(g, self.rho)
        elif self.kind is Kind.TOEPLITZ:
            row = self.rho ** np.arange(g, dtype=float)
        elif g >= 3 and self.gamma != 1.0:
            return hub_first_row(g, self.rho, self.rho_min, self.gamma)
        else:
            row = self.rho - self.tau * (np.arange(g, dtype=float) - 1.0)
        row[0] = 1.0
        return row

    def block(self) -> np.ndarray:
        return toeplitz(self.first_row())


@dataclass(frozen=True)
class CorrelationTemplate:
    """Ordered homogeneous groups plus the between-group baseline ``delta``."""

    groups: tuple[GroupSpec, ...]
    delta: float = 0.0

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ParameterError("a template needs at least one group")
        kinds = {g.kind for g in groups}
        if len(kinds) > 1:
            raise ParameterError(
                f"mixed group kinds {sorted(k.value for k in kinds)}; use noise.perturb_general instead"
            )
        if self.delta != 0.0:
            if self.kind is not Kind.CONSTANT:
                raise ParameterError("delta is only defined for constant-correlation templates")
            if not 0.0 <= self.delta < self.rho_min:
                raise ParameterError(
                    f"delta={self.delta} must satisfy 0 <= delta < rho_min={self.rho_min}"
                )

    @classmethod
    def constant(cls, sizes: Sequence[int], rhos: Sequence[float], delta: float = 0.0):
        return cls(tuple(GroupSpec(Kind.CONSTANT, g, r) for g, r in zip(sizes, rhos, strict=True)), delta)

    @classmethod
    def toeplitz(cls, sizes: Sequence[int], rhos: Sequence[float]):
        return cls(tuple(GroupSpec(Kind.TOEPLITZ, g, r) for g, r in zip(sizes, rhos, strict=True)))

    @classmethod
    def hub(cls, sizes: Sequence[int], rho_max: Sequence[float], rho_min: Sequence[float], gamma: float = 1.0):
        return cls(
            tuple(
                GroupSpec.hub(g, hi, lo, gamma)
                for g, hi, lo in zip(sizes, rho_max, rho_min, strict=True)
            )
        )

    @property
    def kind(self) -> Kind:
        return self.groups[0].kind

    @property
    def n(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def rho_max(self) -> float:
        return max(g.rho for g in self.groups)

    @property
    def rho_min(self) -> float:
        return min(g.rho for g in self.groups)

    @property
    def labels(self) -> np.ndarray:
        """1-based group membership of each row."""
        return np.repeat(np.arange(1, len(self.groups) + 1), [g.size for g in self.groups])

    def offsets(self) -> list[int]:
        return list(np.cumsum([0] + [g.size for g in self.groups]))


def build_template(t: CorrelationTemplate) -> SymmetricMatrix:
    n = t.n
    out = np.full((n, n), t.delta if t.kind is Kind.CONSTANT else 0.0)
    for g, start in zip(t.groups, t.offsets()):
        out[start : start + g.size, start : start + g.size] = g.block()
    np.fill_diagonal(out, 1.0)
    return SymmetricMatrix.from_dense(out)


def hub_first_row(g: int, rho_max: float, rho_min: float, gamma: float = 1.0) -> np.ndarray:
    """First row ``(1, rho_max, ..., rho_min)`` with power-law decay.

    Entry ``i`` (1-based, ``i >= 2``) is
    ``rho_max - ((i - 2) / (g - 2))**gamma * (rho_max - rho_min)``.
    """
    if g < 3:
        raise ParameterError(f"hub_first_row needs g >= 3, got {g}")
    if not -1.0 < rho_min <= rho_max < 1.0:
        raise ParameterError(f"need -1 < rho_min <= rho_max < 1, got ({rho_min}, {rho_max})")
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    frac = np.arange(g - 1, dtype=float) / (g - 2)
    row = np.empty(g)
    row[0] = 1.0
    row[1:] = rho_max - frac**gamma * (rho_max - rho_min)
    return row


@dataclass(frozen=True)
class SpectralBounds:
    """Analytic eigenvalue certificate for a template.

    ``kappa_bound(eps)`` bounds the condition number of any matrix the
    matching perturbation routine produces at noise level ``eps``.
    """

    lambda1_upper: float
    lambdaN_lower: float
    epsilon_max: float
    n: int
    kappa_bound: Callable[[float], float] = field(repr=False, compare=False)

    def __post_init__(self):
        if not (self.lambdaN_lower > 0 and self.epsilon_max > 0):
            raise ParameterError("certificate requires positive lambdaN_lower and epsilon_max")


def _basic_kappa(lam1: float, lam_n: float, n: int) -> Callable[[float], float]:
    def bound(eps: float) -> float:
        if eps >= lam_n:
            return math.inf
        return (lam1 + (n - 1) * eps) / (lam_n - eps)

    return bound


def hub_lambda1_first_row(t: CorrelationTemplate) -> float:
    """``max_k 1 + (g_k-1) rho_k - tau_k (g_k-2)(g_k-1)/2``.

    This is the first-row Gershgorin sum of each linear hub block. It is
    NOT an upper bound on the largest eigenvalue once ``tau > 0``: interior
    rows of a Toeplitz block carry larger absolute sums than the first row.
    Kept for reference and for reporting against computed spectra; the
    certificate in :func:`analytic_bounds` uses :func:`hub_lambda1_rowsum`.
    """
    return max(
        1 + (g.size - 1) * g.rho - g.tau * (g.size - 2) * (g.size - 1) / 2 for g in t.groups
    )


def hub_lambda1_rowsum(t: CorrelationTemplate) -> float:
    """Largest absolute row sum over all hub blocks (a sound Gershgorin bound)."""
    best = 0.0
    for g in t.groups:
        block = np.abs(g.block())
        best = max(best, float(np.max(block.sum(axis=1))))
    return best


def hub_lambdaN_lower(t: CorrelationTemplate) -> float:
    """``min_k 1 - rho_k - (3/4) tau_k``."""
    return min(1 - g.rho - 0.75 * g.tau for g in t.groups)


def hub_uncertified_reason(t: CorrelationTemplate):
    """Why a hub template has no closed-form certificate, or None if it has one.

    The certificate needs linear decay and a nonnegative first row; with
    negative hub correlations the lower eigenvalue bound fails.
    """
    if any(g.gamma != 1.0 and g.size >= 3 for g in t.groups):
        return "hub templates with gamma != 1 carry no analytic certificate"
    if any(g.size >= 2 and g.rho_min < 0 for g in t.groups):
        return "hub templates with negative first-row correlations carry no analytic certificate"
    return None


def analytic_bounds(t: CorrelationTemplate) -> SpectralBounds:
    """Closed-form eigenvalue bounds and the matching condition-number bound.

    Raises BoundsUnavailable for hub templates with ``gamma != 1`` or a
    negative first-row entry.
    """
    n = t.n
    if t.kind is Kind.CONSTANT:
        lam_n = 1.0 - t.rho_max
        lam1 = n + 1.0

        def kappa(eps: float) -> float:
            if eps >= lam_n:
                return math.inf
            return (n * (1 + eps) + 1) / (1 - t.rho_max - eps)

        return SpectralBounds(lam1, lam_n, lam_n, n, kappa)
    if t.kind is Kind.TOEPLITZ:
        r = t.rho_max
        lam1 = (1 + r) / (1 - r)
        lam_n = (1 - r) / (1 + r)
        return SpectralBounds(lam1, lam_n, lam_n, n, _basic_kappa(lam1, lam_n, n))
    reason = hub_uncertified_reason(t)
    if reason:
        raise BoundsUnavailable(reason)
    lam_n = hub_lambdaN_lower(t)
    if not lam_n > 0:
        raise ParameterError(
            f"hub template has min(1 - rho_k - 3 tau_k / 4) = {lam_n:.4g} <= 0; no certificate"
        )
    lam1 = hub_lambda1_rowsum(t)
    return SpectralBounds(lam1, lam_n, lam_n, n, _basic_kappa(lam1, lam_n, n))


def shifted_block_matrix(t: CorrelationTemplate) -> SymmetricMatrix:
    """``blockdiag(Sigma_k - delta J) + delta J_N`` for a constant template."""
    if t.kind is not Kind.CONSTANT:
        raise ParameterError("shifted_block_matrix requires a constant-correlation template")
    return SymmetricMatrix.from_dense(shift_part(t).dense + t.delta)


def shift_part(t: CorrelationTemplate) -> SymmetricMatrix:
    """The block-diagonal part ``blockdiag(Sigma_k - delta J)``."""
    if t.kind is not Kind.CONSTANT:
        raise ParameterError("shift_part requires a constant-correlation template")
    n = t.n
    out = np.zeros((n, n))
    for g, start in zip(t.groups, t.offsets()):
        out[start : start + g.size, start : start + g.size] = g.block() - t.delta
    return SymmetricMatrix.from_dense(out)


def poisson_kernel(rho: float, theta, variant: str = "standard"):
    """Poisson kernel ``(1 - rho^2) / (1 - 2 rho cos(theta) + rho^2)``.

    ``variant="single_cosine"`` evaluates ``(1 - rho^2) / (1 - rho cos(theta)
    + rho^2)`` instead. Only the standard form has the symbol-range
    extremes ``(1 + rho)/(1 - rho)`` at 0 and ``(1 - rho)/(1 + rho)`` at pi.
    """
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    coef = {"standard": 2.0, "single_cosine": 1.0}.get(variant)
    if coef is None:
        raise ParameterError(f"unknown variant {variant!r}")
    return (1 - rho**2) / (1 - coef * rho * np.cos(theta) + rho**2)
