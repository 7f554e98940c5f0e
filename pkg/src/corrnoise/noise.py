"""Noise generation and perturbation of template correlation matrices.

Every routine adds ``eps * (E - I)`` to a template ``Sigma``, where ``E`` is
the Gram matrix of ``n`` random unit vectors. Because ``E`` is PSD with
unit diagonal, the result keeps a unit diagonal, moves each off-diagonal
entry by at most ``eps`` and has smallest eigenvalue at least
``lambda_N(Sigma) - eps``. The recipe-specific wrappers replace
``lambda_N(Sigma)`` by closed-form lower bounds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special

from .errors import AdmissibilityError, BoundsUnavailable, InfeasibleBudgetError, ParameterError
from .spectra import DEFAULT_TOL, SymmetricMatrix, eigenvalues, validate_correlation
from .templates import (
    CorrelationTemplate,
    Kind,
    SpectralBounds,
    analytic_bounds,
    build_template,
    hub_uncertified_reason,
)

# sub-stream identifiers for one replicate
STREAM_VECTORS = 0
STREAM_ALPHAS = 1
STREAM_GAUSSIAN = 2

BISECTION_TOL = 1e-10
# limits like 1 - 0.7 carry rounding error; eps within this margin counts as equal
BOUNDARY_MARGIN = 1e-12


def replicate_rng(seed: int, replicate: int = 0, stream: int = STREAM_VECTORS) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, replicate, stream)``.

    Replicate ``r`` is reachable directly, without drawing replicates
    ``0..r-1``.
    """
    if seed < 0 or replicate < 0:
        raise ParameterError("seed and replicate must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


class AlphaKind(str, enum.Enum):
    ABS = "abs"
    ARC = "arc"
    BETA = "beta"


@dataclass(frozen=True)
class AlphaDensity:
    """Density on [-1, 1] used to draw the mixing coefficients.

    ``abs``: ``f(x) = |x|``; ``arc``: ``f(x) = (2 - 2 sqrt(1 - x^2)) / (4 - pi)``;
    ``beta``: ``X = 2B - 1`` with ``B ~ Beta(a, b)``.
    """

    kind: AlphaKind
    a: float = 0.5
    b: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", AlphaKind(self.kind))
        if self.kind is AlphaKind.BETA and not (self.a > 0 and self.b > 0):
            raise ParameterError("beta density needs positive shape parameters")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= 1
        xc = np.clip(x, -1, 1)
        if self.kind is AlphaKind.ABS:
            val = np.abs(xc)
        elif self.kind is AlphaKind.ARC:
            val = (2 - 2 * np.sqrt(1 - xc**2)) / (4 - math.pi)
        else:
            # density of 2B - 1: f_B((x + 1) / 2) / 2
            with np.errstate(divide="ignore"):
                val = 0.5 * np.exp(
                    (self.a - 1) * np.log1p(xc) + (self.b - 1) * np.log1p(-xc)
                    - (self.a + self.b - 2) * math.log(2) - special.betaln(self.a, self.b)
                )
        return np.where(inside, val, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), -1, 1)
        if self.kind is AlphaKind.ABS:
            return np.where(x < 0, (1 - x**2) / 2, (1 + x**2) / 2)
        if self.kind is AlphaKind.ARC:
            area = (x * np.sqrt(1 - x**2) + np.arcsin(x)) / 2 + math.pi / 4
            return (2 * (x + 1) - 2 * area) / (4 - math.pi)
        return special.betainc(self.a, self.b, (x + 1) / 2)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF sampling by vectorised bisection."""
        target = rng.random(size)
        lo = np.full(size, -1.0)
        hi = np.full(size, 1.0)
        while np.max(hi - lo, initial=0.0) > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


class Generator(str, enum.Enum):
    SPHERE = "sphere"
    IID = "iid"
    ALPHA = "alpha"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level, noise-space dimension and vector generator.

    ``iid`` normalises iid standard-normal coordinates, which is the same
    construction as ``sphere``; it exists so configurations can name the
    central-limit regime explicitly.
    """

    epsilon: float
    m: int
    generator: Generator = Generator.SPHERE
    density: Optional[AlphaDensity] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "generator", Generator(self.generator))
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be a finite nonnegative number, got {self.epsilon}")
        if int(self.m) != self.m or self.m < 2:
            raise ParameterError(f"noise dimension m must be an integer >= 2, got {self.m}")
        if self.generator is Generator.ALPHA and self.density is None:
            raise ParameterError("alpha generator requires a density")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    def with_epsilon(self, eps: float) -> NoiseSpec:
        return NoiseSpec(eps, self.m, self.generator, self.density, self.seed)


@dataclass(frozen=True)
class NoiseBudget:
    kappa_max: float

    def __post_init__(self):
        if not self.kappa_max > 1:
            raise ParameterError(f"kappa_max must exceed 1, got {self.kappa_max}")


@dataclass(frozen=True)
class UnitVectorSet:
    """``n`` unit vectors in R^m, stored as the columns of an ``m x n`` array."""

    m: int
    n: int
    columns: np.ndarray = field(repr=False)


def sample_unit_vectors(spec: NoiseSpec, n: int, replicate: int = 0) -> UnitVectorSet:
    """Normalised iid standard-normal vectors, uniform on the sphere in R^m."""
    if n < 1:
        raise ParameterError("need at least one vector")
    rng = replicate_rng(spec.seed, replicate, STREAM_VECTORS)
    x = rng.standard_normal((spec.m, n))
    norms = np.linalg.norm(x, axis=0)
    # a zero draw has probability zero; redraw rather than divide by it
    while np.any(norms == 0):
        bad = norms == 0
        x[:, bad] = rng.standard_normal((spec.m, int(bad.sum())))
        norms = np.linalg.norm(x, axis=0)
    return UnitVectorSet(spec.m, n, x / norms)


def gram_noise(u: UnitVectorSet) -> SymmetricMatrix:
    return SymmetricMatrix.from_dense(_gram(u.columns))


def _gram(cols: np.ndarray) -> np.ndarray:
    e = cols.T @ cols
    e = 0.5 * (e + e.T)
    np.fill_diagonal(e, 1.0)
    return e


def draw_alphas(density: AlphaDensity, n: int, seed: int, replicate: int = 0) -> np.ndarray:
    return density.sample(replicate_rng(seed, replicate, STREAM_ALPHAS), n)


def alpha_mix_dense(cols: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Gram matrix of the lifted vectors ``(alpha_i, sqrt(1 - alpha_i^2) u_i)``."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(np.abs(alphas) > 1):
        raise ParameterError("mixing coefficients must lie in [-1, 1]")
    w = np.sqrt(np.clip(1 - alphas**2, 0.0, None))
    e = np.outer(alphas, alphas) + np.outer(w, w) * (cols.T @ cols)
    e = 0.5 * (e + e.T)
    np.fill_diagonal(e, 1.0)
    return e


def alpha_mix(u: UnitVectorSet, density: AlphaDensity, seed: int, replicate: int = 0) -> SymmetricMatrix:
    """Replace each ``u_i . u_j`` by ``a_i a_j + sqrt((1-a_i^2)(1-a_j^2)) u_i . u_j``."""
    alphas = draw_alphas(density, u.n, seed, replicate)
    return SymmetricMatrix.from_dense(alpha_mix_dense(u.columns, alphas))


def noise_matrix(spec: NoiseSpec, n: int, replicate: int = 0) -> np.ndarray:
    """Dense unit-diagonal PSD noise carrier ``E`` for one replicate."""
    u = sample_unit_vectors(spec, n, replicate)
    if spec.generator is Generator.ALPHA:
        return alpha_mix_dense(u.columns, draw_alphas(spec.density, n, spec.seed, replicate))
    return _gram(u.columns)


def apply_noise(sigma: np.ndarray, e: np.ndarray, eps: float) -> SymmetricMatrix:
    """``Sigma + eps (E - I)`` with the diagonal pinned to exactly 1.

    No admissibility check; the result need not be PSD.
    """
    s = sigma + eps * e
    np.fill_diagonal(s, 1.0)
    return SymmetricMatrix.from_dense(s)


def _check_eps(eps: float, limit: float, constraint: str):
    if not eps < limit - BOUNDARY_MARGIN:
        raise AdmissibilityError(
            f"epsilon={eps:.6g} violates {constraint} (limit {limit:.6g}, strict)",
            constraint=constraint,
            epsilon=eps,
            limit=limit,
        )


def perturb_general(
    sigma,
    spec: NoiseSpec,
    replicate: int = 0,
    lambda_n: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> SymmetricMatrix:
    """Perturb any positive definite correlation matrix.

    Requires ``eps < lambda_N(Sigma)``; pass ``lambda_n`` to reuse a value
    computed once for many replicates.
    """
    sm = sigma if isinstance(sigma, SymmetricMatrix) else SymmetricMatrix.from_dense(sigma)
    if sm.n == 1:
        return SymmetricMatrix.identity(1)
    if lambda_n is None:
        report = validate_correlation(sm, tol)
        if not (report.unit_diagonal and report.entries_in_range):
            raise ParameterError("template is not a correlation matrix")
        lambda_n = report.min_eigenvalue
    if spec.epsilon == 0:
        return sm
    _check_eps(spec.epsilon, lambda_n, "epsilon < lambda_N(Sigma)")
    return apply_noise(sm.dense, noise_matrix(spec, sm.n, replicate), spec.epsilon)


def basic_kappa_bound(lambda1: float, lambda_n: float, n: int, eps: float) -> float:
    """``(lambda_1 + (n - 1) eps) / (lambda_N - eps)``."""
    if eps >= lambda_n:
        return math.inf
    return (lambda1 + (n - 1) * eps) / (lambda_n - eps)


def epsilon_for_kappa(
    sigma_bounds: Union[SpectralBounds, tuple[float, float]],
    budget: NoiseBudget,
    n: int,
) -> float:
    """Largest ``eps`` whose condition-number bound stays within ``kappa_max``.

    ``sigma_bounds`` is a certificate or a computed ``(lambda_1, lambda_N)``.
    """
    if isinstance(sigma_bounds, SpectralBounds):
        lam1, lam_n = sigma_bounds.lambda1_upper, sigma_bounds.lambdaN_lower
    else:
        lam1, lam_n = sigma_bounds
    k = budget.kappa_max
    if not k * lam_n > lam1:
        raise InfeasibleBudgetError(
            f"kappa_max * lambda_N = {k * lam_n:.6g} does not exceed lambda_1 = {lam1:.6g}",
            constraint="kappa_max * lambda_N > lambda_1",
        )
    eps = (k * lam_n - lam1) / (k + (n - 1))
    # keep strictly inside the admissibility check
    cap = lam_n - 2 * BOUNDARY_MARGIN
    if not cap > 0:
        raise InfeasibleBudgetError(f"lambda_N = {lam_n:.3g} leaves no admissible epsilon", constraint="epsilon < lambda_N")
    return min(eps, cap)


def perturb_blocks(t: CorrelationTemplate, spec: NoiseSpec, replicate: int = 0) -> SymmetricMatrix:
    """Constant-correlation recipe.

    Within group k: ``rho_k + eps u_i.u_j``; between groups:
    ``delta + eps u_i.u_j``. One vector set is shared by all entries.
    """
    if t.kind is not Kind.CONSTANT:
        raise ParameterError("perturb_blocks requires a constant-correlation template")
    if t.delta != 0 and not t.delta < t.rho_min:
        raise AdmissibilityError("delta must be below rho_min", constraint="0 <= delta < rho_min")
    _check_eps(spec.epsilon, 1 - t.rho_max, "epsilon < 1 - rho_max")
    return _perturb_template(t, spec, replicate)


def perturb_toeplitz(t: CorrelationTemplate, spec: NoiseSpec, replicate: int = 0) -> SymmetricMatrix:
    if t.kind is not Kind.TOEPLITZ:
        raise ParameterError("perturb_toeplitz requires a Toeplitz template")
    r = t.rho_max
    _check_eps(spec.epsilon, (1 - r) / (1 + r), "epsilon < (1 - rho_max) / (1 + rho_max)")
    return _perturb_template(t, spec, replicate)


def perturb_hub(t: CorrelationTemplate, spec: NoiseSpec, replicate: int = 0) -> SymmetricMatrix:
    """Hub-Toeplitz recipe (linear decay, nonnegative first row).

    Raises BoundsUnavailable otherwise; route those through
    :func:`perturb_general` with a computed ``lambda_N``.
    """
    if t.kind is not Kind.HUB:
        raise ParameterError("perturb_hub requires a hub template")
    reason = hub_uncertified_reason(t)
    if reason:
        raise BoundsUnavailable(f"{reason}; use perturb_general with a computed lambda_N")
    limit = min(1 - g.rho - 0.75 * g.tau for g in t.groups)
    _check_eps(spec.epsilon, limit, "epsilon < min_k(1 - rho_k - 3 tau_k / 4)")
    return _perturb_template(t, spec, replicate)


def _perturb_template(t, spec, replicate):
    sigma = build_template(t)
    if sigma.n == 1 or spec.epsilon == 0:
        return sigma
    return apply_noise(sigma.dense, noise_matrix(spec, sigma.n, replicate), spec.epsilon)


def perturb(t: CorrelationTemplate, spec: NoiseSpec, replicate: int = 0, lambda_n: Optional[float] = None):
    """Dispatch on template kind; uncertified hubs go through the general routine."""
    if t.kind is Kind.CONSTANT:
        return perturb_blocks(t, spec, replicate)
    if t.kind is Kind.TOEPLITZ:
        return perturb_toeplitz(t, spec, replicate)
    try:
        return perturb_hub(t, spec, replicate)
    except BoundsUnavailable:
        return perturb_general(build_template(t), spec, replicate, lambda_n=lambda_n)


def kappa_certificate(t: CorrelationTemplate, eps: float, lambda_n: Optional[float] = None) -> float:
    """Condition-number bound matching :func:`perturb` for this template."""
    try:
        return analytic_bounds(t).kappa_bound(eps)
    except BoundsUnavailable:
        spec = eigenvalues(build_template(t))
        return basic_kappa_bound(spec.largest, spec.smallest if lambda_n is None else lambda_n, t.n, eps)


def dot_density(z, m: int):
    """Density of ``u.v`` for independent uniform unit vectors in R^m.

    Returns ``inf`` at ``|z| = 1`` when ``m = 2`` (integrable singularity).
    """
    if int(m) != m or m < 2:
        raise ParameterError("m must be an integer >= 2")
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) > 1):
        raise ParameterError("z must lie in [-1, 1]")
    log_c = special.gammaln(m / 2) - special.gammaln((m - 1) / 2) - 0.5 * math.log(math.pi)
    with np.errstate(divide="ignore"):
        out = np.exp(log_c) * np.power(1 - z**2, (m - 3) / 2)
    return out if out.ndim else float(out)


def dot_cdf(z, m: int):
    """CDF of ``u.v``: ``(u.v + 1) / 2`` is Beta((m-1)/2, (m-1)/2)."""
    half = (m - 1) / 2
    return special.betainc(half, half, (np.clip(np.asarray(z, dtype=float), -1, 1) + 1) / 2)


def noise_se(epsilon: float, m: int) -> float:
    """Approximate standard error ``eps / sqrt(m)`` of a perturbed correlation."""
    if not epsilon > 0 or m < 2:
        raise ParameterError("need epsilon > 0 and m >= 2")
    return epsilon / math.sqrt(m)
