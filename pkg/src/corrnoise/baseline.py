"""Gaussian sample-correlation baseline and method-vs-baseline statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .noise import STREAM_GAUSSIAN, replicate_rng
from .spectra import SymmetricMatrix, cholesky, eigenvalues

DEFAULT_BINS = 81
DEFAULT_RANGE = (-0.4, 0.4)


@dataclass(frozen=True)
class GaussianSampleSpec:
    sample_size: int
    seed: int = 0

    def __post_init__(self):
        if int(self.sample_size) != self.sample_size or self.sample_size < 2:
            raise ParameterError(f"sample_size must be an integer >= 2, got {self.sample_size}")


@dataclass(frozen=True)
class DiffSummary:
    histogram: list[tuple[float, float, int]]
    mean: float
    sd: float
    max_abs: float
    n_offdiag: int


def pearson_correlation(x: np.ndarray) -> np.ndarray:
    """Correlation between the columns of ``x`` (rows are observations).

    A constant column has no defined correlation; its row and column are
    set to zero off the diagonal.
    """
    xc = x - x.mean(axis=0)
    norms = np.linalg.norm(xc, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    z = xc / safe
    r = z.T @ z
    r = 0.5 * (r + r.T)
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def gaussian_sample_correlation(sigma, spec: GaussianSampleSpec, replicate: int = 0) -> SymmetricMatrix:
    """Sample correlation of ``sample_size`` draws from ``N(0, Sigma)``.

    With ``sample_size < n`` the result is singular; that is returned as-is.
    """
    sm = sigma if isinstance(sigma, SymmetricMatrix) else SymmetricMatrix.from_dense(sigma)
    low = cholesky(sm)
    rng = replicate_rng(spec.seed, replicate, STREAM_GAUSSIAN)
    z = rng.standard_normal((spec.sample_size, sm.n))
    return SymmetricMatrix.from_dense(pearson_correlation(z @ low.T))


def diff_summary(
    generated,
    template,
    bins: int = DEFAULT_BINS,
    value_range: Optional[tuple[float, float]] = None,
) -> DiffSummary:
    """Histogram and moments of ``generated - template`` over the strict upper triangle.

    Without ``value_range`` the bins span ``[-max_abs, max_abs]``. Values
    outside an explicit range land in the edge bins so counts always sum to
    ``n (n - 1) / 2``.
    """
    g = generated.dense if isinstance(generated, SymmetricMatrix) else np.asarray(generated, float)
    t = template.dense if isinstance(template, SymmetricMatrix) else np.asarray(template, float)
    if g.shape != t.shape:
        raise ParameterError(f"dimension mismatch: {g.shape} vs {t.shape}")
    if bins < 1:
        raise ParameterError("bins must be positive")
    iu = np.triu_indices(g.shape[0], k=1)
    diffs = g[iu] - t[iu]
    max_abs = float(np.max(np.abs(diffs))) if diffs.size else 0.0
    if value_range is None:
        half = max_abs if max_abs > 0 else 1.0
        value_range = (-half, half)
    lo, hi = value_range
    if not hi > lo:
        raise ParameterError("value_range must be increasing")
    counts, edges = np.histogram(np.clip(diffs, lo, hi), bins=bins, range=(lo, hi))
    hist = [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return DiffSummary(
        histogram=hist,
        mean=float(diffs.mean()) if diffs.size else 0.0,
        sd=float(diffs.std()) if diffs.size else 0.0,
        max_abs=max_abs,
        n_offdiag=int(diffs.size),
    )


def spectrum_compare(a, b) -> tuple[tuple[np.ndarray, np.ndarray], float]:
    """Both descending spectra and the largest eigenvalue gap between them."""
    sa, sb = eigenvalues(a), eigenvalues(b)
    if len(sa) != len(sb):
        raise ParameterError("dimension mismatch")
    return (sa.values, sb.values), float(np.max(np.abs(sa.values - sb.values)))
