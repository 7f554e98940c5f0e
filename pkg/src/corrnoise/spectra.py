"""Dense symmetric-matrix kernel.

Packed storage, a cyclic Jacobi eigensolver, Cholesky,
Gershgorin intervals and correlation-matrix validity checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import ConvergenceError, NotPositiveDefiniteError, ParameterError

DEFAULT_TOL = 1e-8
JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

__all__ = [
    "DEFAULT_TOL",
    "SymmetricMatrix",
    "Spectrum",
    "ValidityReport",
    "eigenvalues",
    "min_eigenvalue",
    "condition_number",
    "gershgorin_intervals",
    "cholesky",
    "validate_correlation",
]


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Symmetric ``n x n`` matrix stored as its packed upper triangle.

    Entries ``(i, j)`` with ``i <= j`` are stored row-major in ``packed``;
    each off-diagonal pair is therefore stored exactly once.
    """

    n: int
    packed: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.n}")
        packed = np.asarray(self.packed, dtype=float)
        if packed.shape != (self.n * (self.n + 1) // 2,):
            raise ParameterError(
                f"packed storage for n={self.n} needs {self.n * (self.n + 1) // 2} entries, got {packed.shape}"
            )
        if not np.all(np.isfinite(packed)):
            raise ParameterError("matrix entries must be finite")
        packed = packed.copy()
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_dense(cls, a, atol: float = 0.0) -> SymmetricMatrix:
        """Pack a dense square array.

        With ``atol > 0`` the array must be symmetric within ``atol`` and the
        upper triangle is kept; with the default 0 the array must be exactly
        symmetric.
        """
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("matrix entries must be finite")
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        if asym > atol:
            raise ParameterError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
        n = a.shape[0]
        return cls(n, a[np.triu_indices(n)])

    @classmethod
    def identity(cls, n: int) -> SymmetricMatrix:
        return cls.from_dense(np.eye(n))

    @cached_property
    def dense(self) -> np.ndarray:
        """Full ``n x n`` read-only array view of the matrix."""
        out = np.empty((self.n, self.n))
        iu = np.triu_indices(self.n)
        out[iu] = self.packed
        out.T[iu] = self.packed
        out.flags.writeable = False
        return out

    def to_dense(self) -> np.ndarray:
        """Writable copy of the full matrix."""
        return np.array(self.dense)

    def __getitem__(self, ij):
        i, j = ij
        if i > j:
            i, j = j, i
        if not (0 <= i and j < self.n):
            raise IndexError(ij)
        return float(self.packed[i * self.n - i * (i - 1) // 2 + (j - i)])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.dense).copy()

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.dense))

    def shift(self, c: float) -> SymmetricMatrix:
        """Return ``A + c I``."""
        return SymmetricMatrix.from_dense(self.dense + c * np.eye(self.n))

    def __add__(self, other):
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        if other.n != self.n:
            raise ParameterError("dimension mismatch")
        return SymmetricMatrix(self.n, self.packed + other.packed)

    def __repr__(self):
        return f"SymmetricMatrix(n={self.n})"


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order plus the achieved residual bound."""

    values: np.ndarray
    residual_tolerance: float

    def __post_init__(self):
        if np.any(np.diff(self.values) > 0):
            raise ParameterError("spectrum values must be sorted descending")

    def __len__(self):
        return len(self.values)

    @property
    def largest(self) -> float:
        return float(self.values[0])

    @property
    def smallest(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class ValidityReport:
    unit_diagonal: bool
    entries_in_range: bool
    min_eigenvalue: float
    positive_semidefinite: bool
    condition_number: float
    max_eigenvalue: float = math.nan

    @property
    def valid(self) -> bool:
        """True for a correlation matrix (unit diagonal, range, PSD)."""
        return self.unit_diagonal and self.entries_in_range and self.positive_semidefinite

    @property
    def positive_definite(self) -> bool:
        return self.valid and math.isfinite(self.condition_number)

    def to_dict(self) -> dict:
        return {
            "unit_diagonal": self.unit_diagonal,
            "entries_in_range": self.entries_in_range,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "positive_semidefinite": self.positive_semidefinite,
            "condition_number": self.condition_number if math.isfinite(self.condition_number) else None,
            "valid": self.valid,
        }


def _as_symmetric(m) -> SymmetricMatrix:
    if isinstance(m, SymmetricMatrix):
        return m
    return SymmetricMatrix.from_dense(m)


@njit(cache=True)
def _rotate_all(a, w, want_vectors, sweep):
    """One cyclic-by-row Jacobi sweep over every (p, q), p < q, in place.

    Only rows p and q are read; symmetry supplies the column update. ``w``
    holds the eigenvectors as rows.
    """
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            app = a[p, p]
            aqq = a[q, q]
            g = 100.0 * abs(apq)
            if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                # below rounding of both diagonal entries: annihilate without rotating
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            theta = (aqq - app) / (2.0 * apq)
            t = 1.0 / (abs(theta) + math.hypot(theta, 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / math.hypot(t, 1.0)
            s = t * c
            # rotate rows p and q (contiguous), then mirror into the columns
            ap = a[p]
            aq = a[q]
            for r in range(n):
                arp = ap[r]
                arq = aq[r]
                ap[r] = c * arp - s * arq
                aq[r] = s * arp + c * arq
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            for r in range(n):
                a[r, p] = a[p, r]
                a[r, q] = a[q, r]
            if want_vectors:
                wp = w[p]
                wq = w[q]
                for r in range(n):
                    x = wp[r]
                    y = wq[r]
                    wp[r] = c * x - s * y
                    wq[r] = s * x + c * y


@njit(cache=True)
def _off_norm(a):
    n = a.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return math.sqrt(acc)


def _jacobi(a: np.ndarray, want_vectors: bool = True):
    """Cyclic Jacobi on a copy of a dense symmetric array.

    Stops once the off-diagonal Frobenius mass is at most
    ``JACOBI_OFF_TOL * ||A||_F``; raises after ``JACOBI_MAX_SWEEPS``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    w = np.eye(n)
    fro = np.linalg.norm(a)
    if n == 1 or fro == 0.0:
        return np.diag(a).copy(), w.T, 0
    target = JACOBI_OFF_TOL * fro
    for sweep in range(JACOBI_MAX_SWEEPS):
        if _off_norm(a) <= target:
            return np.diag(a).copy(), w.T, sweep
        _rotate_all(a, w, want_vectors, sweep)
    off = _off_norm(a)
    if off <= target:
        return np.diag(a).copy(), w.T, JACOBI_MAX_SWEEPS
    raise ConvergenceError(
        f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps "
        f"(off-diagonal mass {off:.3e} > {target:.3e})"
    )


def eigenvalues(m, tol: float = DEFAULT_TOL) -> Spectrum:
    """All eigenvalues of a symmetric matrix, sorted descending.

    Raises ConvergenceError if Jacobi exceeds its sweep cap or if any
    eigenpair residual ``||A v - lam v||`` exceeds ``tol * ||A||``.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    sm = _as_symmetric(m)
    a = sm.dense
    lam, vecs, _ = _jacobi(a)
    order = np.argsort(lam, kind="stable")[::-1]
    lam, vecs = lam[order], vecs[:, order]
    scale = max(float(np.max(np.abs(lam))), np.finfo(float).tiny)
    resid = np.linalg.norm(a @ vecs - vecs * lam, axis=0)
    worst = float(np.max(resid)) / scale
    if worst > tol:
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds tolerance {tol:.3e}")
    return Spectrum(lam, worst)


def min_eigenvalue(m, tol: float = DEFAULT_TOL) -> float:
    return eigenvalues(m, tol).smallest


def condition_number(spectrum: Spectrum, tol: float = DEFAULT_TOL) -> float:
    """``lambda_1 / lambda_N``; infinite when ``lambda_N <= tol``."""
    if spectrum.smallest <= tol:
        return math.inf
    return spectrum.largest / spectrum.smallest


def gershgorin_intervals(m) -> list[tuple[float, float]]:
    """(center, radius) per row: ``A_ii`` and the absolute off-diagonal row sum."""
    a = _as_symmetric(m).dense
    d = np.diag(a)
    radii = np.sum(np.abs(a), axis=1) - np.abs(d)
    return [(float(c), float(r)) for c, r in zip(d, np.maximum(radii, 0.0))]


def cholesky(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises NotPositiveDefiniteError naming the first pivot that is not
    above ``tol``.
    """
    a = _as_symmetric(m).to_dense()
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if not pivot > tol:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite: pivot {j} equals {pivot:.3e}", pivot=j
            )
        ljj = math.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / ljj
    return low


def validate_correlation(m, tol: float = DEFAULT_TOL) -> ValidityReport:
    sm = _as_symmetric(m)
    a = sm.dense
    unit = bool(np.all(np.abs(np.diag(a) - 1.0) <= tol))
    in_range = bool(np.all(np.abs(a) <= 1.0 + tol))
    spec = eigenvalues(sm, tol)
    lam_min = spec.smallest
    return ValidityReport(
        unit_diagonal=unit,
        entries_in_range=in_range,
        min_eigenvalue=lam_min,
        positive_semidefinite=lam_min >= -tol,
        condition_number=condition_number(spec, tol),
        max_eigenvalue=spec.largest,
    )
