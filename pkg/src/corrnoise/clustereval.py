"""Clustering sensitivity analysis on generated correlation matrices.

PAM (k-medoids, BUILD + SWAP) on ``1 - correlation`` dissimilarities, k
chosen by average silhouette width, agreement with the truth measured by
the adjusted Rand index.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .noise import NoiseSpec, apply_noise, noise_matrix, perturb
from .spectra import SymmetricMatrix, eigenvalues
from .templates import CorrelationTemplate, GroupSpec, Kind, build_template, hub_uncertified_reason

DEFAULT_K_MAX = 10
IRIS_SHA256 = "91eb642c3adbc7bad8e99c930c11fa3a5cc8a07262c7a753b4e6ecf405f2e05e"


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.values, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ParameterError("dissimilarities must form a square matrix")
        if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
            raise ParameterError("dissimilarities must be symmetric, nonnegative, zero on the diagonal")
        object.__setattr__(self, "values", d)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Partition:
    """Cluster labels ``1..k`` for each point."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ParameterError("empty partition")
        if min(labels) < 1 or set(labels) != set(range(1, max(labels) + 1)):
            raise ParameterError("labels must be exactly 1..k")

    @classmethod
    def from_any(cls, labels: Sequence) -> Partition:
        """Relabel arbitrary hashable labels to ``1..k`` in order of first appearance."""
        mapping: dict = {}
        return cls(tuple(mapping.setdefault(x, len(mapping) + 1) for x in labels))

    @property
    def k(self) -> int:
        return max(self.labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def array(self) -> np.ndarray:
        return np.asarray(self.labels)


@dataclass(frozen=True)
class PamResult:
    partition: Partition
    medoids: tuple[int, ...]
    cost: float
    swaps: int
    cost_trace: tuple[float, ...] = ()


@dataclass
class ScenarioResult:
    chosen_k: list[int]
    adjusted_rand: list[float]
    name: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def min_k(self) -> int:
        return int(min(self.chosen_k))

    @property
    def median_k(self) -> float:
        return float(np.median(self.chosen_k))

    @property
    def max_k(self) -> int:
        return int(max(self.chosen_k))

    @property
    def median_adjusted_rand(self) -> float:
        return float(np.median(self.adjusted_rand))

    def summary(self) -> dict:
        return {
            "scenario": self.name,
            "min_k": self.min_k,
            "median_k": self.median_k,
            "max_k": self.max_k,
            "median_adj_rand": self.median_adjusted_rand,
        }


def correlation_to_dissimilarity(s) -> DissimilarityMatrix:
    """``d_ij = 1 - s_ij`` clamped to [0, 2], zero diagonal."""
    a = s.dense if isinstance(s, SymmetricMatrix) else np.asarray(s, dtype=float)
    d = np.clip(1.0 - a, 0.0, 2.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DissimilarityMatrix(d)


def _as_array(d) -> np.ndarray:
    return d.values if isinstance(d, DissimilarityMatrix) else np.asarray(d, dtype=float)


def _assign(d: np.ndarray, medoids: np.ndarray):
    """Nearest medoid (ties to the lower medoid index) and second-nearest distances."""
    order = np.sort(medoids)
    dm = d[:, order]
    nearest = np.argmin(dm, axis=1)
    # a medoid always belongs to its own cluster, even when it duplicates another point
    nearest[order] = np.arange(len(order))
    d1 = dm[np.arange(len(d)), nearest]
    if len(order) > 1:
        dm2 = dm.copy()
        dm2[np.arange(len(d)), nearest] = np.inf
        d2 = dm2.min(axis=1)
    else:
        d2 = np.full(len(d), np.inf)
    return order, nearest, d1, d2


def pam(d, k: int, max_swaps: int = 10_000) -> PamResult:
    """Partitioning Around Medoids.

    BUILD adds, one at a time, the point that most reduces total
    dissimilarity; SWAP applies the best strictly improving
    (medoid, non-medoid) exchange until none remains. Ties go to the lowest
    index throughout, so the result is deterministic.
    """
    a = _as_array(d)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    scale = max(float(a.max()), 1.0)
    tol = 1e-12 * scale * n

    first = int(np.argmin(a.sum(axis=1)))
    medoids = [first]
    d1 = a[first].copy()
    for _ in range(1, k):
        gain = np.maximum(d1[None, :] - a, 0.0).sum(axis=1)
        gain[medoids] = -np.inf
        h = int(np.argmax(gain))
        medoids.append(h)
        d1 = np.minimum(d1, a[h])

    med = np.array(sorted(medoids))
    order, nearest, d1, d2 = _assign(a, med)
    trace = [float(d1.sum())]
    swaps = 0
    while swaps < max_swaps and k < n:
        # delta[i, h]: cost change when medoid order[i] is replaced by point h
        base = (np.minimum(d1[None, :], a) - d1[None, :]).sum(axis=1)
        extra = np.minimum(d2[None, :], a) - np.minimum(d1[None, :], a)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), nearest] = 1.0
        delta = base[None, :] + (extra @ onehot).T
        delta[:, order] = np.inf
        best = int(np.argmin(delta))
        i, h = divmod(best, n)
        if not delta[i, h] < -tol:
            break
        med = order.copy()
        med[i] = h
        order, nearest, d1, d2 = _assign(a, med)
        swaps += 1
        trace.append(float(d1.sum()))
    labels = nearest + 1
    return PamResult(Partition(tuple(labels)), tuple(int(x) for x in order), float(d1.sum()), swaps, tuple(trace))


def medoid_cost(d, medoids: Sequence[int]) -> float:
    a = _as_array(d)
    return float(a[:, list(medoids)].min(axis=1).sum())


def silhouette_width(d, p: Partition) -> float:
    """Average silhouette; singletons score 0 and ``a = b = 0`` scores 0."""
    a = _as_array(d)
    if p.n != a.shape[0]:
        raise ParameterError("partition length does not match dissimilarity size")
    if p.k < 2:
        raise ParameterError("silhouette width needs at least two clusters")
    return float(np.mean(silhouette_samples(a, p)))


def silhouette_samples(d, p: Partition) -> np.ndarray:
    a = _as_array(d)
    lab = p.array() - 1
    n, k = len(lab), p.k
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    sizes = onehot.sum(axis=0)
    if np.any(sizes == 0):
        raise ParameterError("every cluster must be nonempty")
    sums = a @ onehot
    own = sums[np.arange(n), lab]
    own_size = sizes[lab]
    with np.errstate(invalid="ignore", divide="ignore"):
        within = own / (own_size - 1)
        means = sums / sizes
    means[np.arange(n), lab] = np.inf
    between = means.min(axis=1)
    denom = np.maximum(within, between)
    s = np.where(denom > 0, (between - within) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own_size == 1] = 0.0
    return s


def choose_k(d, k_max: int = DEFAULT_K_MAX) -> tuple[int, Partition]:
    """PAM for k = 2..k_max; keep the k with the largest average silhouette.

    Ties go to the smaller k.
    """
    a = _as_array(d)
    n = a.shape[0]
    if not 2 <= k_max <= n - 1:
        raise ParameterError(f"need 2 <= k_max <= n - 1, got k_max={k_max}, n={n}")
    best_k, best_p, best_s = 0, None, -math.inf
    for k in range(2, k_max + 1):
        part = pam(a, k).partition
        s = silhouette_width(a, part)
        if s > best_s + 1e-12:
            best_k, best_p, best_s = k, part, s
    return best_k, best_p


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def adjusted_rand(p: Partition, q: Partition) -> float:
    """Hubert-Arabie adjusted Rand index; 1 when both partitions are trivially equal."""
    if p.n != q.n:
        raise ParameterError("partitions differ in length")
    cont = np.zeros((p.k, q.k))
    np.add.at(cont, (p.array() - 1, q.array() - 1), 1)
    sum_ij = _comb2(cont).sum()
    sum_a = _comb2(cont.sum(axis=1)).sum()
    sum_b = _comb2(cont.sum(axis=0)).sum()
    total = _comb2(p.n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    num = sum_ij - expected
    if denom == 0:
        return 1.0 if num == 0 else 0.0
    return float(num / denom)


def truth_partition(t: CorrelationTemplate) -> Partition:
    return Partition(tuple(int(x) for x in t.labels))


def run_scenario(
    t: CorrelationTemplate,
    spec: NoiseSpec,
    truth: Optional[Partition] = None,
    replicates: int = 100,
    k_max: int = DEFAULT_K_MAX,
    name: str = "",
    start: int = 0,
) -> ScenarioResult:
    """Generate, cluster and score ``replicates`` noisy matrices."""
    truth = truth or truth_partition(t)
    if truth.n != t.n:
        raise ParameterError("truth length must equal template size")
    if replicates < 1:
        raise ParameterError("replicates must be positive")
    lambda_n = None
    if t.kind is Kind.HUB and hub_uncertified_reason(t):
        lambda_n = eigenvalues(build_template(t)).smallest
    ks, ars = [], []
    for r in range(start, start + replicates):
        s = perturb(t, spec, r, lambda_n=lambda_n)
        k, part = choose_k(correlation_to_dissimilarity(s), k_max)
        ks.append(k)
        ars.append(adjusted_rand(part, truth))
    return ScenarioResult(ks, ars, name)


# rho_max -> rho_min per group, noise dimension, epsilon; group sizes (100, 50, 80)
HTC_SCENARIOS = {
    "hTC1": (((0.7, 0.0), (0.7, 0.0), (0.4, 0.0)), 2, 0.23),
    "hTC2": (((0.7, 0.5), (0.7, 0.6), (0.4, 0.2)), 2, 0.29),
    "hTC3": (((0.7, 0.5), (0.7, 0.6), (0.4, 0.2)), 25, 0.29),
    "hTC4": (((0.7, 0.5), (0.7, 0.6), (0.4, 0.2)), 2, 0.10),
    "hTC5": (((0.7, 0.5), (0.7, 0.6), (0.4, 0.2)), 2, 0.25),
    "hTC6": (((0.8, 0.0), (0.75, 0.0), (0.7, 0.0)), 2, 0.19),
}
HTC_SIZES = (100, 50, 80)


def htc_scenario(name: str, seed: int = 0) -> tuple[CorrelationTemplate, NoiseSpec]:
    try:
        ranges, m, eps = HTC_SCENARIOS[name]
    except KeyError:
        raise ParameterError(f"unknown scenario {name!r}; choose from {sorted(HTC_SCENARIOS)}") from None
    t = CorrelationTemplate(tuple(GroupSpec.hub(g, hi, lo) for g, (hi, lo) in zip(HTC_SIZES, ranges)))
    return t, NoiseSpec(eps, m, seed=seed)


# --- iris -----------------------------------------------------------------

IRIS_COLUMNS = ("sepal_length", "sepal_width", "petal_length", "petal_width", "species")


@dataclass(frozen=True)
class ObservationTable:
    values: np.ndarray = field(repr=False)
    species: tuple[str, ...]


def load_iris(path=None) -> ObservationTable:
    """Read the bundled iris CSV (or ``path``) into measurements and species."""
    if path is None:
        text = resources.files("corrnoise.data").joinpath("iris.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != IRIS_COLUMNS:
        raise ParameterError(f"iris table must have header {','.join(IRIS_COLUMNS)}")
    try:
        values = np.array([[float(x) for x in r[:4]] for r in rows[1:]])
        species = tuple(r[4] for r in rows[1:])
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"malformed iris row: {exc}") from None
    return ObservationTable(values, species)


def iris_sha256() -> str:
    data = resources.files("corrnoise.data").joinpath("iris.csv").read_bytes()
    return hashlib.sha256(data).hexdigest()


def observation_correlation(table: ObservationTable, standardize: bool = False) -> SymmetricMatrix:
    """Pearson correlation between observations across their measurements.

    The iris measurements share one unit (mm) and are used as-is by
    default; ``standardize=True`` z-scores each measurement column first.
    """
    x = np.asarray(table.values, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ParameterError("need at least two measurement columns")
    z = x
    if standardize:
        sd = x.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise ParameterError("cannot standardize a constant measurement column")
        z = (x - x.mean(axis=0)) / sd
    zc = z - z.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(zc, axis=1)
    if np.any(norms == 0):
        raise ParameterError("an observation has identical standardized measurements")
    u = zc / norms[:, None]
    r = np.clip(u @ u.T, -1.0, 1.0)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return SymmetricMatrix.from_dense(r)


def two_species_truth(species: Sequence[str]) -> Partition:
    """setosa versus the merged versicolor/virginica group."""
    return Partition(tuple(1 if s.lower().endswith("setosa") else 2 for s in species))


def iris_scenario(
    table: ObservationTable,
    spec: Optional[NoiseSpec] = None,
    replicates: int = 1,
    k_max: int = DEFAULT_K_MAX,
    name: str = "iris",
) -> ScenarioResult:
    """Cluster the iris observation-correlation matrix, optionally perturbed.

    The 150 x 150 matrix has rank at most 3, so ``lambda_N = 0`` and no
    positive noise level is admissible for the general recipe. In that case
    the perturbation ``Sigma + eps (E - I)`` is still applied without any
    projection, the replicate is clustered as-is, and the infeasibility is
    recorded in ``notes``.
    """
    if table.values.ndim != 2 or len(table.species) != table.values.shape[0]:
        raise ParameterError("malformed iris table")
    sigma = observation_correlation(table)
    truth = two_species_truth(table.species)
    d0 = correlation_to_dissimilarity(sigma)
    notes: list[str] = []
    if spec is None or spec.epsilon == 0:
        k, part = choose_k(d0, k_max)
        ar = adjusted_rand(part, truth)
        return ScenarioResult([k] * replicates, [ar] * replicates, name, notes)
    lam_n = eigenvalues(sigma).smallest
    if not spec.epsilon < lam_n:
        notes.append(
            f"infeasible: epsilon={spec.epsilon:.6g} >= lambda_N={lam_n:.3g}; "
            "noise applied without projection, replicates may be indefinite"
        )
    ks, ars = [], []
    for r in range(replicates):
        s = apply_noise(sigma.dense, noise_matrix(spec, sigma.n, r), spec.epsilon)
        k, part = choose_k(correlation_to_dissimilarity(s), k_max)
        ks.append(k)
        ars.append(adjusted_rand(part, truth))
    return ScenarioResult(ks, ars, name, notes)
