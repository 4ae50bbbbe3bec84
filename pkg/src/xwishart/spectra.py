"""Eigenvalue extraction, empirical densities and separated-eigenvalue stats."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

from . import ensemble as _ensemble
from .corr_models import PartitionedCorrelation
from .errors import ConvergenceFailure, EmptyInput, NonSymmetricInput, ParameterOutOfRange

__all__ = [
    "DensityCurve",
    "OutlierStats",
    "bulk_edge_from_curve",
    "eigenvalues_sym",
    "empirical_density",
    "load_curve_csv",
    "outlier_stats",
    "pooled_quantile_edge",
    "save_curve_csv",
    "save_eigenvalues_csv",
    "separation_counts",
    "simulate_eigenvalues",
    "strip_largest",
]

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class DensityCurve:
    """A spectral density sampled on a strictly increasing grid.

    ``origin`` is "empirical" or "theory".  Empirical curves keep their
    histogram ``bin_edges`` so the normalization integral is the exact
    bin sum; theory curves integrate by the trapezoid rule.  ``norm_tol``
    is the declared tolerance on integral() == 1.
    """

    grid: np.ndarray
    rho: np.ndarray
    origin: str
    norm_tol: float
    n_effective: int | None = None
    bin_edges: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if grid.ndim != 1 or grid.shape != rho.shape or grid.size < 2:
            raise ParameterOutOfRange("grid and rho must be equal-length 1-d arrays (>= 2 points)")
        if np.any(np.diff(grid) <= 0):
            raise ParameterOutOfRange("grid must be strictly increasing")
        if np.any(rho < 0):
            raise ParameterOutOfRange("density values must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "rho", rho)
        grid.setflags(write=False)
        rho.setflags(write=False)
        if self.bin_edges is not None:
            edges = np.asarray(self.bin_edges, dtype=float)
            edges.setflags(write=False)
            object.__setattr__(self, "bin_edges", edges)

    def integral(self) -> float:
        if self.bin_edges is not None:
            return float(np.sum(self.rho * np.diff(self.bin_edges)))
        return float(np.trapezoid(self.rho, self.grid))


@dataclass(frozen=True)
class OutlierStats:
    """Sample statistics of the largest eigenvalue across an ensemble."""

    values: np.ndarray
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    separation_gap: float

    @property
    def separated(self) -> bool:
        """True when every realization's maximum lies above the bulk edge."""
        return self.separation_gap > 0.0

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "separation_gap": self.separation_gap,
            "separated": self.separated,
            "n_values": int(self.values.size),
        }


def eigenvalues_sym(mat: np.ndarray, check_residual: bool = True) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    Verifies the decomposition by reconstruction: the relative Frobenius
    residual of v diag(w) v.T against the input must stay below 1e-9.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NonSymmetricInput(f"expected a square matrix, got shape {mat.shape}")
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise NonSymmetricInput("matrix is not symmetric")
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigendecomposition failed: {exc}") from exc
    if check_residual:
        norm = np.linalg.norm(mat)
        if norm > 0:
            residual = np.linalg.norm((v * w) @ v.T - mat) / norm
            if residual > 1e-9:
                raise ConvergenceFailure(
                    f"eigendecomposition reconstruction residual {residual:.3e} exceeds 1e-9"
                )
    return w


def _as_2d(all_eigs) -> np.ndarray:
    arr = np.asarray(all_eigs, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no eigenvalues provided")
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ParameterOutOfRange("expected a realization-by-eigenvalue array")
    return arr


def empirical_density(all_eigs, bins: int | np.ndarray | None = None) -> DensityCurve:
    """Histogram density of pooled eigenvalues, normalized to unit mass.

    ``bins`` may be an integer count, explicit edges, or None for the
    Freedman-Diaconis rule (never fewer than 10 bins).
    """
    arr = _as_2d(all_eigs)
    pooled = arr.ravel()
    if bins is None:
        bins = _fd_bin_count(pooled)
    elif isinstance(bins, (int, np.integer)):
        if bins < 1:
            raise ParameterOutOfRange(f"bin count must be >= 1, got {bins}")
    else:
        bins = np.asarray(bins, dtype=float)
        if bins.ndim != 1 or bins.size < 2 or np.any(np.diff(bins) <= 0):
            raise ParameterOutOfRange("bin edges must be a strictly increasing 1-d array")
    rho, edges = np.histogram(pooled, bins=bins, density=True)
    grid = 0.5 * (edges[:-1] + edges[1:])
    return DensityCurve(grid=grid, rho=rho, origin="empirical", norm_tol=1e-12,
                        n_effective=int(pooled.size), bin_edges=edges)


def _fd_bin_count(pooled: np.ndarray) -> int:
    span = float(pooled.max() - pooled.min())
    if span == 0.0:
        return 10
    q75, q25 = np.percentile(pooled, [75, 25])
    width = 2.0 * (q75 - q25) * pooled.size ** (-1.0 / 3.0)
    if width <= 0.0:
        return 10
    return max(10, int(np.ceil(span / width)))


def strip_largest(all_eigs) -> np.ndarray:
    """Drop the largest eigenvalue of each realization (rows must be sorted)."""
    arr = _as_2d(all_eigs)
    if arr.shape[1] < 2:
        raise EmptyInput("cannot strip the largest eigenvalue of 1x1 spectra")
    if np.any(np.diff(arr, axis=1) < 0):
        raise ParameterOutOfRange("realizations must be sorted ascending")
    return arr[:, :-1]


def outlier_stats(all_eigs, bulk_edge: float) -> OutlierStats:
    """Per-realization maxima and their sample moments.

    ``separation_gap`` is min(maxima) - bulk_edge; nonpositive values flag
    realizations whose maximum stayed inside the bulk.
    """
    arr = _as_2d(all_eigs)
    values = arr.max(axis=1)
    variance = float(values.var(ddof=1)) if values.size > 1 else 0.0
    if values.size > 2 and variance > 0.0:
        skewness = float(_stats.skew(values, bias=False))
        excess_kurtosis = float(_stats.kurtosis(values, fisher=True, bias=False))
    else:
        skewness = 0.0
        excess_kurtosis = 0.0
    return OutlierStats(
        values=values,
        mean=float(values.mean()),
        variance=variance,
        skewness=skewness,
        excess_kurtosis=excess_kurtosis,
        separation_gap=float(values.min() - bulk_edge),
    )


def separation_counts(all_eigs, bulk_edge: float) -> np.ndarray:
    """Number of eigenvalues above the bulk edge, per realization."""
    return (_as_2d(all_eigs) > bulk_edge).sum(axis=1)


def bulk_edge_from_curve(curve: DensityCurve, threshold: float = 1e-6) -> float:
    """Largest grid point whose density exceeds the threshold."""
    above = curve.grid[curve.rho > threshold]
    if above.size == 0:
        raise EmptyInput("density curve never exceeds the threshold")
    return float(above[-1])


def pooled_quantile_edge(all_eigs, q: float = 0.999) -> float:
    """Empirical fallback bulk edge: a high quantile of the pooled eigenvalues."""
    return float(np.quantile(_as_2d(all_eigs).ravel(), q))


def simulate_eigenvalues(
    corr: PartitionedCorrelation,
    cfg: _ensemble.EnsembleConfig,
    n_jobs: int = 1,
) -> np.ndarray:
    """Eigenvalues (ascending) of every ensemble realization, one row each.

    Rows are indexed by stream and therefore independent of the number of
    worker threads.
    """
    out = np.empty((cfg.n_samples, cfg.n))

    def work(k: int) -> None:
        pair = _ensemble.realization(corr, cfg, k)
        out[k] = eigenvalues_sym(pair.c_matrix)

    if n_jobs <= 1:
        for k in range(cfg.n_samples):
            work(k)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(work, range(cfg.n_samples)))
    return out


def save_eigenvalues_csv(all_eigs, path) -> None:
    """One row per realization, eigenvalues ascending."""
    np.savetxt(path, _as_2d(all_eigs), fmt=_FLOAT_FMT, delimiter=",")


def save_curve_csv(curve: DensityCurve, path) -> None:
    data = np.column_stack([curve.grid, curve.rho])
    np.savetxt(path, data, fmt=_FLOAT_FMT, delimiter=",", header="lambda,rho", comments="")


def load_curve_csv(path, origin: str = "theory", norm_tol: float = 1e-3) -> DensityCurve:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return DensityCurve(grid=data[:, 0], rho=data[:, 1], origin=origin, norm_tol=norm_tol)
