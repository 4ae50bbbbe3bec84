"""Monte Carlo sampling of correlated data blocks and the product matrices.

One realization draws an (n+m) x t standard normal matrix, colors it with
the symmetric square root of the assembled correlation matrix, splits it
into the raw blocks, decorrelates each block with the inverse square root
of its diagonal correlation, and forms::

    c = (a @ b.T / t) @ (a @ b.T / t).T        (n x n)
    d = (a @ b.T / t).T @ (a @ b.T / t)        (m x m)

Every realization is addressed by (seed, stream_index) through an
independent counter-derived RNG stream, so ensembles are reproducible
under any parallel schedule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .corr_models import PartitionedCorrelation
from .errors import DimensionMismatch, ParameterOutOfRange

__all__ = [
    "EnsembleConfig",
    "IdentityCheck",
    "IdentityKind",
    "RealizationPair",
    "build_c",
    "cross_gram",
    "decorrelate",
    "decorrelated_cross_gram",
    "ensemble_c_mean",
    "mc_identity_check",
    "realization",
    "realization_from_cross",
    "sample_colored",
    "stream_rng",
]


@dataclass(frozen=True)
class EnsembleConfig:
    """Dimensions, ensemble size and RNG seed of a simulation."""

    n: int
    m: int
    t: int
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterOutOfRange(f"n must be >= 1, got {self.n}")
        if self.m < self.n:
            raise ParameterOutOfRange(f"need m >= n, got n={self.n}, m={self.m}")
        if self.t < self.m:
            raise ParameterOutOfRange(f"need t >= m, got m={self.m}, t={self.t}")
        if self.n_samples < 1:
            raise ParameterOutOfRange(f"n_samples must be >= 1, got {self.n_samples}")
        if not (0 <= self.seed < 2**64):
            raise ParameterOutOfRange(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def kappa_n(self) -> float:
        return self.n / self.t

    @property
    def kappa_m(self) -> float:
        return self.m / self.t


@dataclass(frozen=True)
class RealizationPair:
    """One realization of the n x n product matrix, optionally with its m x m twin."""

    c_matrix: np.ndarray
    d_matrix: np.ndarray | None = None


def stream_rng(seed: int, stream_index: int) -> np.random.Generator:
    """Independent generator for one ensemble member.

    Streams are derived from (seed, stream_index) via SeedSequence spawn
    keys: reordering or parallelizing streams cannot change any stream's
    output.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_index,))))


def sample_colored(
    corr: PartitionedCorrelation, cfg: EnsembleConfig, stream_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the two raw (still cross- and block-correlated) data blocks.

    Returns the n x t and m x t blocks of xi^{1/2} @ W with W i.i.d.
    standard normal.  Deterministic given (cfg.seed, stream_index).
    """
    if (corr.n, corr.m) != (cfg.n, cfg.m):
        raise DimensionMismatch(
            f"model is ({corr.n}, {corr.m}) but config is ({cfg.n}, {cfg.m})"
        )
    rng = stream_rng(cfg.seed, stream_index)
    white = rng.standard_normal((corr.n + corr.m, cfg.t))
    colored = corr.xi_sqrt @ white
    return colored[: corr.n], colored[corr.n :]


def decorrelate(
    corr: PartitionedCorrelation, raw_a: np.ndarray, raw_b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Remove within-block correlations from the raw blocks.

    Left-multiplies by the inverse square roots of the diagonal blocks;
    the cross-correlation eta survives.
    """
    if raw_a.shape[0] != corr.n or raw_b.shape[0] != corr.m:
        raise DimensionMismatch(
            f"raw blocks have {raw_a.shape[0]} and {raw_b.shape[0]} rows, "
            f"model expects {corr.n} and {corr.m}"
        )
    if raw_a.shape[1] != raw_b.shape[1]:
        raise DimensionMismatch("raw blocks disagree on the time dimension")
    return corr.xi_aa_inv_sqrt @ raw_a, corr.xi_bb_inv_sqrt @ raw_b


def cross_gram(a: np.ndarray, b: np.ndarray, t: int) -> np.ndarray:
    """The n x m scaled cross product a @ b.T / t."""
    if a.shape[1] != t or b.shape[1] != t:
        raise DimensionMismatch(
            f"blocks have time lengths {a.shape[1]} and {b.shape[1]}, expected {t}"
        )
    return a @ b.T / t


def decorrelated_cross_gram(
    corr: PartitionedCorrelation, raw_a: np.ndarray, raw_b: np.ndarray, t: int
) -> np.ndarray:
    """Decorrelate the cross product instead of the stored blocks.

    Sandwiches the raw cross product between the two inverse square roots;
    algebraically identical to cross_gram(*decorrelate(...)) and kept as
    the independent path for testing.
    """
    return corr.xi_aa_inv_sqrt @ cross_gram(raw_a, raw_b, t) @ corr.xi_bb_inv_sqrt


def build_c(a: np.ndarray, b: np.ndarray, t: int, with_d: bool = False) -> RealizationPair:
    """Form the symmetric product matrices from decorrelated blocks.

    Both outputs are explicitly symmetrized after construction so that
    symmetric eigensolver contracts hold exactly.
    """
    s = cross_gram(a, b, t)
    c = s @ s.T
    c = 0.5 * (c + c.T)
    d = None
    if with_d:
        d = s.T @ s
        d = 0.5 * (d + d.T)
    return RealizationPair(c_matrix=c, d_matrix=d)


def realization(
    corr: PartitionedCorrelation, cfg: EnsembleConfig, stream_index: int, with_d: bool = False
) -> RealizationPair:
    """Full chain for one ensemble member: sample, decorrelate, build."""
    raw_a, raw_b = sample_colored(corr, cfg, stream_index)
    a, b = decorrelate(corr, raw_a, raw_b)
    return build_c(a, b, cfg.t, with_d=with_d)


def realization_from_cross(
    corr: PartitionedCorrelation, cfg: EnsembleConfig, stream_index: int, with_d: bool = False
) -> RealizationPair:
    """Alternate chain that decorrelates the cross product directly."""
    raw_a, raw_b = sample_colored(corr, cfg, stream_index)
    s = decorrelated_cross_gram(corr, raw_a, raw_b, cfg.t)
    c = s @ s.T
    c = 0.5 * (c + c.T)
    d = None
    if with_d:
        d = s.T @ s
        d = 0.5 * (d + d.T)
    return RealizationPair(c_matrix=c, d_matrix=d)


def ensemble_c_mean(corr: PartitionedCorrelation, cfg: EnsembleConfig) -> np.ndarray:
    """Sample mean of the n x n product matrix over the configured ensemble."""
    acc = np.zeros((cfg.n, cfg.n))
    for k in range(cfg.n_samples):
        acc += realization(corr, cfg, k).c_matrix
    return acc / cfg.n_samples


class IdentityKind(str, enum.Enum):
    """The six exact Gaussian-average identities used as Monte Carlo oracles.

    With <.>_k the normalized trace, the closed forms are::

        AA_SANDWICH      (1/t) <a phi a.T psi>_n   = <phi>_t <psi>_n
        AA_NO_TRANSPOSE  <a phi a psi>_n           = <phi.T psi>_n
        AA_SPLIT         <a phi>_n <psi a.T>_n     = (1/n) <psi phi>_n
        AA_SPLIT_SAME    <a phi>_n <a psi>_n       = (1/n) <psi.T phi>_n
        AB_CROSS         (1/t) <a phi b.T psi>_n   = <phi>_t <eta psi>_n
        BA_CROSS         (1/t) <b phi a.T psi>_m   = <phi>_t <eta.T psi>_m
    """

    AA_SANDWICH = "aa_sandwich"
    AA_NO_TRANSPOSE = "aa_no_transpose"
    AA_SPLIT = "aa_split"
    AA_SPLIT_SAME = "aa_split_same"
    AB_CROSS = "ab_cross"
    BA_CROSS = "ba_cross"


@dataclass(frozen=True)
class IdentityCheck:
    """Monte Carlo estimate of an identity's left side against its closed form."""

    kind: IdentityKind
    lhs_mean: float
    rhs_exact: float
    std_error: float
    z_score: float
    n_samples: int


_IDENTITY_SHAPES = {
    IdentityKind.AA_SANDWICH: lambda n, m, t: ((t, t), (n, n)),
    IdentityKind.AA_NO_TRANSPOSE: lambda n, m, t: ((t, n), (t, n)),
    IdentityKind.AA_SPLIT: lambda n, m, t: ((t, n), (n, t)),
    IdentityKind.AA_SPLIT_SAME: lambda n, m, t: ((t, n), (t, n)),
    IdentityKind.AB_CROSS: lambda n, m, t: ((t, t), (m, n)),
    IdentityKind.BA_CROSS: lambda n, m, t: ((t, t), (n, m)),
}


def identity_shapes(kind: IdentityKind, n: int, m: int, t: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Required (phi, psi) shapes for an identity at the given dimensions."""
    return _IDENTITY_SHAPES[IdentityKind(kind)](n, m, t)


def _identity_rhs(kind, phi, psi, corr, n, m, t) -> float:
    if kind is IdentityKind.AA_SANDWICH:
        return np.trace(phi) / t * np.trace(psi) / n
    if kind is IdentityKind.AA_NO_TRANSPOSE:
        return np.trace(phi.T @ psi) / n
    if kind is IdentityKind.AA_SPLIT:
        return np.trace(psi @ phi) / n**2
    if kind is IdentityKind.AA_SPLIT_SAME:
        return np.trace(psi.T @ phi) / n**2
    if kind is IdentityKind.AB_CROSS:
        return np.trace(phi) / t * np.trace(corr.eta @ psi) / n
    if kind is IdentityKind.BA_CROSS:
        return np.trace(phi) / t * np.trace(corr.eta.T @ psi) / m
    raise ParameterOutOfRange(f"unknown identity kind {kind!r}")


def _identity_statistic(kind, phi, psi, a, b, n, m, t) -> float:
    if kind is IdentityKind.AA_SANDWICH:
        return np.trace(a @ phi @ a.T @ psi) / (t * n)
    if kind is IdentityKind.AA_NO_TRANSPOSE:
        return np.trace(a @ phi @ a @ psi) / n
    if kind is IdentityKind.AA_SPLIT:
        return np.trace(a @ phi) / n * np.trace(psi @ a.T) / n
    if kind is IdentityKind.AA_SPLIT_SAME:
        return np.trace(a @ phi) / n * np.trace(a @ psi) / n
    if kind is IdentityKind.AB_CROSS:
        return np.trace(a @ phi @ b.T @ psi) / (t * n)
    if kind is IdentityKind.BA_CROSS:
        return np.trace(b @ phi @ a.T @ psi) / (t * m)
    raise ParameterOutOfRange(f"unknown identity kind {kind!r}")


def mc_identity_check(
    kind: IdentityKind,
    phi: np.ndarray,
    psi: np.ndarray,
    corr: PartitionedCorrelation,
    cfg: EnsembleConfig,
) -> IdentityCheck:
    """Estimate one identity's left side by Monte Carlo and score it.

    The z-score is (estimate - exact) / standard error of the mean; the
    identities are exact at any finite dimension, so |z| is asymptotically
    standard normal.
    """
    kind = IdentityKind(kind)
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    expected = identity_shapes(kind, cfg.n, cfg.m, cfg.t)
    if (phi.shape, psi.shape) != expected:
        raise DimensionMismatch(
            f"identity {kind.value} needs phi {expected[0]} and psi {expected[1]}, "
            f"got {phi.shape} and {psi.shape}"
        )
    rhs = float(_identity_rhs(kind, phi, psi, corr, cfg.n, cfg.m, cfg.t))
    samples = np.empty(cfg.n_samples)
    for k in range(cfg.n_samples):
        raw_a, raw_b = sample_colored(corr, cfg, k)
        a, b = decorrelate(corr, raw_a, raw_b)
        samples[k] = _identity_statistic(kind, phi, psi, a, b, cfg.n, cfg.m, cfg.t)
    lhs = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(cfg.n_samples)) if cfg.n_samples > 1 else 0.0
    if se > 0.0:
        z = (lhs - rhs) / se
    else:
        z = 0.0 if lhs == rhs else float("inf")
    return IdentityCheck(kind=kind, lhs_mean=lhs, rhs_exact=rhs, std_error=se,
                         z_score=z, n_samples=cfg.n_samples)
