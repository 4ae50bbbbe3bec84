"""Builders and validators for the nonrandom correlation structure.

The sampling model is controlled by an (n+m) x (n+m) symmetric positive
definite matrix ``xi`` partitioned into blocks::

    xi = [[xi_aa, xi_ab],
          [xi_ab.T, xi_bb]]

with unit-diagonal SPD diagonal blocks.  The decorrelated cross block
``eta = xi_aa^{-1/2} @ xi_ab @ xi_bb^{-1/2}`` and its Gram spectrum
``zeta_eigs`` (squared singular values of eta) are what the resolvent
solver consumes.  Two concrete families are provided: a rank-one cross
block (every entry equal to c) and an exponentially decaying cross block,
both over equal-cross-correlation diagonal blocks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ModelNotPositiveDefinite, NonSymmetricInput, ParameterOutOfRange

__all__ = [
    "CrossKind",
    "EqualCrossParams",
    "PartitionedCorrelation",
    "PdCheck",
    "RankOneXiSpectrum",
    "build_custom",
    "build_equal_cross",
    "equal_cross_inv_sqrt",
    "equal_cross_matrix",
    "equal_cross_spectrum",
    "equal_cross_top_eig",
    "rank_one_xi_eigs",
    "sym_inv_sqrt",
    "validate_positive_definite",
    "zeta_rank_one_eig",
]


class CrossKind(str, enum.Enum):
    """Shape of the cross-correlation block xi_ab."""

    RANK_ONE = "rank_one"
    EXP_DECAY = "exp_decay"
    CUSTOM = "custom"


@dataclass(frozen=True)
class EqualCrossParams:
    """Parameters of the two built-in correlation families.

    ``a`` and ``b`` are the off-diagonal coefficients of the equal-cross
    diagonal blocks (n x n and m x m), ``c`` controls the cross block.
    ``c = 0`` is the uncorrelated null model and is always admissible.
    """

    n: int
    m: int
    a: float
    b: float
    c: float
    cross_kind: CrossKind = CrossKind.RANK_ONE

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterOutOfRange(f"n, m must be >= 1, got n={self.n}, m={self.m}")
        if self.m < self.n:
            raise ParameterOutOfRange(f"need m >= n, got n={self.n}, m={self.m}")
        if not (0.0 < self.a < 1.0) or not (0.0 < self.b < 1.0):
            raise ParameterOutOfRange(f"a, b must lie in (0, 1), got a={self.a}, b={self.b}")
        if not (0.0 <= self.c < 1.0):
            raise ParameterOutOfRange(f"c must lie in [0, 1), got c={self.c}")
        if self.cross_kind is CrossKind.CUSTOM:
            raise ParameterOutOfRange("cross_kind 'custom' requires build_custom with explicit blocks")


@dataclass(frozen=True)
class PdCheck:
    """Outcome of a positive-definiteness check."""

    ok: bool
    min_eigenvalue: float
    max_abs_eigenvalue: float
    threshold: float


@dataclass(frozen=True)
class RankOneXiSpectrum:
    """Closed-form spectrum of the assembled xi for the rank-one family.

    ``degenerate`` pairs each repeated eigenvalue with its multiplicity:
    (1-a, n-1) and (1-b, m-1).  ``lam_plus``/``lam_minus`` are the two
    nondegenerate eigenvalues.
    """

    lam_plus: float
    lam_minus: float
    degenerate: tuple[tuple[float, int], ...]

    def full_spectrum(self) -> np.ndarray:
        """All n+m eigenvalues, ascending."""
        vals = [self.lam_plus, self.lam_minus]
        for value, mult in self.degenerate:
            vals.extend([value] * mult)
        return np.sort(np.asarray(vals))


@dataclass(frozen=True)
class PartitionedCorrelation:
    """Immutable correlation structure consumed by the sampling layer.

    Holds the three xi blocks, the decorrelated cross block eta, the
    descending spectrum of zeta = eta @ eta.T, and the inverse square
    roots of the diagonal blocks used for decorrelation.
    """

    n: int
    m: int
    xi_aa: np.ndarray
    xi_bb: np.ndarray
    xi_ab: np.ndarray
    eta: np.ndarray
    zeta_eigs: np.ndarray
    xi_aa_inv_sqrt: np.ndarray
    xi_bb_inv_sqrt: np.ndarray
    params: EqualCrossParams | None = field(default=None, compare=False)

    def __post_init__(self):
        for arr in (self.xi_aa, self.xi_bb, self.xi_ab, self.eta,
                    self.zeta_eigs, self.xi_aa_inv_sqrt, self.xi_bb_inv_sqrt):
            arr.setflags(write=False)

    @cached_property
    def xi(self) -> np.ndarray:
        """The assembled (n+m) x (n+m) correlation matrix."""
        full = np.block([[self.xi_aa, self.xi_ab], [self.xi_ab.T, self.xi_bb]])
        full.setflags(write=False)
        return full

    @cached_property
    def xi_sqrt(self) -> np.ndarray:
        """Symmetric square root of the assembled xi (computed once)."""
        root = _sym_mat_power(self.xi, 0.5)
        root.setflags(write=False)
        return root

    def zeta(self) -> np.ndarray:
        """Dense zeta = eta @ eta.T."""
        return self.eta @ self.eta.T

    def to_json_dict(self) -> dict:
        """JSON-serializable summary: {n, m, a, b, c, cross_kind, zeta_eigs}."""
        p = self.params
        return {
            "n": self.n,
            "m": self.m,
            "a": p.a if p is not None else None,
            "b": p.b if p is not None else None,
            "c": p.c if p is not None else None,
            "cross_kind": p.cross_kind.value if p is not None else CrossKind.CUSTOM.value,
            "zeta_eigs": [float(x) for x in self.zeta_eigs],
        }


def equal_cross_matrix(k: int, coeff: float) -> np.ndarray:
    """The k x k matrix with unit diagonal and constant off-diagonal coeff."""
    _check_equal_cross_args(k, coeff)
    return (1.0 - coeff) * np.eye(k) + coeff * np.ones((k, k))


def equal_cross_top_eig(k: int, coeff: float) -> float:
    """Largest eigenvalue k*coeff + 1 - coeff of the equal-cross matrix."""
    return k * coeff + 1.0 - coeff


def equal_cross_spectrum(k: int, coeff: float) -> np.ndarray:
    """Eigenvalues of the equal-cross matrix, ascending.

    (1 - coeff) with multiplicity k-1, plus the single top eigenvalue
    k*coeff + 1 - coeff.
    """
    _check_equal_cross_args(k, coeff)
    out = np.full(k, 1.0 - coeff)
    out[-1] = equal_cross_top_eig(k, coeff)
    return out


def equal_cross_inv_sqrt(k: int, coeff: float) -> np.ndarray:
    """Closed-form inverse square root of the equal-cross matrix.

    Entrywise: delta_jk * (1-coeff)^{-1/2}
               - (1/k) * [(1-coeff)^{-1/2} - (k*coeff + 1 - coeff)^{-1/2}].
    """
    _check_equal_cross_args(k, coeff)
    lo = (1.0 - coeff) ** -0.5
    hi = equal_cross_top_eig(k, coeff) ** -0.5
    return lo * np.eye(k) - ((lo - hi) / k) * np.ones((k, k))


def _check_equal_cross_args(k: int, coeff: float) -> None:
    if k < 1:
        raise ParameterOutOfRange(f"dimension must be >= 1, got {k}")
    if not (0.0 < coeff < 1.0):
        raise ParameterOutOfRange(f"coefficient must lie in (0, 1), got {coeff}")


def rank_one_xi_eigs(params: EqualCrossParams) -> RankOneXiSpectrum:
    """Closed-form spectrum of the assembled xi for the rank-one cross block.

    The degenerate part is (1-a) with multiplicity n-1 and (1-b) with
    multiplicity m-1; the remaining two eigenvalues are

        (lam_n + lam_m +- sqrt((lam_n - lam_m)^2 + 4*n*m*c^2)) / 2

    with lam_n, lam_m the top eigenvalues of the diagonal blocks.
    """
    if params.cross_kind is not CrossKind.RANK_ONE:
        raise ParameterOutOfRange("closed-form xi spectrum requires the rank-one cross block")
    lam_n = equal_cross_top_eig(params.n, params.a)
    lam_m = equal_cross_top_eig(params.m, params.b)
    disc = (lam_n - lam_m) ** 2 + 4.0 * params.n * params.m * params.c**2
    root = np.sqrt(disc)
    lam_plus = 0.5 * (lam_n + lam_m + root)
    lam_minus = 0.5 * (lam_n + lam_m - root)
    degenerate = ((1.0 - params.a, params.n - 1), (1.0 - params.b, params.m - 1))
    return RankOneXiSpectrum(lam_plus=lam_plus, lam_minus=lam_minus, degenerate=degenerate)


def zeta_rank_one_eig(params: EqualCrossParams) -> float:
    """The single nonzero eigenvalue n*m*c^2 / (lam_n * lam_m) of zeta.

    Strictly below 1 whenever the rank-one model is admissible.
    """
    if params.cross_kind is not CrossKind.RANK_ONE:
        raise ParameterOutOfRange("rank-one zeta eigenvalue requires the rank-one cross block")
    _check_rank_one_admissible(params)
    lam_n = equal_cross_top_eig(params.n, params.a)
    lam_m = equal_cross_top_eig(params.m, params.b)
    return params.n * params.m * params.c**2 / (lam_n * lam_m)


def _check_rank_one_admissible(params: EqualCrossParams) -> None:
    # Admissible iff lam_n * lam_m > n*m*c^2; equality makes xi singular.
    lam_n = equal_cross_top_eig(params.n, params.a)
    lam_m = equal_cross_top_eig(params.m, params.b)
    cross = params.n * params.m * params.c**2
    if not cross < lam_n * lam_m:
        lam_minus = rank_one_xi_eigs(params).lam_minus
        raise ModelNotPositiveDefinite(
            f"rank-one model rejected: n*m*c^2 = {cross:.6g} >= "
            f"{lam_n * lam_m:.6g} = (top eig of xi_aa) * (top eig of xi_bb); "
            f"assembled xi would have eigenvalue {lam_minus:.6g}",
            min_eigenvalue=lam_minus,
        )


def validate_positive_definite(xi: np.ndarray, rel_tol: float = 1e-12) -> PdCheck:
    """Check strict positive definiteness via the smallest eigenvalue.

    Passes iff min eigenvalue > rel_tol * max |eigenvalue|.  Raises
    NonSymmetricInput for nonsymmetric input.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
        raise NonSymmetricInput(f"expected a square matrix, got shape {xi.shape}")
    scale = float(np.max(np.abs(xi))) if xi.size else 0.0
    if not np.allclose(xi, xi.T, rtol=0.0, atol=1e-13 * max(scale, 1.0)):
        raise NonSymmetricInput("matrix is not symmetric")
    eigs = np.linalg.eigvalsh(xi)
    max_abs = float(np.max(np.abs(eigs)))
    threshold = rel_tol * max_abs
    min_eig = float(eigs[0])
    return PdCheck(ok=min_eig > threshold, min_eigenvalue=min_eig,
                   max_abs_eigenvalue=max_abs, threshold=threshold)


def sym_inv_sqrt(mat: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Inverse square root of an SPD matrix via eigendecomposition.

    Non-positive-definite input is an error; eigenvalues are never clipped.
    """
    return _sym_mat_power(mat, -0.5, rel_tol=rel_tol)


def _sym_mat_power(mat: np.ndarray, power: float, rel_tol: float = 1e-12) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    w, v = np.linalg.eigh(mat)
    if w[0] <= rel_tol * np.max(np.abs(w)):
        raise ModelNotPositiveDefinite(
            f"matrix is not positive definite (smallest eigenvalue {w[0]:.6g})",
            min_eigenvalue=float(w[0]),
        )
    out = (v * w**power) @ v.T
    return 0.5 * (out + out.T)


def build_equal_cross(params: EqualCrossParams) -> PartitionedCorrelation:
    """Build the correlation structure for one of the two built-in families.

    Rejects parameter sets whose assembled xi is not strictly positive
    definite: the rank-one family via its closed-form criterion, the
    exp-decay family via a numerical eigenvalue check.
    """
    n, m = params.n, params.m
    if params.cross_kind is CrossKind.RANK_ONE:
        xi_ab = np.full((n, m), params.c)
        _check_rank_one_admissible(params)
    elif params.cross_kind is CrossKind.EXP_DECAY:
        # Entry (j, r) is c^max(1, |j-r|): c on the diagonal band, decaying off it.
        dist = np.abs(np.arange(n)[:, None] - np.arange(m)[None, :])
        xi_ab = params.c ** np.maximum(dist, 1) if params.c > 0 else np.zeros((n, m))
    else:
        raise ParameterOutOfRange(f"unsupported cross kind {params.cross_kind}")

    xi_aa = equal_cross_matrix(n, params.a)
    xi_bb = equal_cross_matrix(m, params.b)
    r_a = equal_cross_inv_sqrt(n, params.a)
    r_b = equal_cross_inv_sqrt(m, params.b)

    if params.cross_kind is CrossKind.EXP_DECAY:
        full = np.block([[xi_aa, xi_ab], [xi_ab.T, xi_bb]])
        check = validate_positive_definite(full)
        if not check.ok:
            raise ModelNotPositiveDefinite(
                f"exp-decay model rejected: assembled xi has smallest eigenvalue "
                f"{check.min_eigenvalue:.6g}",
                min_eigenvalue=check.min_eigenvalue,
            )

    return _finalize(n, m, xi_aa, xi_bb, xi_ab, r_a, r_b, params)


def build_custom(xi_aa: np.ndarray, xi_bb: np.ndarray, xi_ab: np.ndarray) -> PartitionedCorrelation:
    """Escape hatch: build from explicit dense blocks.

    All blocks are validated (symmetry, unit diagonal, positive
    definiteness of the diagonal blocks and of the assembled xi).
    """
    xi_aa = np.asarray(xi_aa, dtype=float)
    xi_bb = np.asarray(xi_bb, dtype=float)
    xi_ab = np.asarray(xi_ab, dtype=float)
    n, m = xi_aa.shape[0], xi_bb.shape[0]
    if m < n:
        raise ParameterOutOfRange(f"need m >= n, got n={n}, m={m}")
    if xi_ab.shape != (n, m):
        raise ParameterOutOfRange(f"xi_ab must be {n}x{m}, got {xi_ab.shape}")
    for name, block, k in (("xi_aa", xi_aa, n), ("xi_bb", xi_bb, m)):
        check = validate_positive_definite(block)
        if not check.ok:
            raise ModelNotPositiveDefinite(
                f"{name} is not positive definite (smallest eigenvalue "
                f"{check.min_eigenvalue:.6g})",
                min_eigenvalue=check.min_eigenvalue,
            )
        if not np.allclose(np.diag(block), np.ones(k), rtol=0.0, atol=1e-12):
            raise ParameterOutOfRange(f"{name} must have unit diagonal")
    full = np.block([[xi_aa, xi_ab], [xi_ab.T, xi_bb]])
    check = validate_positive_definite(full)
    if not check.ok:
        raise ModelNotPositiveDefinite(
            f"assembled xi is not positive definite (smallest eigenvalue "
            f"{check.min_eigenvalue:.6g})",
            min_eigenvalue=check.min_eigenvalue,
        )
    return _finalize(n, m, xi_aa, xi_bb, xi_ab, sym_inv_sqrt(xi_aa), sym_inv_sqrt(xi_bb), None)


def _finalize(n, m, xi_aa, xi_bb, xi_ab, r_a, r_b, params) -> PartitionedCorrelation:
    eta = r_a @ xi_ab @ r_b
    # Squared singular values, not eigenvalues of eta @ eta.T: stays
    # nonnegative under round-off near zero.
    svals = np.linalg.svd(eta, compute_uv=False)
    if svals.size and svals[0] >= 1.0:
        raise ModelNotPositiveDefinite(
            f"largest singular value of eta is {svals[0]:.6g} >= 1; "
            "assembled xi cannot be positive definite",
            min_eigenvalue=float(1.0 - svals[0] ** 2),
        )
    zeta_eigs = np.sort(svals**2)[::-1].copy()
    return PartitionedCorrelation(
        n=n, m=m, xi_aa=xi_aa, xi_bb=xi_bb, xi_ab=xi_ab, eta=eta,
        zeta_eigs=zeta_eigs, xi_aa_inv_sqrt=r_a, xi_bb_inv_sqrt=r_b, params=params,
    )
