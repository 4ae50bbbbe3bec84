"""Self-consistent resolvent solver for the spectral density of the model.

The large-matrix resolvent G(z) of the n x n product matrix satisfies a
scalar self-consistent system driven by the spectrum of zeta (the Gram
matrix of the decorrelated cross block) and the two dimension ratios
kn = n/t, km = m/t.  Writing u = kn*(z*G - 1) and h = 1 + u::

    G  = < 1 / (z - zeta_eig * Y1 - Y2) >      (average over zeta's spectrum)
    Y  = km + u * (1 + km + u)
    Y2 = Y / (1 - kn * g)
    Y1 = h^2 / (1 - kn * G * h / (1 - kn * g))
    g  = ((z - Y2) * G - 1) / h

Eliminating Y2 from the last two lines turns g into a root of a quadratic
whose coefficients depend only on (z, G), so each outer damped-Picard step
on G performs one closed-form inner solve for g.  The spectral density is
rho(lambda) = -Im G(lambda + i*eps) / pi for small eps > 0.

For zeta = 0 the system collapses to a cubic in G (g vanishes
identically), solved independently in ``cubic_G_zeta0`` as an oracle for
the fixed-point path.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import (
    BothRootsDiverged,
    BranchSelectionAmbiguous,
    ConvergenceFailure,
    DegenerateDenominator,
    MaxIterationsExceeded,
    ParameterOutOfRange,
)
from .spectra import DensityCurve

__all__ = [
    "ResolventState",
    "SolverSettings",
    "SweepResult",
    "cubic_G_zeta0",
    "eval_Y",
    "eval_Y1_Y2",
    "fixed_point_G",
    "resolvent_D_from_C",
    "solve_g",
    "sweep_density",
]

# The support classifier evaluates the density at two moderate imaginary
# offsets and Richardson-extrapolates to the real axis: outside the support
# the smoothed density is linear in the offset and extrapolates to ~0,
# inside it converges to an O(1) limit.  Moderate offsets keep the
# iteration safely on the physical branch.
_PROBE_EPS_HI = 4e-4
_PROBE_EPS_LO = 1e-4
_PROBE_MAX_ITER = 4000
# Extrapolation residue just outside a steep edge decays like distance^-4,
# so edge classification uses a looser bound (halo of a few 1e-3) than the
# end-of-grid cleanliness bound, which is checked far from the support.
_SUPPORT_CLASSIFY_BOUND = 1e-6
_END_DENSITY_BOUND = 1e-8
_MAX_CLIPPED_MASS = 1e-4
_G_SANITY_RADIUS = 1e6
_MAX_DAMPING_HALVINGS = 4


@dataclass(frozen=True)
class SolverSettings:
    """Numerical parameters of the fixed-point sweep.

    ``epsilon`` is the imaginary offset of the evaluation line; ``grid``
    (strictly increasing) overrides the automatic support-detected grid of
    ``n_grid`` points.  The margin pair controls how far the automatic
    grid extends past the detected support so that the offset-induced
    Lorentzian tails are integrated (tail mass ~ epsilon/margin controls
    the normalization defect).
    """

    epsilon: float = 2e-4
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 10000
    grid: np.ndarray | None = None
    n_grid: int = 2001
    margin_min: float = 0.5
    margin_factor: float = 0.3

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterOutOfRange(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 < self.damping <= 1.0):
            raise ParameterOutOfRange(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol <= 0:
            raise ParameterOutOfRange(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ParameterOutOfRange(f"max_iter must be >= 1, got {self.max_iter}")
        if self.n_grid < 16:
            raise ParameterOutOfRange(f"n_grid must be >= 16, got {self.n_grid}")
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
                raise ParameterOutOfRange("grid must be strictly increasing")
            object.__setattr__(self, "grid", grid)
            grid.setflags(write=False)


@dataclass(frozen=True)
class ResolventState:
    """Converged (or best-effort) solution of the system at one z."""

    z: complex
    G: complex
    g: complex
    Y: complex
    Y1: complex
    Y2: complex
    residual: float
    iterations: int


@dataclass(frozen=True)
class SweepResult:
    """Theory density curve plus per-point solver diagnostics."""

    curve: DensityCurve
    G: np.ndarray
    g: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    clipped_mass: float
    epsilon: float
    support_lo: float
    support_hi: float
    kn: float
    km: float

    def diagnostics_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "kn": self.kn,
            "km": self.km,
            "grid_points": int(self.curve.grid.size),
            "support_lo": self.support_lo,
            "support_hi": self.support_hi,
            "clipped_mass": self.clipped_mass,
            "max_residual": float(self.residuals.max()),
            "total_iterations": int(self.iterations.sum()),
            "max_iterations": int(self.iterations.max()),
            "integral": self.curve.integral(),
        }


def eval_Y(z: complex, G: complex, kn: float, km: float) -> complex:
    """The scalar km + u * (1 + km + u) with u = kn*(z*G - 1)."""
    u = kn * (z * G - 1.0)
    return km + u * (1.0 + km + u)


def solve_g(z: complex, G: complex, kn: float, km: float, g_prev: complex) -> complex:
    """Inner closed-form solve for g given the current outer iterate G.

    Substituting Y2 = Y / (1 - kn*g) into g = ((z - Y2)*G - 1)/h gives

        kn*h * g^2 - (1 + 2u) * g + (w - Y*G) = 0,

    with w = z*G - 1, u = kn*w, h = 1 + u.  The root closer to ``g_prev``
    is returned (continuity); g_prev = 0 encodes the large-z limit g -> 0.
    """
    w = z * G - 1.0
    u = kn * w
    h = 1.0 + u
    if abs(h) < 1e-12 * (1.0 + abs(u)):
        raise DegenerateDenominator(f"1 + kn*(z*G - 1) vanished at z={z}")
    y = eval_Y(z, G, kn, km)
    a2 = kn * h
    a1 = -(1.0 + 2.0 * u)
    a0 = w - y * G

    coeff_scale = max(abs(a1), abs(a0), abs(a2), 1e-300)
    if abs(a2) < 1e-14 * coeff_scale:
        # kn ~ 0: the quadratic degenerates to a linear equation.
        if abs(a1) < 1e-14 * coeff_scale:
            raise DegenerateDenominator(f"inner equation degenerate at z={z}")
        return -a0 / a1

    disc = a1 * a1 - 4.0 * a2 * a0
    disc_scale = max(abs(a1) ** 2, 4.0 * abs(a2) * abs(a0))
    if disc_scale > 0.0 and abs(disc) < 1e-14 * disc_scale:
        # Near-degenerate discriminant: fall back to damped substitution.
        return _solve_g_damped(z, G, kn, y, h, g_prev)

    sqrt_disc = cmath.sqrt(disc)
    # Stable splitting: build q with the non-cancelling sign.
    if (a1.real * sqrt_disc.real + a1.imag * sqrt_disc.imag) >= 0.0:
        q = -0.5 * (a1 + sqrt_disc)
    else:
        q = -0.5 * (a1 - sqrt_disc)
    if abs(q) == 0.0:
        root = cmath.sqrt(-a0 / a2)
        candidates = (root, -root)
    else:
        candidates = (q / a2, a0 / q)
    valid = [r for r in candidates if abs(r) < _G_SANITY_RADIUS]
    if not valid:
        raise BothRootsDiverged(f"both inner roots exceed the sanity radius at z={z}")
    return min(valid, key=lambda r: abs(r - g_prev))


def _solve_g_damped(z, G, kn, y, h, g_prev, n_iter: int = 400, tol: float = 1e-13) -> complex:
    g = g_prev
    for _ in range(n_iter):
        den = 1.0 - kn * g
        if abs(den) < 1e-14:
            raise DegenerateDenominator(f"1 - kn*g vanished during inner iteration at z={z}")
        new = ((z - y / den) * G - 1.0) / h
        if abs(new - g) < tol * max(1.0, abs(new)):
            return new
        g = 0.5 * (g + new)
    raise ConvergenceFailure(f"inner damped iteration for g stalled at z={z}")


def eval_Y1_Y2(z: complex, G: complex, g: complex, kn: float, km: float) -> tuple[complex, complex]:
    """The two deformation scalars, given a consistent (G, g) pair."""
    u = kn * (z * G - 1.0)
    h = 1.0 + u
    den = 1.0 - kn * g
    if abs(den) < 1e-14 * max(1.0, abs(kn * g)):
        raise DegenerateDenominator(f"1 - kn*g vanished at z={z}")
    y2 = eval_Y(z, G, kn, km) / den
    inner = 1.0 - kn * G * h / den
    if abs(inner) < 1e-14 * max(1.0, abs(kn * G * h / den)):
        raise DegenerateDenominator(f"nested denominator of Y1 vanished at z={z}")
    y1 = h * h / inner
    return y1, y2


def _compress_zeta(zeta_eigs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.atleast_1d(np.asarray(zeta_eigs, dtype=float))
    if arr.size == 0:
        raise ParameterOutOfRange("zeta_eigs must be nonempty")
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ParameterOutOfRange("zeta eigenvalues must lie in [0, 1)")
    values, counts = np.unique(arr, return_counts=True)
    return values, counts / arr.size


def fixed_point_G(
    zeta_eigs,
    kn: float,
    km: float,
    z: complex,
    settings: SolverSettings | None = None,
    warm_start: ResolventState | None = None,
) -> ResolventState:
    """Damped Picard iteration for G at a single complex point.

    Each step solves the inner quadratic for g, evaluates Y1 and Y2, and
    averages 1 / (z - zeta_eig*Y1 - Y2) over the zeta spectrum.  The
    damping factor halves (at most four times) whenever the fixed-point
    defect increases, and a safeguarded secant step accelerates the
    near-edge regime.  If the iteration fails from the given start (warm
    starts can be far off near support corners), the point is re-solved by
    continuation in the imaginary offset from the easy asymptotic regime.
    On final failure the best state reached is attached to the raised
    MaxIterationsExceeded.
    """
    if settings is None:
        settings = SolverSettings()
    z = complex(z)
    if z.imag == 0.0:
        raise ParameterOutOfRange("z must have a nonzero imaginary part")
    if not (0.0 <= kn <= km <= 1.0):
        raise ParameterOutOfRange(f"need 0 <= kn <= km <= 1, got kn={kn}, km={km}")
    values, weights = _compress_zeta(zeta_eigs)
    try:
        return _iterate(values, weights, kn, km, z, settings, warm_start)
    except ConvergenceFailure as primary_error:
        try:
            return _epsilon_continuation(values, weights, kn, km, z, settings)
        except ConvergenceFailure:
            raise primary_error from None


def _epsilon_continuation(values, weights, kn, km, z: complex, settings) -> ResolventState:
    """Solve at z by walking the imaginary offset down from the easy regime.

    At offsets comparable to 1 + |Re z| the map contracts from the
    asymptotic start 1/z; the solution branch is then followed
    geometrically down to the requested offset.
    """
    sign = 1.0 if z.imag > 0 else -1.0
    target = abs(z.imag)
    im = max(1.0, abs(z.real))
    offsets = []
    while im > target * 1.0001:
        offsets.append(im)
        im *= 0.35
    offsets.append(target)
    state = None
    for im_k in offsets:
        state = _iterate(values, weights, kn, km, complex(z.real, sign * im_k),
                         settings, state)
    return state


def _iterate(values, weights, kn, km, z: complex, settings, warm_start) -> ResolventState:
    if warm_start is not None:
        G, g_prev = warm_start.G, warm_start.g
    else:
        G, g_prev = 1.0 / z, 0.0 + 0.0j

    alpha = settings.damping
    halvings = 0
    prev_residual = np.inf
    best: ResolventState | None = None
    half_sign = 1.0 if z.imag > 0 else -1.0
    history: tuple[complex, complex] | None = None  # previous (G, F(G)) pair
    secant_cooldown = 0

    last_good: complex | None = None
    backoffs = 0
    for it in range(1, settings.max_iter + 1):
        try:
            g = solve_g(z, G, kn, km, g_prev)
            y1, y2 = eval_Y1_Y2(z, G, g, kn, km)
        except DegenerateDenominator:
            # A transient iterate can degenerate even when the solution is
            # fine; back off halfway toward the last evaluable iterate.
            if last_good is None or backoffs >= 60:
                raise
            backoffs += 1
            G = 0.5 * (G + last_good)
            history = None
            secant_cooldown = max(secant_cooldown, 5)
            continue
        last_good = G
        rhs = complex(np.sum(weights / (z - values * y1 - y2)))
        residual = abs(rhs - G)
        if best is None or residual < best.residual:
            best = ResolventState(z=z, G=G, g=g, Y=eval_Y(z, G, kn, km),
                                  Y1=y1, Y2=y2, residual=residual, iterations=it)
        if residual < settings.tol:
            state = ResolventState(z=z, G=G, g=g, Y=eval_Y(z, G, kn, km),
                                   Y1=y1, Y2=y2, residual=residual, iterations=it)
            if state.G.imag * half_sign > 0.0:
                raise ConvergenceFailure(
                    f"converged to a non-Herglotz branch at z={z}: Im G = {state.G.imag:.3e}"
                )
            return state
        if residual > prev_residual:
            if halvings < _MAX_DAMPING_HALVINGS:
                alpha *= 0.5
                halvings += 1
            if secant_cooldown == 0:
                secant_cooldown = 5  # last secant step overshot; damp for a while

        # Secant step on H(G) = F(G) - G accelerates the near-edge regime
        # where plain damped Picard slows critically; rejected whenever the
        # update is ill-conditioned or leaves the physical half plane.
        G_next = None
        if history is not None and secant_cooldown == 0:
            g_prev_it, f_prev = history
            dh = (rhs - G) - (f_prev - g_prev_it)
            if abs(dh) > 1e-300:
                cand = G - (rhs - G) * (G - g_prev_it) / dh
                step_ok = (
                    np.isfinite(cand.real) and np.isfinite(cand.imag)
                    and abs(cand - G) <= 10.0 * (1.0 + abs(G))
                    and cand.imag * half_sign <= 0.0
                )
                if step_ok:
                    G_next = cand
        if G_next is None:
            G_next = (1.0 - alpha) * G + alpha * rhs
        if secant_cooldown > 0:
            secant_cooldown -= 1

        history = (G, rhs)
        G = G_next
        g_prev = g
        prev_residual = residual

    raise MaxIterationsExceeded(
        f"no convergence after {settings.max_iter} iterations at z={z} "
        f"(best residual {best.residual:.3e})",
        state=best,
    )


def cubic_G_zeta0(z: complex, kn: float, km: float, prev: complex | None = None) -> complex:
    """Closed-form resolvent of the uncorrelated (zeta = 0) model.

    With zeta = 0 the self-consistent system forces g = 0 and Y2 = Y, and
    z - 1/G = Y becomes, in terms of G alone,

        kn^2 z^2 G^3 + kn z (1 + km - 2 kn) G^2
            + (km - z - kn (1 + km) + kn^2) G + 1 = 0.

    This is derived and solved without the fixed-point code path and
    serves as its oracle.  The root is selected by the half-plane
    condition (Im G opposite in sign to Im z) and proximity to ``prev``
    (or to the asymptote 1/z when no previous value is given).
    """
    z = complex(z)
    if z.imag == 0.0:
        raise ParameterOutOfRange("z must have a nonzero imaginary part")
    if kn == 0.0:
        return 1.0 / (z - km)
    c3 = kn**2 * z**2
    c2 = kn * z * (1.0 + km - 2.0 * kn)
    c1 = km - z - kn * (1.0 + km) + kn**2
    c0 = 1.0
    roots = np.roots([c3, c2, c1, c0])
    half_sign = 1.0 if z.imag > 0 else -1.0
    admissible = [r for r in roots if r.imag * half_sign < 1e-12 * max(1.0, abs(r))]
    if not admissible:
        raise BranchSelectionAmbiguous(
            f"no root satisfies the half-plane condition at z={z}: roots={roots}"
        )
    anchor = prev if prev is not None else 1.0 / z
    return complex(min(admissible, key=lambda r: abs(r - anchor)))


def resolvent_D_from_C(G: complex, z: complex, kn: float, km: float) -> complex:
    """Resolvent of the m x m twin matrix from the n x n resolvent.

    The two share their nonzero spectrum, which fixes the exact linear map
    G_D(z) - 1/z = (kn/km) * (G(z) - 1/z); the extra mass (1 - kn/km)
    sits in a point mass at zero.
    """
    if km <= 0.0:
        raise ParameterOutOfRange(f"km must be positive, got {km}")
    return (1.0 - kn / km) / z + (kn / km) * G


def _limit_density(
    zeta_eigs, kn, km, lam: float, settings: SolverSettings, warm_start=None
) -> tuple[float, ResolventState | None]:
    """Density at `lam` extrapolated to a vanishing imaginary offset.

    Solves at two moderate offsets and extrapolates linearly; outside the
    support this cancels the offset-proportional Lorentzian tail, leaving
    ~0.  Returns the lower-offset state for warm-starting neighbors.
    A probe that fails to converge reports an infinite density so it is
    conservatively classified as inside the support.
    """
    probe_settings = SolverSettings(
        epsilon=_PROBE_EPS_LO, damping=settings.damping, tol=settings.tol,
        max_iter=_PROBE_MAX_ITER,
    )
    try:
        s_hi = fixed_point_G(zeta_eigs, kn, km, complex(lam, _PROBE_EPS_HI),
                             probe_settings, warm_start=warm_start)
        s_lo = fixed_point_G(zeta_eigs, kn, km, complex(lam, _PROBE_EPS_LO),
                             probe_settings, warm_start=s_hi)
    except ConvergenceFailure:
        return float("inf"), None
    rho_hi = -s_hi.G.imag / np.pi
    rho_lo = -s_lo.G.imag / np.pi
    rho0 = (_PROBE_EPS_HI * rho_lo - _PROBE_EPS_LO * rho_hi) / (_PROBE_EPS_HI - _PROBE_EPS_LO)
    return max(rho0, 0.0), s_lo


def _probe_outside(
    zeta_eigs, kn, km, lam: float, settings: SolverSettings, warm_start=None
) -> tuple[bool, ResolventState | None]:
    """Classify `lam` as outside the spectrum's support."""
    rho0, state = _limit_density(zeta_eigs, kn, km, lam, settings, warm_start)
    return rho0 < _SUPPORT_CLASSIFY_BOUND, state


def _bisect_edge(zeta_eigs, kn, km, inside: float, outside: float, settings, warm_start=None) -> float:
    """Support boundary between a point inside and a point outside."""
    tol = max(1e-3 * abs(outside - inside), 2.0 * _PROBE_EPS_LO)
    lo, hi = inside, outside
    state = warm_start
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        is_outside, new_state = _probe_outside(zeta_eigs, kn, km, mid, settings, warm_start=state)
        state = new_state or state
        if is_outside:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _sweep_G_on_grid(zeta_eigs, kn, km, grid, epsilon, settings):
    """Continuation sweep from the largest grid point downward."""
    n = grid.size
    G = np.empty(n, dtype=complex)
    g = np.empty(n, dtype=complex)
    iterations = np.zeros(n, dtype=int)
    residuals = np.zeros(n)
    state = None
    for i in range(n - 1, -1, -1):
        z = complex(grid[i], epsilon)
        try:
            state = fixed_point_G(zeta_eigs, kn, km, z, settings, warm_start=state)
        except MaxIterationsExceeded as exc:
            exc.args = (f"{exc.args[0]} (sweep point lambda={grid[i]:.6g})",) + exc.args[1:]
            raise
        except ConvergenceFailure as exc:
            exc.args = (f"{exc.args[0]} (sweep point lambda={grid[i]:.6g})",) + exc.args[1:]
            raise
        G[i] = state.G
        g[i] = state.g
        iterations[i] = state.iterations
        residuals[i] = state.residual
    return G, g, iterations, residuals


def _detect_support(zeta_eigs, kn, km, settings) -> tuple[float, float]:
    """Bracket and bisect the support of the limiting density."""
    # Generous upper bound: the largest singular value of the scaled cross
    # product is at most ~(1 + sqrt(kn)) (1 + sqrt(km)), squared for the
    # product matrix; the zeta deformation shifts mass by at most ~1.
    zeta_max = float(np.max(np.atleast_1d(zeta_eigs)))
    hi = ((1.0 + np.sqrt(kn)) * (1.0 + np.sqrt(km))) ** 2 + 2.0 * zeta_max + 0.5
    lo = -0.25
    for _ in range(80):
        if _probe_outside(zeta_eigs, kn, km, hi, settings)[0]:
            break
        hi *= 1.4
    else:
        raise ConvergenceFailure("could not bracket the upper support edge")
    for _ in range(80):
        if _probe_outside(zeta_eigs, kn, km, lo, settings)[0]:
            break
        lo -= 0.25 * (hi - lo)
    else:
        raise ConvergenceFailure("could not bracket the lower support edge")

    # Coarse scan (warm-started right to left, like the sweep) to find
    # interior points, then bisect both edges.
    coarse = np.linspace(lo, hi, 121)
    inside_mask = np.empty(coarse.size, dtype=bool)
    states: list[ResolventState | None] = [None] * coarse.size
    state = None
    for i in range(coarse.size - 1, -1, -1):
        is_outside, new_state = _probe_outside(zeta_eigs, kn, km, coarse[i], settings, warm_start=state)
        inside_mask[i] = not is_outside
        states[i] = new_state
        state = new_state or state
    if not inside_mask.any():
        raise ConvergenceFailure("support detection found no interior points")
    first = int(np.argmax(inside_mask))
    last = int(len(coarse) - 1 - np.argmax(inside_mask[::-1]))
    support_lo = _bisect_edge(zeta_eigs, kn, km, coarse[first], coarse[max(first - 1, 0)],
                              settings, warm_start=states[first])
    support_hi = _bisect_edge(zeta_eigs, kn, km, coarse[last], coarse[min(last + 1, len(coarse) - 1)],
                              settings, warm_start=states[last])
    # The matrix is nonnegative definite, so the support cannot dip below 0;
    # the probe halo around a hard edge can report slightly negative values.
    return max(support_lo, 0.0), support_hi


def sweep_density(zeta_eigs, kn: float, km: float, settings: SolverSettings | None = None) -> SweepResult:
    """Theory density on a support-covering grid.

    The sweep walks from the largest grid point (where 1/z is an accurate
    starting guess) downward, warm-starting every point from its
    neighbor.  Negative round-off densities are clipped at zero and the
    clipped mass is reported; the run fails if it exceeds 1e-4.
    """
    if settings is None:
        settings = SolverSettings()
    values, _ = _compress_zeta(zeta_eigs)  # validate range early

    if settings.grid is not None:
        grid = settings.grid
        support_lo, support_hi = float(grid[0]), float(grid[-1])
    else:
        support_lo, support_hi = _detect_support(zeta_eigs, kn, km, settings)
        width = support_hi - support_lo
        margin = max(settings.margin_min, settings.margin_factor * width)
        for _ in range(6):
            lo_end = support_lo - margin
            hi_end = support_hi + margin
            clean_lo = _limit_density(zeta_eigs, kn, km, lo_end, settings)[0] < _END_DENSITY_BOUND
            clean_hi = _limit_density(zeta_eigs, kn, km, hi_end, settings)[0] < _END_DENSITY_BOUND
            if clean_lo and clean_hi:
                break
            margin *= 1.5
        else:
            raise ConvergenceFailure("grid ends never fell below the end-density bound")
        span = hi_end - lo_end
        # Hard-edge cusps have feature scale ~epsilon; keep the spacing below
        # 0.75*epsilon so the trapezoid normalization stays within tolerance.
        n_points = max(settings.n_grid, int(np.ceil(span / (0.75 * settings.epsilon))) + 1)
        n_points = min(n_points, 40001)
        grid = np.linspace(lo_end, hi_end, n_points)

    G, g, iterations, residuals = _sweep_G_on_grid(zeta_eigs, kn, km, grid, settings.epsilon, settings)

    rho_raw = -G.imag / np.pi
    negative = np.minimum(rho_raw, 0.0)
    clipped_mass = float(-np.trapezoid(negative, grid))
    if clipped_mass > _MAX_CLIPPED_MASS:
        raise ConvergenceFailure(
            f"clipped negative density mass {clipped_mass:.3e} exceeds {_MAX_CLIPPED_MASS}"
        )
    rho = np.maximum(rho_raw, 0.0)

    curve = DensityCurve(grid=grid, rho=rho, origin="theory", norm_tol=1e-3)
    return SweepResult(
        curve=curve, G=G, g=g, iterations=iterations, residuals=residuals,
        clipped_mass=clipped_mass, epsilon=settings.epsilon,
        support_lo=support_lo, support_hi=support_hi, kn=kn, km=km,
    )
