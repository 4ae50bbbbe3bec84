"""Tests for the self-consistent resolvent solver.

Oracles:
  - the closed-form cubic for the uncorrelated model, derived and solved
    independently of the fixed-point path;
  - arbitrary-precision (mpmath) evaluation of the scalar building blocks;
  - hand reductions at kn = 0 and in the large-z limit;
  - trapezoid normalization and analytic first moments.
"""

import mpmath
import numpy as np
import pytest

from xwishart import pastur
from xwishart.corr_models import EqualCrossParams, build_equal_cross
from xwishart.errors import ConvergenceFailure, ParameterOutOfRange
from xwishart.pastur import (
    ResolventState,
    SolverSettings,
    cubic_G_zeta0,
    eval_Y,
    eval_Y1_Y2,
    fixed_point_G,
    resolvent_D_from_C,
    solve_g,
    sweep_density,
)

DESK_KN, DESK_KM = 0.075, 0.125


def herglotz_ok(z: complex, G: complex) -> bool:
    return G.imag * np.sign(z.imag) < 0.0


class TestEvalY:
    def test_vanishing_fluctuation(self):
        # z*G = 1 kills the u-term.
        z = 2.0 + 1e-3j
        np.testing.assert_allclose(complex(eval_Y(z, 1.0 / z, 0.3, 0.45)), 0.45)

    def test_kn_zero(self):
        assert eval_Y(1 + 1j, complex(5, -7), 0.0, 0.2) == 0.2

    def test_mpmath_oracle(self):
        kn, km = 0.1, 0.2
        w = 0.05 + 0.01j  # z*G - 1
        z = 0.7 + 1e-3j
        G = (w + 1.0) / z
        with mpmath.workdps(50):
            u = mpmath.mpf(kn) * mpmath.mpc(w)
            expected = mpmath.mpf(km) + u * (1 + mpmath.mpf(km) + u)
            got = eval_Y(z, G, kn, km)
            assert abs(mpmath.mpc(got) - expected) < 1e-15


class TestSolveG:
    def test_large_z_limit(self):
        z = complex(1e6, 1e-3)
        g = solve_g(z, 1.0 / z, 0.1, 0.2, 0.0)
        assert abs(g) < 1e-5

    def test_kn_zero_reduction(self):
        # At kn = 0 the inner equation linearizes to g = (z - km)*G - 1.
        z = complex(0.3, 1e-3)
        G = complex(2.0, -1.0)
        km = 0.2
        np.testing.assert_allclose(
            complex(solve_g(z, G, 0.0, km, 0.0)), (z - km) * G - 1.0, rtol=1e-14
        )

    def test_root_satisfies_inner_equation(self):
        # Plugging the root back through Y2(g) reproduces it to 1e-12.
        rng = np.random.default_rng(2)
        for _ in range(50):
            kn = rng.uniform(0.01, 0.3)
            km = rng.uniform(kn, 0.4)
            z = complex(rng.uniform(0.05, 2.0), 10 ** rng.uniform(-4, -1))
            G = complex(rng.uniform(-3, 3), -rng.uniform(0.01, 5))
            g = solve_g(z, G, kn, km, 0.0)
            w = z * G - 1.0
            h = 1.0 + kn * w
            y = eval_Y(z, G, kn, km)
            back = ((z - y / (1.0 - kn * g)) * G - 1.0) / h
            assert abs(back - g) < 1e-12 * max(1.0, abs(g))


class TestEvalY1Y2:
    def test_unit_zG_zero_g(self):
        # z*G = 1 and g = 0 give Y1 = 1/(1 - kn*G), Y2 = km.
        kn, km = 0.12, 0.3
        z = complex(1.7, 1e-3)
        G = 1.0 / z
        y1, y2 = eval_Y1_Y2(z, G, 0.0, kn, km)
        np.testing.assert_allclose(complex(y1), 1.0 / (1.0 - kn * G), rtol=1e-14)
        np.testing.assert_allclose(complex(y2), km, rtol=1e-14)

    def test_kn_zero(self):
        y1, y2 = eval_Y1_Y2(complex(0.8, 1e-3), complex(2, -3), complex(0.5, 0.5), 0.0, 0.2)
        np.testing.assert_allclose(complex(y1), 1.0)
        np.testing.assert_allclose(complex(y2), 0.2)

    def test_large_z_limits(self):
        # Far from the support the deformation scalars approach (1, km).
        kn, km = 0.075, 0.125
        z = complex(1e5, 1e-3)
        state = fixed_point_G([0.0], kn, km, z)
        np.testing.assert_allclose(complex(state.Y1), 1.0, atol=1e-4)
        np.testing.assert_allclose(complex(state.Y2), km, atol=1e-4)


class TestFixedPoint:
    def test_matches_cubic_on_grid(self):
        grid = np.linspace(1e-3, 1.0, 120)
        state, prev = None, None
        for lam in grid[::-1]:
            z = complex(lam, 1e-3)
            state = fixed_point_G([0.0], DESK_KN, DESK_KM, z, warm_start=state)
            c = cubic_G_zeta0(z, DESK_KN, DESK_KM, prev=prev)
            prev = c
            assert abs(state.G - c) < 1e-8

    def test_self_consistency_residual(self):
        corr = build_equal_cross(EqualCrossParams(16, 24, 0.5, 0.5, 0.3))
        z = complex(0.2, 1e-3)
        state = fixed_point_G(corr.zeta_eigs, DESK_KN, DESK_KM, z)
        # Re-evaluate the full right-hand side from the stored state.
        vals = np.asarray(corr.zeta_eigs)
        rhs = np.mean(1.0 / (z - vals * state.Y1 - state.Y2))
        assert abs(rhs - state.G) < 1e-10

    def test_herglotz_both_half_planes(self):
        for lam in [0.05, 0.2, 0.5]:
            up = fixed_point_G([0.0], DESK_KN, DESK_KM, complex(lam, 1e-3))
            dn = fixed_point_G([0.0], DESK_KN, DESK_KM, complex(lam, -1e-3))
            assert herglotz_ok(complex(lam, 1e-3), up.G)
            assert herglotz_ok(complex(lam, -1e-3), dn.G)
            # Conjugate symmetry between the two half planes.
            assert abs(dn.G - up.G.conjugate()) < 1e-8

    def test_deterministic_limit_peaks_at_km(self):
        # With kn -> 0 at fixed km the matrix approaches km times the
        # identity and the spectrum concentrates at km.
        res = sweep_density([0.0], 1e-4, 0.02)
        peak = res.curve.grid[np.argmax(res.curve.rho)]
        assert abs(peak - 0.02) < 1e-3

    def test_warm_start_used(self):
        z = complex(0.2, 1e-3)
        cold = fixed_point_G([0.0], DESK_KN, DESK_KM, z)
        warm = fixed_point_G([0.0], DESK_KN, DESK_KM, z, warm_start=cold)
        assert warm.iterations <= 2
        assert abs(warm.G - cold.G) < 1e-8

    def test_rejects_real_z(self):
        with pytest.raises(ParameterOutOfRange):
            fixed_point_G([0.0], 0.1, 0.2, complex(0.5, 0.0))

    def test_rejects_bad_zeta(self):
        with pytest.raises(ParameterOutOfRange):
            fixed_point_G([1.2], 0.1, 0.2, complex(0.5, 1e-3))
        with pytest.raises(ParameterOutOfRange):
            fixed_point_G([-0.1], 0.1, 0.2, complex(0.5, 1e-3))


class TestCubic:
    def test_large_z_asymptote(self):
        z = complex(1e6, 1.0)
        for kn, km in [(0.05, 0.15), (0.25, 0.25)]:
            G = cubic_G_zeta0(z, kn, km)
            assert abs(z * G - 1.0) < 1e-4

    def test_first_moment_via_density(self):
        # Build a density from the cubic alone and integrate lambda*rho.
        kn, km = DESK_KN, DESK_KM
        ref = sweep_density([0.0], kn, km)
        grid = ref.curve.grid
        eps = ref.epsilon
        prev = None
        rho = np.empty_like(grid)
        for i in range(grid.size - 1, -1, -1):
            G = cubic_G_zeta0(complex(grid[i], eps), kn, km, prev=prev)
            prev = G
            rho[i] = max(-G.imag / np.pi, 0.0)
        np.testing.assert_allclose(np.trapezoid(rho, grid), 1.0, atol=1e-3)
        np.testing.assert_allclose(np.trapezoid(grid * rho, grid), km, atol=1e-3)

    def test_kn_zero_closed_form(self):
        z = complex(0.4, 1e-3)
        np.testing.assert_allclose(
            complex(cubic_G_zeta0(z, 0.0, 0.2)), 1.0 / (z - 0.2), rtol=1e-14
        )


class TestResolventDFromC:
    def test_equal_ratios_identity(self):
        z = complex(0.3, 1e-3)
        G = complex(1.2, -0.7)
        assert resolvent_D_from_C(G, z, 0.1, 0.1) == G

    def test_trivial_resolvent_fixed(self):
        z = complex(0.9, 1e-3)
        np.testing.assert_allclose(
            complex(resolvent_D_from_C(1.0 / z, z, 0.05, 0.2)), 1.0 / z, rtol=1e-14
        )

    def test_mass_bookkeeping(self):
        # The twin density is the zero-mode Lorentzian of weight 1 - kn/km
        # plus kn/km times the original density, and integrates to 1.
        kn, km = DESK_KN, DESK_KM
        r = kn / km
        res = sweep_density([0.0], kn, km)
        eps = res.epsilon
        grid = res.curve.grid
        Gd = np.array([resolvent_D_from_C(g, complex(x, eps), kn, km)
                       for g, x in zip(res.G, grid)])
        rho_d = -Gd.imag / np.pi
        pole = (1.0 - r) * (eps / np.pi) / (grid**2 + eps**2)
        rho_c = -res.G.imag / np.pi
        np.testing.assert_allclose(rho_d, pole + r * rho_c, atol=1e-10)
        np.testing.assert_allclose(np.trapezoid(rho_d, grid), 1.0, atol=1e-2)
        # Away from the zero-mode pole (tail ~ eps/lambda^2) the densities
        # differ by the ratio alone.
        mask = grid > 0.25
        np.testing.assert_allclose(rho_d[mask], r * rho_c[mask], atol=1e-3)

    def test_rejects_zero_km(self):
        with pytest.raises(ParameterOutOfRange):
            resolvent_D_from_C(1.0 + 0j, complex(1, 1e-3), 0.0, 0.0)


class TestSweep:
    def test_normalization_and_moment_null(self):
        res = sweep_density([0.0], DESK_KN, DESK_KM)
        np.testing.assert_allclose(res.curve.integral(), 1.0, atol=1e-3)
        m1 = np.trapezoid(res.curve.grid * res.curve.rho, res.curve.grid)
        np.testing.assert_allclose(m1, DESK_KM, rtol=1e-2)

    def test_normalization_and_moment_rank_one(self):
        corr = build_equal_cross(EqualCrossParams(96, 160, 0.9, 0.9, 0.8))
        res = sweep_density(corr.zeta_eigs, DESK_KN, DESK_KM)
        np.testing.assert_allclose(res.curve.integral(), 1.0, atol=1e-3)
        m1 = np.trapezoid(res.curve.grid * res.curve.rho, res.curve.grid)
        np.testing.assert_allclose(m1, DESK_KM + corr.zeta_eigs.mean(), rtol=1e-2)

    def test_island_carries_one_over_n(self):
        # The separated eigenvalue appears as a finite-size island of mass
        # ~1/n beyond the null support edge.
        corr = build_equal_cross(EqualCrossParams(96, 160, 0.9, 0.9, 0.8))
        null = sweep_density([0.0], DESK_KN, DESK_KM)
        res = sweep_density(corr.zeta_eigs, DESK_KN, DESK_KM)
        mask = res.curve.grid > null.support_hi + 0.05
        island_mass = np.trapezoid(res.curve.rho[mask], res.curve.grid[mask])
        np.testing.assert_allclose(island_mass, 1.0 / 96, rtol=0.1)

    def test_clipped_mass_small_and_herglotz(self):
        res = sweep_density([0.0], DESK_KN, DESK_KM)
        assert res.clipped_mass < 1e-4
        assert np.all(res.G.imag < 0.0)
        assert np.all(res.residuals < 1e-10)

    def test_explicit_grid_respected(self):
        grid = np.linspace(0.01, 0.6, 301)
        res = sweep_density([0.0], DESK_KN, DESK_KM, SolverSettings(grid=grid))
        np.testing.assert_array_equal(res.curve.grid, grid)

    def test_epsilon_robustness_away_from_edges(self):
        # Halving epsilon changes the curve by < 2e-3 in L1 away from the
        # support edges (bands of max(3*eps, 1.5% of width) excluded: the
        # edge zones scale with the edge steepness, not with eps alone).
        base = sweep_density([0.0], DESK_KN, DESK_KM)
        eps = base.epsilon
        band = max(3 * eps, 0.015 * (base.support_hi - base.support_lo))
        mask = (base.curve.grid > base.support_lo + band) & (base.curve.grid < base.support_hi - band)
        grid = base.curve.grid[mask]
        half = sweep_density([0.0], DESK_KN, DESK_KM,
                             SolverSettings(epsilon=eps / 2, grid=grid))
        l1 = np.trapezoid(np.abs(half.curve.rho - base.curve.rho[mask]), grid)
        assert l1 < 2e-3

    def test_conjugate_grid_symmetry(self):
        # Solving at lambda - i*eps mirrors the upper-half-plane sweep.
        res = sweep_density([0.0], DESK_KN, DESK_KM,
                            SolverSettings(grid=np.linspace(0.02, 0.5, 101)))
        state = None
        for i in range(res.curve.grid.size - 1, -1, -1):
            z = complex(res.curve.grid[i], -res.epsilon)
            state = fixed_point_G([0.0], DESK_KN, DESK_KM, z, warm_start=state)
            assert abs(state.G - res.G[i].conjugate()) < 1e-8


class TestMonteCarloAgreementHardEdge:
    def test_equal_ratio_density_matches_simulation(self):
        # n = m gives a hard edge at zero; both the fixed-point curve and a
        # density built from the closed-form cubic must match the simulated
        # spectrum within L1 = 0.05.
        from xwishart.corr_models import build_custom
        from xwishart.ensemble import EnsembleConfig
        from xwishart.moments import bin_averaged_curve, curve_distance
        from xwishart.spectra import empirical_density, simulate_eigenvalues

        n = m = 128
        t = 640
        corr = build_custom(np.eye(n), np.eye(m), np.zeros((n, m)))
        cfg = EnsembleConfig(n=n, m=m, t=t, n_samples=500, seed=314159)
        eigs = simulate_eigenvalues(corr, cfg, n_jobs=2)
        hist = empirical_density(eigs)

        sweep = sweep_density([0.0], n / t, m / t)
        theory_binned = bin_averaged_curve(sweep.curve, hist.bin_edges)
        l1_fp, _ = curve_distance(hist, theory_binned)
        assert l1_fp < 0.05, f"fixed-point vs MC: L1 = {l1_fp:.4f}"

        rho_cubic = np.empty_like(sweep.curve.grid)
        prev = None
        for i in range(sweep.curve.grid.size - 1, -1, -1):
            G = cubic_G_zeta0(complex(sweep.curve.grid[i], sweep.epsilon),
                              n / t, m / t, prev=prev)
            prev = G
            rho_cubic[i] = max(-G.imag / np.pi, 0.0)
        cubic_curve = type(sweep.curve)(grid=sweep.curve.grid, rho=rho_cubic,
                                        origin="theory", norm_tol=1e-3)
        l1_cubic, _ = curve_distance(hist, bin_averaged_curve(cubic_curve, hist.bin_edges))
        assert l1_cubic < 0.05, f"cubic vs MC: L1 = {l1_cubic:.4f}"


class TestOracleEquivalencePairs:
    @pytest.mark.parametrize("kn,km", [(0.05, 0.15), (0.075, 0.125), (0.1, 0.1),
                                       (0.02, 0.18), (0.25, 0.25)])
    def test_fixed_point_matches_cubic(self, kn, km):
        hi = ((1 + np.sqrt(kn)) * (1 + np.sqrt(km))) ** 2
        grid = np.linspace(1e-3, hi, 200)
        state, prev = None, None
        worst = 0.0
        for lam in grid[::-1]:
            z = complex(lam, 1e-3)
            state = fixed_point_G([0.0], kn, km, z, warm_start=state)
            c = cubic_G_zeta0(z, kn, km, prev=prev)
            prev = c
            worst = max(worst, abs(state.G - c))
        assert worst < 1e-8
