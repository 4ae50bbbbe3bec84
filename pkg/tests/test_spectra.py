"""Tests for eigenvalue extraction, histograms and outlier statistics."""

import numpy as np
import pytest

from xwishart.corr_models import EqualCrossParams, build_equal_cross
from xwishart.ensemble import EnsembleConfig
from xwishart.errors import EmptyInput, NonSymmetricInput, ParameterOutOfRange
from xwishart.spectra import (
    DensityCurve,
    bulk_edge_from_curve,
    eigenvalues_sym,
    empirical_density,
    load_curve_csv,
    outlier_stats,
    pooled_quantile_edge,
    save_curve_csv,
    save_eigenvalues_csv,
    separation_counts,
    simulate_eigenvalues,
    strip_largest,
)


def random_rotation(k, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    return q


class TestEigenvaluesSym:
    def test_identity(self):
        np.testing.assert_allclose(eigenvalues_sym(np.eye(3)), [1, 1, 1])

    def test_similarity_invariance(self):
        q = random_rotation(2, 1)
        mat = q @ np.diag([0.5, 2.5]) @ q.T
        np.testing.assert_allclose(eigenvalues_sym(mat), [0.5, 2.5], atol=1e-12)

    def test_trace_and_det_oracles(self):
        rng = np.random.default_rng(2)
        for k in [8, 32, 64]:
            g = rng.standard_normal((k, 2 * k))
            mat = g @ g.T / (2 * k)
            w = eigenvalues_sym(mat)
            np.testing.assert_allclose(w.sum(), np.trace(mat), rtol=1e-10)
            sign, logdet = np.linalg.slogdet(mat)
            assert sign > 0
            np.testing.assert_allclose(np.log(w).sum(), logdet, rtol=1e-8)

    def test_sorted_ascending(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((10, 10))
        w = eigenvalues_sym(g + g.T)
        assert np.all(np.diff(w) >= 0)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(NonSymmetricInput):
            eigenvalues_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(NonSymmetricInput):
            eigenvalues_sym(np.zeros((2, 3)))


class TestEmpiricalDensity:
    def test_degenerate_values_single_bin(self):
        curve = empirical_density(np.ones((5, 3)), bins=7)
        assert np.count_nonzero(curve.rho) == 1
        np.testing.assert_allclose(curve.integral(), 1.0, atol=1e-12)

    def test_integral_exactly_one(self):
        rng = np.random.default_rng(4)
        curve = empirical_density(rng.exponential(size=(40, 25)))
        assert abs(curve.integral() - 1.0) < 1e-12

    def test_concatenation_is_weighted_average(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(30, 8))
        b = rng.normal(3.0, 1.0, size=(10, 8))
        edges = np.linspace(-5, 8, 40)
        ca = empirical_density(a, bins=edges)
        cb = empirical_density(b, bins=edges)
        cab = empirical_density(np.vstack([a, b]), bins=edges)
        wa, wb = a.size, b.size
        np.testing.assert_allclose(
            cab.rho, (wa * ca.rho + wb * cb.rho) / (wa + wb), atol=1e-12
        )

    def test_default_bins_at_least_ten(self):
        curve = empirical_density(np.array([[0.0, 1.0, 2.0]]))
        assert curve.rho.size >= 10

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            empirical_density(np.empty((0, 4)))

    def test_bad_bins_rejected(self):
        with pytest.raises(ParameterOutOfRange):
            empirical_density(np.ones((2, 2)), bins=0)
        with pytest.raises(ParameterOutOfRange):
            empirical_density(np.ones((2, 2)), bins=np.array([1.0, 0.5]))


class TestOutlierStats:
    def test_gap_flags_no_separation(self):
        eigs = np.sort(np.random.default_rng(6).uniform(0, 1, size=(20, 5)), axis=1)
        stats = outlier_stats(eigs, bulk_edge=2.0)
        assert stats.separation_gap <= 0.0
        assert not stats.separated
        assert stats.values.size == 20

    def test_gaussian_reference_moments(self):
        rng = np.random.default_rng(7)
        # One "eigenvalue" per realization: the stats reduce to plain
        # sample moments of a Gaussian.
        values = rng.normal(5.0, 2.0, size=(10000, 1))
        stats = outlier_stats(values, bulk_edge=0.0)
        assert abs(stats.mean - 5.0) < 0.1
        assert abs(stats.variance - 4.0) < 0.25
        assert abs(stats.skewness) < 0.1
        assert abs(stats.excess_kurtosis) < 0.2

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        eigs = np.sort(rng.uniform(size=(15, 6)), axis=1)
        s1 = outlier_stats(eigs, 0.5)
        s2 = outlier_stats(eigs[::-1], 0.5)
        np.testing.assert_allclose(s1.mean, s2.mean, rtol=1e-12)
        np.testing.assert_allclose(s1.variance, s2.variance, rtol=1e-12)
        np.testing.assert_array_equal(np.sort(s1.values), np.sort(s2.values))

    def test_separation_counts(self):
        eigs = np.array([[0.1, 0.2, 0.9], [0.1, 0.8, 0.95], [0.1, 0.2, 0.3]])
        np.testing.assert_array_equal(separation_counts(eigs, 0.5), [1, 2, 0])

    def test_strip_largest(self):
        eigs = np.array([[0.1, 0.2, 0.9], [0.0, 0.3, 0.5]])
        np.testing.assert_array_equal(strip_largest(eigs), [[0.1, 0.2], [0.0, 0.3]])
        with pytest.raises(ParameterOutOfRange):
            strip_largest(np.array([[0.3, 0.1]]))


class TestEdges:
    def test_bulk_edge_from_curve(self):
        grid = np.linspace(0, 1, 101)
        rho = np.where(grid < 0.4, 1.0, 0.0)
        curve = DensityCurve(grid=grid, rho=rho, origin="theory", norm_tol=1.0)
        edge = bulk_edge_from_curve(curve)
        assert 0.38 <= edge <= 0.4
        with pytest.raises(EmptyInput):
            bulk_edge_from_curve(DensityCurve(grid=grid, rho=np.zeros_like(grid),
                                              origin="theory", norm_tol=1.0))

    def test_pooled_quantile_edge(self):
        eigs = np.tile(np.arange(1000.0), (2, 1))
        assert pooled_quantile_edge(eigs, 0.999) >= 997.0


class TestSimulateEigenvalues:
    def test_threaded_matches_serial(self):
        corr = build_equal_cross(EqualCrossParams(6, 9, 0.5, 0.5, 0.2))
        cfg = EnsembleConfig(n=6, m=9, t=24, n_samples=16, seed=99)
        serial = simulate_eigenvalues(corr, cfg, n_jobs=1)
        threaded = simulate_eigenvalues(corr, cfg, n_jobs=4)
        np.testing.assert_array_equal(serial, threaded)
        assert serial.shape == (16, 6)
        assert np.all(np.diff(serial, axis=1) >= 0)


class TestCsvRoundTrips:
    def test_curve_round_trip(self, tmp_path):
        grid = np.linspace(0, 1, 20)
        rho = np.exp(-grid)
        curve = DensityCurve(grid=grid, rho=rho, origin="theory", norm_tol=1.0)
        path = tmp_path / "curve.csv"
        save_curve_csv(curve, path)
        header = path.read_text().splitlines()[0]
        assert header == "lambda,rho"
        loaded = load_curve_csv(path)
        np.testing.assert_allclose(loaded.grid, grid, rtol=1e-15)
        np.testing.assert_allclose(loaded.rho, rho, rtol=1e-15)

    def test_eigenvalues_csv(self, tmp_path):
        eigs = np.sort(np.random.default_rng(1).uniform(size=(5, 3)), axis=1)
        path = tmp_path / "eigs.csv"
        save_eigenvalues_csv(eigs, path)
        back = np.loadtxt(path, delimiter=",")
        np.testing.assert_allclose(back, eigs, rtol=1e-15)


class TestDensityCurveValidation:
    def test_rejects_negative_rho(self):
        with pytest.raises(ParameterOutOfRange):
            DensityCurve(grid=np.array([0.0, 1.0]), rho=np.array([-0.1, 0.2]),
                         origin="theory", norm_tol=1.0)

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ParameterOutOfRange):
            DensityCurve(grid=np.array([1.0, 0.0]), rho=np.array([0.1, 0.2]),
                         origin="theory", norm_tol=1.0)
