"""End-to-end experiment pipeline: model, theory, ensemble, comparison.

Artifacts are written with fixed float formatting and hashed into a
manifest, so a given (config, seed) pair produces byte-identical outputs
regardless of thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import moments, pastur, spectra
from .config import ExperimentConfig, RunMode
from .corr_models import CrossKind, build_equal_cross
from .errors import ConfigInvalid, ConvergenceFailure, XWishartError

__all__ = ["RunResult", "run", "EXIT_OK", "EXIT_THRESHOLD", "EXIT_CONFIG", "EXIT_SOLVER"]

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

# Finite-size allowance on the asymptotic support edge: the largest bulk
# eigenvalue fluctuates on the soft-edge scale ~n^(-2/3), so separation is
# counted against a correspondingly widened edge.
_EDGE_FLUCTUATION_FACTOR = 2.0


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    output_dir: Path
    artifacts: dict
    report: moments.ComparisonReport | None


def _thread_count() -> int:
    raw = os.environ.get("XWISHART_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _cubic_cross_check(sweep: pastur.SweepResult, n_points: int = 30) -> float:
    """Max deviation of the fixed-point sweep from the closed-form cubic.

    Only meaningful for the uncorrelated model; recorded in diagnostics.
    """
    grid = sweep.curve.grid
    idx = np.linspace(0, grid.size - 1, n_points).astype(int)
    worst = 0.0
    prev = None
    for i in idx[::-1]:
        c = pastur.cubic_G_zeta0(complex(grid[i], sweep.epsilon), sweep.kn, sweep.km, prev=prev)
        prev = c
        worst = max(worst, abs(c - sweep.G[i]))
    return worst


def separation_edge(null_support_hi: float, n: int) -> float:
    """Bulk edge for outlier counting, widened by the soft-edge scale."""
    return null_support_hi * (1.0 + _EDGE_FLUCTUATION_FACTOR * n ** (-2.0 / 3.0))


def run(config: ExperimentConfig) -> RunResult:
    """Execute one experiment and write its artifact set.

    Exit code 0: all configured thresholds pass; 1: a threshold failed;
    2: config or model rejected; 3: solver failure.  Exceptions other
    than the mapped ones propagate.
    """
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigInvalid(f"cannot create output directory {out}: {exc}") from exc

    artifacts: dict[str, Path] = {}
    cfg = config.ensemble
    params = config.params
    rank_one = params.cross_kind is CrossKind.RANK_ONE and params.c > 0.0

    corr = build_equal_cross(params)  # ModelNotPositiveDefinite propagates (exit 2)
    _write_json(out / "model.json", corr.to_json_dict())
    artifacts["model"] = out / "model.json"

    settings = config.solver_settings()
    theory = None
    null_sweep = None
    if config.mode is not RunMode.MC_ONLY:
        theory = pastur.sweep_density(corr.zeta_eigs, cfg.kappa_n, cfg.kappa_m, settings)
        spectra.save_curve_csv(theory.curve, out / "theory_density.csv")
        artifacts["theory_density"] = out / "theory_density.csv"
        diagnostics = theory.diagnostics_dict()
        if np.all(corr.zeta_eigs == 0.0):
            diagnostics["cubic_max_dG"] = _cubic_cross_check(theory)
            if diagnostics["cubic_max_dG"] > 1e-8:
                raise ConvergenceFailure(
                    f"fixed-point sweep disagrees with the closed-form cubic by "
                    f"{diagnostics['cubic_max_dG']:.3e}"
                )
        if rank_one:
            null_sweep = pastur.sweep_density([0.0], cfg.kappa_n, cfg.kappa_m, settings)
            spectra.save_curve_csv(null_sweep.curve, out / "null_density.csv")
            artifacts["null_density"] = out / "null_density.csv"
            diagnostics["null_support_hi"] = null_sweep.support_hi
            diagnostics["separation_edge"] = separation_edge(null_sweep.support_hi, cfg.n)
        _write_json(out / "theory_diagnostics.json", diagnostics)
        artifacts["theory_diagnostics"] = out / "theory_diagnostics.json"

    eigs = None
    if config.mode is not RunMode.THEORY_ONLY:
        eigs = spectra.simulate_eigenvalues(corr, cfg, n_jobs=_thread_count())
        if config.save_eigenvalues:
            spectra.save_eigenvalues_csv(eigs, out / "eigenvalues.csv")
            artifacts["eigenvalues"] = out / "eigenvalues.csv"
        empirical_all = spectra.empirical_density(eigs)
        spectra.save_curve_csv(empirical_all, out / "empirical_density.csv")
        artifacts["empirical_density"] = out / "empirical_density.csv"

    report = None
    if config.mode is RunMode.FULL and theory is not None and eigs is not None:
        if rank_one and null_sweep is not None:
            edge = separation_edge(null_sweep.support_hi, cfg.n)
            bulk_eigs = spectra.strip_largest(eigs)
            empirical_bulk = spectra.empirical_density(bulk_eigs)
            spectra.save_curve_csv(empirical_bulk, out / "empirical_bulk_density.csv")
            artifacts["empirical_bulk_density"] = out / "empirical_bulk_density.csv"
            stats = spectra.outlier_stats(eigs, edge)
            counts = spectra.separation_counts(eigs, edge)
            outlier_doc = stats.to_json_dict()
            outlier_doc["separation_edge"] = edge
            outlier_doc["fraction_exactly_one_above"] = float(np.mean(counts == 1))
            _write_json(out / "outlier_stats.json", outlier_doc)
            artifacts["outlier_stats"] = out / "outlier_stats.json"
            # Distance is bulk against bulk: the island beyond the
            # separation edge mirrors the stripped outlier and is excluded
            # from both sides; normalization and moments use the full curve.
            report = moments.compare_empirical_theory(
                empirical_bulk, theory.curve, eigs,
                cfg.kappa_n, cfg.kappa_m, corr.zeta_eigs, config.thresholds,
                distance_region=(None, edge),
            )
        else:
            report = moments.compare_empirical_theory(
                empirical_all, theory.curve, eigs,
                cfg.kappa_n, cfg.kappa_m, corr.zeta_eigs, config.thresholds,
            )
        _write_json(out / "comparison.json", report.to_json_dict())
        artifacts["comparison"] = out / "comparison.json"

    manifest = {
        "mode": config.mode.value,
        "model": corr.to_json_dict(),
        "dims": {"n": cfg.n, "m": cfg.m, "t": cfg.t},
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "files": {name: {"path": path.name, "sha256": _sha256(path)}
                  for name, path in sorted(artifacts.items())},
    }
    _write_json(out / "manifest.json", manifest)
    artifacts["manifest"] = out / "manifest.json"

    exit_code = EXIT_OK
    if report is not None and not report.passed:
        exit_code = EXIT_THRESHOLD
    return RunResult(exit_code=exit_code, output_dir=out, artifacts=artifacts, report=report)


def run_raw(raw_config, overrides: dict | None = None) -> RunResult:
    """Validate a raw config (dict or path) and run it, mapping errors to exits."""
    from .config import validate_config

    config = validate_config(raw_config, overrides)
    return run(config)


def exit_code_for_exception(exc: XWishartError) -> int:
    if isinstance(exc, ConvergenceFailure):
        return EXIT_SOLVER
    return EXIT_CONFIG
