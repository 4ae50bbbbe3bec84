"""Experiment configuration: schema, presets, strict validation."""

from __future__ import annotations

import enum
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corr_models import CrossKind, EqualCrossParams
from .ensemble import EnsembleConfig
from .errors import ConfigInvalid, ParameterOutOfRange
from .pastur import SolverSettings

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "RunMode",
    "load_config_file",
    "preset_config",
    "validate_config",
]


class RunMode(str, enum.Enum):
    THEORY_ONLY = "theory-only"
    MC_ONLY = "mc-only"
    FULL = "full"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment description."""

    params: EqualCrossParams
    ensemble: EnsembleConfig
    mode: RunMode
    output_dir: Path
    solver_overrides: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    save_eigenvalues: bool = False

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(**self.solver_overrides)


_TOP_KEYS = {"model", "dims", "n_samples", "seed", "mode", "output_dir",
             "solver", "thresholds", "save_eigenvalues"}
_MODEL_KEYS = {"a", "b", "c", "cross_kind"}
_DIMS_KEYS = {"n", "m", "t", "total", "t_factor"}
_SOLVER_KEYS = {"epsilon", "damping", "tol", "max_iter", "n_grid",
                "margin_min", "margin_factor"}
_THRESHOLD_KEYS = {"l1", "first_moment_rel", "normalization"}

# Full-scale reproduction presets (total dimension 1024, ensemble 1000)
# and quarter-scale desk variants for CI (total 256, ensemble 200).
# The rank-one family uses a = b = 0.9: with c = 0.8 the equal-cross
# coefficients must satisfy c^2 < a*b for the model to be admissible.
_FIG1_MODEL = {"a": 0.9, "b": 0.9, "c": 0.8, "cross_kind": "rank_one"}
_FIG2_MODEL = {"a": 0.5, "b": 0.5, "c": 0.05, "cross_kind": "exp_decay"}

PRESETS: dict[str, dict] = {
    "fig1a": {
        "model": dict(_FIG1_MODEL),
        "dims": {"total": 1024, "n": 384, "t_factor": 5},
        "n_samples": 1000,
        "seed": 20260101,
    },
    "fig1b": {
        "model": dict(_FIG1_MODEL),
        "dims": {"total": 1024, "n": 256, "t_factor": 5},
        "n_samples": 1000,
        "seed": 20260102,
    },
    "fig2a": {
        "model": dict(_FIG2_MODEL),
        "dims": {"total": 1024, "n": 384, "t_factor": 5},
        "n_samples": 1000,
        "seed": 20260103,
    },
    "fig2b": {
        "model": dict(_FIG2_MODEL),
        "dims": {"total": 1024, "n": 256, "t_factor": 5},
        "n_samples": 1000,
        "seed": 20260104,
    },
    "desk-fig1": {
        "model": dict(_FIG1_MODEL),
        "dims": {"total": 256, "n": 96, "t_factor": 5},
        "n_samples": 200,
        "seed": 20260105,
    },
    "desk-fig2": {
        "model": dict(_FIG2_MODEL),
        "dims": {"total": 256, "n": 96, "t_factor": 5},
        "n_samples": 200,
        "seed": 20260106,
    },
}


def load_config_file(path) -> dict:
    """Parse a TOML or JSON config file into a raw dictionary."""
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file not found: {path}")
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"invalid JSON in {path}: {exc}") from exc
    try:
        return tomllib.loads(data.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        if path.suffix.lower() == ".toml":
            raise ConfigInvalid(f"invalid TOML in {path}: {exc}") from exc
        try:
            return json.loads(data)
        except json.JSONDecodeError:
            raise ConfigInvalid(f"{path} is neither valid TOML nor valid JSON") from exc


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigInvalid(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return json.loads(json.dumps(PRESETS[name]))  # deep copy


def _resolve_dims(dims: dict, errors: list[str]) -> tuple[int, int, int]:
    unknown = set(dims) - _DIMS_KEYS
    if unknown:
        errors.append(f"dims: unknown fields {sorted(unknown)}")
    n = dims.get("n")
    if n is None:
        errors.append("dims.n: required")
        return 0, 0, 0
    if "total" in dims:
        if "m" in dims:
            errors.append("dims: give either m or total, not both")
        m = int(dims["total"]) - int(n)
    elif "m" in dims:
        m = int(dims["m"])
    else:
        errors.append("dims: need m or total")
        return 0, 0, 0
    if "t" in dims and "t_factor" in dims:
        errors.append("dims: give either t or t_factor, not both")
    if "t" in dims:
        t = int(dims["t"])
    elif "t_factor" in dims:
        t = int(dims["t_factor"]) * (int(n) + m)
    else:
        errors.append("dims: need t or t_factor")
        return 0, 0, 0
    return int(n), m, t


def validate_config(raw: dict | str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Normalize and validate a raw config (dict or file path).

    Unknown fields are rejected.  ``overrides`` may replace ``seed``,
    ``mode`` and ``output_dir`` (command-line switches).
    """
    if not isinstance(raw, dict):
        raw = load_config_file(raw)
    errors: list[str] = []
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown fields {sorted(unknown)}")

    model = raw.get("model", {})
    if not isinstance(model, dict):
        errors.append("model: must be a table")
        model = {}
    unknown = set(model) - _MODEL_KEYS
    if unknown:
        errors.append(f"model: unknown fields {sorted(unknown)}")

    dims = raw.get("dims")
    if not isinstance(dims, dict):
        errors.append("dims: required table with n, m/total and t/t_factor")
        dims = {}
    n, m, t = _resolve_dims(dims, errors)

    overrides = overrides or {}
    seed = overrides.get("seed", raw.get("seed"))
    if seed is None:
        errors.append("seed: required")
        seed = 0
    n_samples = raw.get("n_samples")
    if n_samples is None:
        errors.append("n_samples: required")
        n_samples = 1

    mode_raw = str(overrides.get("mode", raw.get("mode", "full")))
    normalized = mode_raw.lower().replace("_", "-").replace("only", "-only").replace("--", "-")
    try:
        mode = RunMode(normalized)
    except ValueError:
        errors.append(f"mode: {mode_raw!r} is not one of full, theory-only, mc-only")
        mode = RunMode.FULL

    solver = raw.get("solver", {})
    if not isinstance(solver, dict):
        errors.append("solver: must be a table")
        solver = {}
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        errors.append(f"solver: unknown fields {sorted(unknown)}")
        solver = {k: v for k, v in solver.items() if k in _SOLVER_KEYS}

    thresholds = raw.get("thresholds", {})
    if not isinstance(thresholds, dict):
        errors.append("thresholds: must be a table")
        thresholds = {}
    unknown = set(thresholds) - _THRESHOLD_KEYS
    if unknown:
        errors.append(f"thresholds: unknown fields {sorted(unknown)}")

    output_dir = Path(overrides.get("output_dir", raw.get("output_dir", "xwishart-out")))
    save_eigenvalues = bool(raw.get("save_eigenvalues", False))

    params = None
    ensemble = None
    if not errors:
        try:
            params = EqualCrossParams(
                n=n, m=m,
                a=float(model.get("a", 0.5)),
                b=float(model.get("b", 0.5)),
                c=float(model.get("c", 0.0)),
                cross_kind=CrossKind(str(model.get("cross_kind", "rank_one"))),
            )
        except (ParameterOutOfRange, ValueError) as exc:
            errors.append(f"model: {exc}")
        try:
            ensemble = EnsembleConfig(n=n, m=m, t=t, n_samples=int(n_samples), seed=int(seed))
        except (ParameterOutOfRange, ValueError) as exc:
            errors.append(f"dims/ensemble: {exc}")
        if not errors:
            try:
                SolverSettings(**solver)
            except (ParameterOutOfRange, TypeError) as exc:
                errors.append(f"solver: {exc}")

    if errors:
        raise ConfigInvalid("invalid experiment config:\n  " + "\n  ".join(errors),
                            field_errors=errors)
    return ExperimentConfig(
        params=params,
        ensemble=ensemble,
        mode=mode,
        output_dir=output_dir,
        solver_overrides=dict(solver),
        thresholds=dict(thresholds),
        save_eigenvalues=save_eigenvalues,
    )
