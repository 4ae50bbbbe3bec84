"""Cross-correlated Wishart spectra: Monte Carlo ensembles and resolvent theory."""

from . import config, corr_models, ensemble, moments, pastur, runner, spectra
from .config import ExperimentConfig, RunMode, validate_config
from .corr_models import (
    CrossKind,
    EqualCrossParams,
    PartitionedCorrelation,
    build_custom,
    build_equal_cross,
)
from .ensemble import EnsembleConfig
from .errors import XWishartError
from .pastur import SolverSettings, fixed_point_G, sweep_density
from .spectra import DensityCurve, OutlierStats

__version__ = "0.1.0"

__all__ = [
    "CrossKind",
    "DensityCurve",
    "EnsembleConfig",
    "EqualCrossParams",
    "ExperimentConfig",
    "OutlierStats",
    "PartitionedCorrelation",
    "RunMode",
    "SolverSettings",
    "XWishartError",
    "build_custom",
    "build_equal_cross",
    "config",
    "corr_models",
    "ensemble",
    "fixed_point_G",
    "moments",
    "pastur",
    "runner",
    "spectra",
    "sweep_density",
    "validate_config",
]
