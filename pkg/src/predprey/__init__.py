"""Multithreaded predator-prey grid simulation with pluggable
parallelization strategies, reproducible per-worker random streams, and a
benchmark/validation harness."""

from .errors import ConfigurationError, SimulationError
from .params import (
    DEFAULT_ITERATIONS,
    DYNAMICS_PRESETS,
    PREDATOR,
    PREY,
    SIZE_PRESETS,
    STEADY_STATE_CUTOFF,
    DynamicsParams,
    SizeParams,
    size_preset,
)
from .rng import Generator, parse_seed, replication_seed, worker_seed
from .scheduling import (
    DEFAULT_BLOCK,
    POLICIES,
    STRATEGIES,
    RunResult,
    Simulation,
    StrategyConfig,
    eq_token_range,
    er_geometry,
)
from .stats import (
    OUTPUTS,
    STATISTICS,
    FocalMeasures,
    OutputRecord,
    OutputSeries,
    chi_square_sf,
    focal_measures,
    kruskal_wallis,
    read_series_csv,
    write_series_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "SimulationError",
    "DynamicsParams",
    "SizeParams",
    "size_preset",
    "DYNAMICS_PRESETS",
    "SIZE_PRESETS",
    "STEADY_STATE_CUTOFF",
    "DEFAULT_ITERATIONS",
    "PREY",
    "PREDATOR",
    "Generator",
    "replication_seed",
    "worker_seed",
    "parse_seed",
    "Simulation",
    "StrategyConfig",
    "RunResult",
    "STRATEGIES",
    "POLICIES",
    "DEFAULT_BLOCK",
    "eq_token_range",
    "er_geometry",
    "OutputRecord",
    "OutputSeries",
    "FocalMeasures",
    "OUTPUTS",
    "STATISTICS",
    "focal_measures",
    "kruskal_wallis",
    "chi_square_sf",
    "write_series_csv",
    "read_series_csv",
]
