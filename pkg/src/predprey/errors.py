"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A run configuration is invalid or refused (e.g. too many workers)."""


class SimulationError(RuntimeError):
    """A worker failed mid-run; the simulation was shut down."""
