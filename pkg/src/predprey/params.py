"""Model parameterization: grid/population sizes and species dynamics.

Two kinds of parameters configure a run: size-related (grid dimensions,
initial populations, iteration count) and dynamics-related (energy gains
and losses, reproduction thresholds and probabilities, food regrowth).
Named presets cover the standard benchmark sizes and the two reference
dynamics sets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError

PREY = 0
PREDATOR = 1

#: Default number of iterations per run.
DEFAULT_ITERATIONS = 4000

#: Iteration separating the transient from the steady state, per dynamics set.
STEADY_STATE_CUTOFF = {1: 1000, 2: 2000}


@dataclass(frozen=True)
class DynamicsParams:
    """Species dynamics: energy flow, reproduction, and food regrowth.

    Reproduction probabilities are integer percents in [0, 100]; a draw in
    {0..99} below the percent succeeds. ``cell_restart`` is the countdown a
    cell is reset to when its food is eaten.
    """

    gain_prey: int
    gain_predator: int
    loss_prey: int
    loss_predator: int
    repro_threshold_prey: int
    repro_threshold_predator: int
    repro_prob_prey: int
    repro_prob_predator: int
    cell_restart: int

    def __post_init__(self) -> None:
        if not (0 <= self.repro_prob_prey <= 100 and 0 <= self.repro_prob_predator <= 100):
            raise ConfigurationError("reproduction probabilities must be in [0, 100]")
        if self.repro_threshold_prey < 1 or self.repro_threshold_predator < 1:
            raise ConfigurationError("reproduction thresholds must be >= 1")
        if self.cell_restart < 1:
            raise ConfigurationError("cell restart countdown must be >= 1")
        if min(self.gain_prey, self.gain_predator, self.loss_prey, self.loss_predator) < 0:
            raise ConfigurationError("energy gains and losses must be >= 0")

    def gain(self, kind: int) -> int:
        return self.gain_prey if kind == PREY else self.gain_predator


#: The two reference dynamics sets used for cross-implementation checks.
DYNAMICS_PRESETS = {
    1: DynamicsParams(
        gain_prey=4,
        gain_predator=20,
        loss_prey=1,
        loss_predator=1,
        repro_threshold_prey=2,
        repro_threshold_predator=2,
        repro_prob_prey=4,
        repro_prob_predator=5,
        cell_restart=10,
    ),
    2: DynamicsParams(
        gain_prey=30,
        gain_predator=10,
        loss_prey=1,
        loss_predator=1,
        repro_threshold_prey=2,
        repro_threshold_predator=2,
        repro_prob_prey=10,
        repro_prob_predator=5,
        cell_restart=15,
    ),
}


@dataclass(frozen=True)
class SizeParams:
    """Grid dimensions, initial populations, and iteration count."""

    width: int
    height: int
    initial_prey: int
    initial_predators: int
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("grid dimensions must be positive")
        if self.initial_prey < 0 or self.initial_predators < 0:
            raise ConfigurationError("initial populations must be >= 0")
        if self.iterations < 1:
            raise ConfigurationError("iteration count must be positive")

    @property
    def cells(self) -> int:
        return self.width * self.height


def size_preset(size: int, iterations: int = DEFAULT_ITERATIONS) -> SizeParams:
    """Standard benchmark size: an N x N grid with proportional populations.

    The base size 100 carries 400 prey and 200 predators; populations scale
    with cell count.
    """
    if size < 1:
        raise ConfigurationError(f"invalid size preset {size}")
    factor = (size * size) // (100 * 100)
    if factor * 100 * 100 != size * size:
        raise ConfigurationError(f"size preset must be a multiple of 100, got {size}")
    return SizeParams(
        width=size,
        height=size,
        initial_prey=400 * factor,
        initial_predators=200 * factor,
        iterations=iterations,
    )


#: Benchmark sizes studied at desk scale.
SIZE_PRESETS = (100, 200, 400, 800, 1600)
