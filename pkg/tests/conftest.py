"""Shared helpers: hand-built toy worlds for kernel-level tests."""

import pytest

from predprey import DynamicsParams, SizeParams
from predprey.model import NEVER_MOVED, World, set_neighbors_range


def dynamics(
    gain_prey=4,
    gain_predator=20,
    loss_prey=1,
    loss_predator=1,
    repro_threshold_prey=2,
    repro_threshold_predator=2,
    repro_prob_prey=4,
    repro_prob_predator=5,
    cell_restart=10,
):
    return DynamicsParams(
        gain_prey=gain_prey,
        gain_predator=gain_predator,
        loss_prey=loss_prey,
        loss_predator=loss_predator,
        repro_threshold_prey=repro_threshold_prey,
        repro_threshold_predator=repro_threshold_predator,
        repro_prob_prey=repro_prob_prey,
        repro_prob_predator=repro_prob_predator,
        cell_restart=cell_restart,
    )


def make_world(width=3, height=3, dyn=None, workers=1, seed=7, iterations=5):
    """Empty toy world with neighbor links resolved."""
    size = SizeParams(
        width=width, height=height, initial_prey=0, initial_predators=0, iterations=iterations
    )
    world = World(size, dyn or dynamics(), workers, seed)
    set_neighbors_range(world.neigh, 0, size.cells, width, height, world.cell_cov, False)
    return world


def spawn(world, cell, kind, energy, worker=0, last_moved=NEVER_MOVED):
    """Hand-place one agent, bypassing the creation kernel."""
    slot = int(world.bump[0])
    world.bump[0] += 1
    world.kind[slot] = kind
    world.energy[slot] = energy
    world.alive[slot] = 1
    world.idw[slot] = worker
    world.ids[slot] = int(world.serials[worker])
    world.serials[worker] += 1
    world.moved[slot] = last_moved
    tail = int(world.tail[cell])
    if tail < 0:
        world.head[cell] = slot
        world.prv[slot] = -1
    else:
        world.nxt[tail] = slot
        world.prv[slot] = tail
    world.nxt[slot] = -1
    world.tail[cell] = slot
    return slot


def agents_of(world, cell):
    """(worker, serial, kind, energy) tuples of a cell's residents in order."""
    return [
        (int(world.idw[a]), int(world.ids[a]), int(world.kind[a]), int(world.energy[a]))
        for a in world.cell_agents(cell)
    ]


def find_agent(world, slot):
    """Which cell holds ``slot``, or None."""
    for t in range(world.size.cells):
        if slot in world.cell_agents(t):
            return t
    return None


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile the kernels once so per-test timings stay readable."""
    from predprey import DYNAMICS_PRESETS, Simulation, StrategyConfig

    tiny = SizeParams(width=8, height=8, initial_prey=10, initial_predators=5, iterations=3)
    for cfg in (StrategyConfig("st", 1), StrategyConfig("od", 2, block=16)):
        Simulation(tiny, DYNAMICS_PRESETS[1], cfg, 1234).run()
    yield
