"""Model operation tests against the frozen draw schedule.

Each test predicts the kernel's draws by advancing a copy of the worker's
generator state, then asserts the kernel consumed exactly those draws and
produced the matching state change.
"""

import numpy as np
import pytest

from predprey import ConfigurationError, SizeParams, Simulation, StrategyConfig
from predprey.model import (
    DIR_LEFT,
    DIR_STAY,
    NEVER_MOVED,
    World,
    act_stats_range,
    create_agents_range,
    init_cells_range,
    move_grow_range,
    set_neighbors_range,
    stats_range,
)
from predprey.params import PREDATOR, PREY
from predprey.rng import uniform_below

from conftest import agents_of, dynamics, find_agent, make_world, spawn

NO_TAPE = (np.zeros(2, dtype=np.int64), np.zeros(1, dtype=np.int64), False)
NO_COV = (np.zeros(1, dtype=np.int32), False)


def run_init_cell(world, token, c_restart):
    init_cells_range(world.countdown, world.states[0], token, token + 1, c_restart, *NO_TAPE, *NO_COV)


def run_move(world, lo, hi, it, dyn, canonical=False):
    move_grow_range(
        world.countdown, world.head, world.tail, world.neigh, world.locks,
        world.kind, world.energy, world.alive, world.idw, world.ids, world.moved,
        world.nxt, world.prv, world.akey_it, world.akey,
        world.free, world.free_top,
        world.states[0], *NO_TAPE,
        lo, hi, it, 0, dyn.loss_prey, dyn.loss_predator, canonical, world.snap_bufs[0],
        *NO_COV,
    )


def run_act(world, lo, hi, it, dyn):
    partial = np.zeros(6, dtype=np.int64)
    act_stats_range(
        world.countdown, world.head, world.tail, world.locks,
        world.kind, world.energy, world.alive, world.idw, world.ids, world.moved,
        world.nxt, world.prv,
        world.free, world.free_top, world.bump, world.err, world.serials,
        world.states[0], *NO_TAPE,
        lo, hi, it, 0,
        dyn.gain_prey, dyn.gain_predator,
        dyn.repro_threshold_prey, dyn.repro_threshold_predator,
        dyn.repro_prob_prey, dyn.repro_prob_predator, dyn.cell_restart,
        world.snap_bufs[0], world.dead_bufs[0], partial,
        *NO_COV,
    )
    return partial


class TestInitCell:
    def test_both_branches_follow_the_draw_schedule(self):
        saw_available = saw_unavailable = False
        for seed in range(40):
            world = make_world(seed=seed)
            probe = world.states[0].copy()
            avail = uniform_below(probe, 2) == 1
            expect = 0 if avail else 1 + uniform_below(probe, 10)
            run_init_cell(world, 4, 10)
            assert world.countdown[4] == expect
            # exactly 1 or 2 draws consumed: the probe state must now match
            assert np.array_equal(world.states[0], probe)
            saw_available |= avail
            saw_unavailable |= not avail
        assert saw_available and saw_unavailable

    def test_singleton_countdown_range(self):
        # c_restart = 1: the unavailable branch always lands on 1
        for seed in range(30):
            world = make_world(seed=seed)
            run_init_cell(world, 0, 1)
            assert world.countdown[0] in (0, 1)

    def test_engine_initial_availability_is_about_half(self):
        size = SizeParams(width=50, height=50, initial_prey=0, initial_predators=0, iterations=1)
        world = World(size, dynamics(), 1, 99)
        init_cells_range(world.countdown, world.states[0], 0, 2500, 10, *NO_TAPE, *NO_COV)
        frac = (world.countdown == 0).mean()
        assert 0.44 < frac < 0.56
        assert world.countdown.max() <= 10 and world.countdown.min() >= 0


class TestSetNeighbors:
    def test_torus_wrap_on_small_grid(self):
        world = make_world(width=3, height=3)
        # token 0 is (0, 0): up wraps to (0, 2), left wraps to (2, 0)
        assert list(world.neigh[0]) == [6, 3, 2, 1]
        # token 4 is the center (1, 1)
        assert list(world.neigh[4]) == [1, 7, 3, 5]

    def test_single_column_wraps_to_self(self):
        world = make_world(width=1, height=4)
        assert world.neigh[0, DIR_LEFT] == 0


class TestCreateAgents:
    def run_create(self, world, kind, gain, lo=0, hi=1, ordered=False):
        create_agents_range(
            world.head, world.tail, world.locks,
            world.kind, world.energy, world.alive, world.idw, world.ids, world.moved,
            world.nxt, world.prv,
            world.free, world.free_top, world.bump, world.err, world.serials,
            world.states[0], *NO_TAPE,
            lo, hi, 0, kind, gain, world.size.cells, ordered,
            *NO_COV,
        )

    def test_energy_and_placement_follow_the_draw_schedule(self):
        for seed in range(25):
            world = make_world(seed=seed)
            probe = world.states[0].copy()
            expect_e = 1 + uniform_below(probe, 8)  # prey gain 4
            expect_cell = uniform_below(probe, 9)
            self.run_create(world, PREY, 4)
            assert agents_of(world, int(expect_cell)) == [(0, 0, PREY, int(expect_e))]
            assert np.array_equal(world.states[0], probe)
            assert world.moved[0] == NEVER_MOVED

    def test_energy_range_bounds(self):
        lows = set()
        for seed in range(60):
            world = make_world(seed=seed)
            self.run_create(world, PREY, 1)
            lows.add(int(world.energy[0]))
        assert lows == {1, 2}

    def test_predator_energy_passthrough(self):
        world = make_world(seed=3)
        probe = world.states[0].copy()
        expect_e = 1 + uniform_below(probe, 40)
        self.run_create(world, PREDATOR, 20)
        assert int(world.energy[0]) == int(expect_e)

    def test_serial_numbers_count_up(self):
        world = make_world(seed=5)
        self.run_create(world, PREY, 4, lo=0, hi=5)
        assert sorted(int(world.ids[a]) for a in range(5)) == [0, 1, 2, 3, 4]

    def test_zero_gain_refused_at_configuration(self):
        size = SizeParams(width=4, height=4, initial_prey=1, initial_predators=0, iterations=1)
        with pytest.raises(ConfigurationError):
            World(size, dynamics(gain_prey=0), 1, 1)


class TestMoveGrow:
    def test_starving_agent_dies_after_its_direction_draw(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=11)
        slot = spawn(world, 4, PREY, 1)
        probe = world.states[0].copy()
        uniform_below(probe, 5)  # the direction draw happens even here
        run_move(world, 4, 5, 1, dyn)
        assert np.array_equal(world.states[0], probe)
        assert world.alive[slot] == 0
        assert find_agent(world, slot) is None
        assert int(world.free_top[0]) == 1  # slot recycled

    def test_stay_keeps_position_and_pays_energy(self):
        dyn = dynamics()
        for seed in range(60):
            world = make_world(dyn=dyn, seed=seed)
            probe = world.states[0].copy()
            if uniform_below(probe, 5) != DIR_STAY:
                continue
            first = spawn(world, 4, PREY, 5)
            spawn(world, 4, PREY, 9)
            run_move(world, 4, 5, 1, dyn)
            assert world.energy[first] == 4  # lost one unit without leaving
            assert world.cell_agents(4)[0] == first  # list position kept
            assert world.moved[first] == 1
            break
        else:
            pytest.fail("no staying seed found")

    def test_left_move_wraps_around_the_torus(self):
        dyn = dynamics()
        for seed in range(60):
            world = make_world(dyn=dyn, seed=seed)
            probe = world.states[0].copy()
            if uniform_below(probe, 5) != DIR_LEFT:
                continue
            slot = spawn(world, 0, PREY, 5)  # (0, 0); left wraps to (2, 0)
            run_move(world, 0, 1, 1, dyn)
            assert find_agent(world, slot) == 2
            assert world.energy[slot] == 4
            break
        else:
            pytest.fail("no left-moving seed found")

    def test_already_moved_agents_are_skipped(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=2)
        slot = spawn(world, 4, PREY, 5, last_moved=1)
        before = world.states[0].copy()
        run_move(world, 4, 5, 1, dyn)
        assert np.array_equal(world.states[0], before)  # no draw
        assert world.energy[slot] == 5
        assert find_agent(world, slot) == 4

    def test_food_growth_decrements_to_zero_and_stops(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=2)
        world.countdown[0] = 3
        world.countdown[1] = 1
        world.countdown[2] = 0
        run_move(world, 0, 9, 1, dyn)
        assert world.countdown[0] == 2
        assert world.countdown[1] == 0
        assert world.countdown[2] == 0


class TestActCell:
    def test_empty_cell_draws_nothing(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=4)
        before = world.states[0].copy()
        partial = run_act(world, 0, 9, 1, dyn)
        assert np.array_equal(world.states[0], before)
        assert list(partial) == [0, 0, 9, 0, 0, 0]

    def test_prey_eats_only_when_food_available(self):
        dyn = dynamics(repro_threshold_prey=10**6)  # keep reproduction out
        world = make_world(dyn=dyn, seed=4)
        fed = spawn(world, 0, PREY, 2)
        starved = spawn(world, 1, PREY, 2)
        world.countdown[0] = 0
        world.countdown[1] = 3
        run_act(world, 0, 9, 1, dyn)
        assert world.energy[fed] == 6  # gained 4
        assert world.countdown[0] == dyn.cell_restart
        assert world.energy[starved] == 2
        assert world.countdown[1] == 3

    def test_two_prey_race_for_one_food_unit(self):
        dyn = dynamics(repro_threshold_prey=10**6)
        for seed in range(40):
            world = make_world(dyn=dyn, seed=seed)
            p1 = spawn(world, 4, PREY, 2)
            p2 = spawn(world, 4, PREY, 2)
            world.countdown[4] = 0
            probe = world.states[0].copy()
            j = uniform_below(probe, 2)  # the only shuffle draw for two agents
            first = p2 if j == 0 else p1  # swap puts p2 ahead when j == 0
            run_act(world, 4, 5, 1, dyn)
            assert world.energy[first] == 6
            assert world.energy[p1 if first == p2 else p2] == 2
            assert world.countdown[4] == dyn.cell_restart
            if j == 0:
                break
        else:
            pytest.fail("no swapping seed found")

    def test_predator_eats_first_living_prey_in_list_order(self):
        dyn = dynamics(repro_threshold_predator=10**6, repro_threshold_prey=10**6)
        seen_predator_first = False
        for seed in range(60):
            world = make_world(dyn=dyn, seed=seed)
            w = spawn(world, 4, PREDATOR, 5)
            p1 = spawn(world, 4, PREY, 3)
            p2 = spawn(world, 4, PREY, 3)
            # predict the post-shuffle order to know who should get eaten
            probe = world.states[0].copy()
            order = [w, p1, p2]
            for i in (2, 1):
                j = uniform_below(probe, i + 1)
                order[i], order[j] = order[j], order[i]
            prey_by_list = [a for a in order if a != w]
            run_act(world, 4, 5, 1, dyn)
            if order[0] != w:
                continue  # a prey acted first this seed; try another
            seen_predator_first = True
            eaten, survivor = prey_by_list[0], prey_by_list[1]
            assert world.alive[eaten] == 0
            assert world.alive[survivor] == 1
            assert world.energy[w] == 5 + dyn.gain_predator
            assert eaten not in world.cell_agents(4)
            break
        assert seen_predator_first, "no predator-first seed found"

    def test_eaten_prey_never_acts(self):
        # predator first, prey would have eaten food if it acted
        dyn = dynamics(repro_threshold_predator=10**6, repro_threshold_prey=10**6)
        for seed in range(80):
            world = make_world(dyn=dyn, seed=seed)
            w = spawn(world, 4, PREDATOR, 5)
            p = spawn(world, 4, PREY, 3)
            world.countdown[4] = 0
            probe = world.states[0].copy()
            if uniform_below(probe, 2) != 1:  # j == 1 keeps [w, p]
                continue
            run_act(world, 4, 5, 1, dyn)
            assert world.alive[p] == 0
            assert world.countdown[4] == 0  # food untouched: prey never acted
            return
        pytest.fail("no predator-first seed found")

    def test_reproduction_threshold_is_strict_and_drawless(self):
        dyn = dynamics(repro_threshold_prey=2, repro_prob_prey=100)
        world = make_world(dyn=dyn, seed=9)
        world.countdown[4] = 5  # no food: energy stays 2
        spawn(world, 4, PREY, 2)
        before = world.states[0].copy()
        run_act(world, 4, 5, 1, dyn)
        assert np.array_equal(world.states[0], before)  # no draw at E == threshold
        assert len(world.cell_agents(4)) == 1

    def test_reproduction_splits_energy_with_floor(self):
        dyn = dynamics(repro_threshold_prey=2, repro_prob_prey=100)
        world = make_world(dyn=dyn, seed=9)
        world.countdown[4] = 5
        parent = spawn(world, 4, PREY, 9)
        run_act(world, 4, 5, 3, dyn)
        residents = world.cell_agents(4)
        assert len(residents) == 2
        child = residents[1]  # appended after the parent
        assert world.energy[child] == 4
        assert world.energy[parent] == 5
        assert world.energy[child] + world.energy[parent] == 9
        assert world.moved[child] == 3  # stamped with the birth iteration
        assert (int(world.idw[child]), int(world.ids[child])) == (0, 1)

    def test_zero_probability_never_reproduces(self):
        dyn = dynamics(repro_threshold_prey=2, repro_prob_prey=0)
        world = make_world(dyn=dyn, seed=9)
        world.countdown[4] = 5
        spawn(world, 4, PREY, 50)
        probe = world.states[0].copy()
        uniform_below(probe, 100)  # threshold passed, so the draw still happens
        run_act(world, 4, 5, 1, dyn)
        assert len(world.cell_agents(4)) == 1
        assert np.array_equal(world.states[0], probe)

    def test_newborn_does_not_act_in_birth_iteration(self):
        # a newborn above threshold with certain reproduction would chain if
        # it acted; exactly one birth proves it did not
        dyn = dynamics(repro_threshold_prey=2, repro_prob_prey=100)
        world = make_world(dyn=dyn, seed=12)
        world.countdown[4] = 5
        spawn(world, 4, PREY, 20)
        run_act(world, 4, 5, 1, dyn)
        assert len(world.cell_agents(4)) == 2


class TestStatsPass:
    def test_counts_energies_and_food_indicator(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=4)
        spawn(world, 0, PREY, 7)
        world.countdown[0] = 3
        world.countdown[1] = 0
        partial = np.zeros(6, dtype=np.int64)
        stats_range(
            world.countdown, world.head, world.locks, world.kind, world.energy,
            world.moved, world.nxt, 0, 9, 0, partial, *NO_COV,
        )
        # one prey of energy 7; 8 of 9 cells have food (countdown zero)
        assert list(partial) == [1, 0, 8, 7, 0, 3]

    def test_agents_stamped_from_a_later_iteration_are_skipped(self):
        dyn = dynamics()
        world = make_world(dyn=dyn, seed=4)
        spawn(world, 0, PREY, 7, last_moved=1)  # already moved in iteration 1
        partial = np.zeros(6, dtype=np.int64)
        stats_range(
            world.countdown, world.head, world.locks, world.kind, world.energy,
            world.moved, world.nxt, 0, 9, 0, partial, *NO_COV,
        )
        assert list(partial) == [0, 0, 9, 0, 0, 0]


class TestRunInvariants:
    @pytest.mark.parametrize("strategy,workers", [("st", 1), ("ex", 2), ("od", 2)])
    def test_world_state_invariants_after_a_run(self, strategy, workers):
        size = SizeParams(width=20, height=20, initial_prey=60, initial_predators=30, iterations=40)
        dyn = dynamics()
        sim = Simulation(size, dyn, StrategyConfig(strategy, workers, block=37), 77)
        result = sim.run()
        world = sim.world
        assert world.countdown.min() >= 0 and world.countdown.max() <= dyn.cell_restart
        seen = set()
        alive_in_cells = 0
        for t in range(size.cells):
            for a in world.cell_agents(t):
                assert a not in seen, "agent resides in two cells"
                seen.add(a)
                assert world.alive[a] == 1
                assert world.energy[a] >= 1
                alive_in_cells += 1
        last = result.series.records[-1]
        assert alive_in_cells == last.prey + last.predators
        ids = {(int(world.idw[a]), int(world.ids[a])) for a in seen}
        assert len(ids) == len(seen), "agent ids not unique"
