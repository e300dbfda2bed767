"""Worker runtime: work providers, synchronization policy, and the run loop.

A run spawns N worker threads that all execute the same sequence: grid
setup, agent creation, an iteration-zero observation, then per iteration a
fused move/grow pass and a fused act/observe pass. Workers rendezvous at
eight numbered controller points whose behavior (no-op, serialized
pass-through, or full barrier) depends on the strategy:

============  ==================  ========  =============  =============
strategy      controller 1..8     provider  insert (init)  insert (move)
============  ==================  ========  =============  =============
st            - - - - - - - -     -         plain          plain
eq            S B S B S B B S     -         serialized     serialized
ex            S B S B S B B S     -         ordered        canonical
er            S B S B S B B S     B         ordered        plain
od            S B S B B B B S     S         serialized     serialized
============  ==================  ========  =============  =============

Point 6 is a barrier in every multithreaded strategy: nothing may act
before all movement and food growth of the iteration is done. During
setup, ordered insertion keeps each cell's list sorted by agent id; during
movement, ex places arrivals in canonical single-sweep order. Both make
the list state independent of thread timing, which is what keeps ex (and
er, whose row-distance gate removes move-time sharing entirely)
reproducible while eq and od are not, and makes every strategy collapse to
the single-threaded baseline at one worker.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import ConfigurationError, SimulationError
from .params import PREY, PREDATOR, DynamicsParams, SizeParams
from .stats import OutputRecord, OutputSeries

STRATEGIES = ("st", "eq", "ex", "er", "od")

#: Default on-demand block size; a good performer across sizes.
DEFAULT_BLOCK = 500

NONE, SERIAL, BARRIER = "none", "serialized", "barrier"
PLAIN, ORDERED, CANONICAL = "plain", "ordered", "canonical"


@dataclass(frozen=True)
class SyncPolicy:
    """How one strategy treats each synchronization point."""

    points: tuple[str, ...]  # controller points 1..8
    provider: str
    init_insert: str
    move_insert: str


POLICIES = {
    "st": SyncPolicy((NONE,) * 8, NONE, PLAIN, PLAIN),
    "eq": SyncPolicy(
        (SERIAL, BARRIER, SERIAL, BARRIER, SERIAL, BARRIER, BARRIER, SERIAL),
        NONE, SERIAL, SERIAL,
    ),
    "ex": SyncPolicy(
        (SERIAL, BARRIER, SERIAL, BARRIER, SERIAL, BARRIER, BARRIER, SERIAL),
        NONE, ORDERED, CANONICAL,
    ),
    "er": SyncPolicy(
        (SERIAL, BARRIER, SERIAL, BARRIER, SERIAL, BARRIER, BARRIER, SERIAL),
        BARRIER, ORDERED, PLAIN,
    ),
    "od": SyncPolicy(
        (SERIAL, BARRIER, SERIAL, BARRIER, BARRIER, BARRIER, BARRIER, SERIAL),
        SERIAL, SERIAL, SERIAL,
    ),
}


@dataclass(frozen=True)
class StrategyConfig:
    """Which parallelization strategy runs, and with what knobs."""

    kind: str
    workers: int = 1
    block: int = DEFAULT_BLOCK  # od only
    radius: int = 1  # er only: agent movement radius

    def __post_init__(self) -> None:
        if self.kind not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.kind!r}")
        if self.workers < 1:
            raise ConfigurationError("worker count must be >= 1")
        if self.kind == "st" and self.workers != 1:
            raise ConfigurationError("the single-threaded strategy runs exactly one worker")
        if self.kind == "od" and self.block < 1:
            raise ConfigurationError("on-demand block size must be >= 1")
        if self.radius < 1:
            raise ConfigurationError("movement radius must be >= 1")

    @property
    def policy(self) -> SyncPolicy:
        return POLICIES[self.kind]


def eq_token_range(total: int, workers: int, worker: int) -> tuple[int, int]:
    """Fixed token range of one worker under equal division.

    Every worker gets ``ceil(total / workers)`` tokens except the last,
    which takes the remainder; the ranges partition [0, total) exactly.
    """
    if total < 1:
        raise ValueError("token count must be >= 1")
    if not 0 <= worker < workers:
        raise ValueError(f"worker index {worker} out of range for {workers} workers")
    per = -(-total // workers)
    lo = min(per * worker, total)
    hi = min(per * (worker + 1), total)
    return lo, hi


@dataclass(frozen=True)
class RowGeometry:
    """Row-block layout for the row-synchronized strategy."""

    width: int
    height: int
    workers: int
    min_distance: int  # 2 * radius + 1
    max_workers: int
    rows_estimate: int
    rows_per_worker: int
    tokens_per_worker: int
    row_ranges: tuple[tuple[int, int], ...]  # absolute [start, end) rows per worker
    token_ranges: tuple[tuple[int, int], ...]


def er_geometry(width: int, height: int, workers: int, radius: int = 1) -> RowGeometry:
    """Row-block division with a safety distance between concurrent workers.

    Refuses worker counts beyond ``height // (2 * radius + 1)``: closer
    blocks could not keep the required distance.
    """
    if workers < 1:
        raise ConfigurationError("worker count must be >= 1")
    d_min = 2 * radius + 1
    n_max = height // d_min
    if workers > n_max:
        raise ConfigurationError(
            f"row-synchronized run refused: {workers} workers exceed the maximum "
            f"N_max={n_max} for height {height} and distance {d_min}"
        )
    dy = height // workers
    if height % workers > 0 and (workers - 1) * (dy + 1) <= height - d_min:
        dy_f = dy + 1
    else:
        dy_f = dy
    n = width * dy_f
    row_ranges = []
    token_ranges = []
    for i in range(workers):
        r_lo = dy_f * i
        r_hi = dy_f * (i + 1) if i < workers - 1 else height
        row_ranges.append((r_lo, r_hi))
        t_hi = n * (i + 1) if i < workers - 1 else width * height
        token_ranges.append((n * i, t_hi))
    return RowGeometry(
        width=width,
        height=height,
        workers=workers,
        min_distance=d_min,
        max_workers=n_max,
        rows_estimate=dy,
        rows_per_worker=dy_f,
        tokens_per_worker=n,
        row_ranges=tuple(row_ranges),
        token_ranges=tuple(token_ranges),
    )


class StaticRangeProvider:
    """Hands each worker the same fixed token range every cycle."""

    def __init__(self, total: int, workers: int):
        self.total = total
        self.ranges = [eq_token_range(total, workers, w) for w in range(workers)]

    def ranges_for(self, worker: int):
        lo, hi = self.ranges[worker]
        if lo < hi:
            yield lo, hi

    def end_cycle(self, worker: int) -> None:
        pass

    def abort(self) -> None:
        pass


class OnDemandProvider:
    """Shared atomic counter handing out fixed-size token blocks.

    ``next_block`` is the serialized Python access path; the per-iteration
    engine passes ``counter`` straight into compiled claim loops with
    identical fetch-and-add semantics. The counter resets once every worker
    has reported the end of its cycle.
    """

    def __init__(self, total: int, block: int, workers: int):
        if block < 1:
            raise ConfigurationError("block size must be >= 1")
        self.total = total
        self.block = block
        self.workers = workers
        self.counter = np.zeros(1, dtype=np.int64)
        self._lock = threading.Lock()
        self._finished = 0

    def next_block(self) -> tuple[int, int] | None:
        """Claim the next block; None signals the cycle is over."""
        with self._lock:
            lo = int(self.counter[0])
            self.counter[0] = lo + self.block
        if lo >= self.total:
            return None
        return lo, min(lo + self.block, self.total)

    def end_cycle(self, worker: int) -> None:
        with self._lock:
            self._finished += 1
            if self._finished == self.workers:
                self._finished = 0
                self.counter[0] = 0

    def abort(self) -> None:
        pass


class RowSyncProvider:
    """Row-granular provider: workers sweep their block row by row, each
    gated on the cyclically next worker keeping the safety distance ahead.

    A finished neighbor counts as infinitely far ahead. The torus seam is
    gated too: the last block's tail chases the first block's head. The end
    of every cycle is a full rendezvous that also resets the row frontiers.
    """

    def __init__(self, geometry: RowGeometry):
        self.geometry = geometry
        self._cond = threading.Condition()
        self._frontier = [lo for lo, _ in geometry.row_ranges]
        self._done = [False] * geometry.workers
        self._aborted = False
        self._rendezvous = threading.Barrier(geometry.workers, action=self._reset)

    def _reset(self) -> None:
        for w, (lo, _) in enumerate(self.geometry.row_ranges):
            self._frontier[w] = lo
            self._done[w] = False

    def clear_to_process(self, worker: int, row: int) -> bool:
        """Whether ``worker`` may process absolute ``row`` right now."""
        if self.geometry.workers == 1:
            return True
        nxt = (worker + 1) % self.geometry.workers
        if self._done[nxt]:
            return True
        ahead = (self._frontier[nxt] - row) % self.geometry.height
        return ahead >= self.geometry.min_distance

    def wait_for_row(self, worker: int, row: int) -> None:
        with self._cond:
            while not (self._aborted or self.clear_to_process(worker, row)):
                self._cond.wait()
            if self._aborted:
                raise SimulationError("row-synchronized provider aborted")

    def ranges_for(self, worker: int):
        width = self.geometry.width
        r_lo, r_hi = self.geometry.row_ranges[worker]
        if self.geometry.workers == 1:
            yield r_lo * width, r_hi * width
        else:
            for row in range(r_lo, r_hi):
                self.wait_for_row(worker, row)
                yield row * width, (row + 1) * width
                with self._cond:
                    self._frontier[worker] = row + 1
                    self._cond.notify_all()
        with self._cond:
            self._done[worker] = True
            self._cond.notify_all()

    def end_cycle(self, worker: int) -> None:
        self._rendezvous.wait()

    def abort(self) -> None:
        with self._cond:
            self._aborted = True
            self._cond.notify_all()
        self._rendezvous.abort()


class Controller:
    """The eight numbered synchronization points of the worker loop."""

    def __init__(self, workers: int, policy: SyncPolicy, actions: dict[int, object] | None = None):
        actions = actions or {}
        self.workers = workers
        self._points: list[tuple[str, object] | None] = []
        for i, kind in enumerate(policy.points, start=1):
            if kind == BARRIER:
                self._points.append((BARRIER, threading.Barrier(workers, action=actions.get(i))))
            elif kind == SERIAL:
                self._points.append((SERIAL, threading.Lock()))
            else:
                self._points.append(None)

    def sync(self, point: int) -> None:
        """Worker arrived at sync point 1..8; may block per policy."""
        entry = self._points[point - 1]
        if entry is None:
            return
        kind, gate = entry
        if kind == SERIAL:
            with gate:
                pass
        else:
            gate.wait()

    def abort(self) -> None:
        for entry in self._points:
            if entry is not None and entry[0] == BARRIER:
                entry[1].abort()


@dataclass
class RunResult:
    """What a finished run hands back to the harness."""

    series: OutputSeries
    wall_time: float
    global_seed: int
    strategy: StrategyConfig
    world: "model.World" = field(repr=False, default=None)


class Simulation:
    """One configured run: builds the world, spawns workers, collects output."""

    def __init__(
        self,
        size: SizeParams,
        dynamics: DynamicsParams,
        strategy: StrategyConfig,
        global_seed: int,
        *,
        record_tape: bool = False,
        tape_capacity: int = 4_000_000,
        coverage: bool = False,
    ):
        self.size = size
        self.dynamics = dynamics
        self.strategy = strategy
        self.global_seed = global_seed
        n = strategy.workers
        if record_tape and size.cells > 10_000:
            raise ConfigurationError("draw recording is supported for small grids only")

        self.geometry = None
        if strategy.kind == "er":
            self.geometry = er_geometry(size.width, size.height, n, strategy.radius)

        self.world = model.World(
            size, dynamics, n, global_seed,
            record_tape=record_tape, tape_capacity=tape_capacity, coverage=coverage,
        )
        self.policy = strategy.policy
        self._move_canonical = self.policy.move_insert == CANONICAL
        self._init_ordered = self.policy.init_insert == ORDERED

        if strategy.kind == "od":
            self._cells = OnDemandProvider(size.cells, strategy.block, n)
            self._prey = OnDemandProvider(size.initial_prey, strategy.block, n)
            self._predators = OnDemandProvider(size.initial_predators, strategy.block, n)
        elif strategy.kind == "er":
            self._cells = RowSyncProvider(self.geometry)
            self._prey = StaticRangeProvider(size.initial_prey, n) if size.initial_prey else None
            self._predators = (
                StaticRangeProvider(size.initial_predators, n) if size.initial_predators else None
            )
        else:
            self._cells = StaticRangeProvider(size.cells, n)
            self._prey = StaticRangeProvider(size.initial_prey, n) if size.initial_prey else None
            self._predators = (
                StaticRangeProvider(size.initial_predators, n) if size.initial_predators else None
            )

        self.records: list[OutputRecord] = []
        self._merge_lock = threading.Lock()
        self._acc = np.zeros(6, dtype=np.int64)
        self._merged = 0
        self._last_alive = size.initial_prey + size.initial_predators
        self._failures: list[tuple[int, BaseException]] = []
        self._fail_lock = threading.Lock()

        actions = {6: self._grow_if_needed} if n > 1 else {}
        self.controller = Controller(n, self.policy, actions)

    # -- merge / growth ------------------------------------------------------

    def _grow_if_needed(self) -> None:
        # every live agent may produce one child this act phase
        self.world.ensure_headroom(self._last_alive + 64)

    def _merge(self, partial: np.ndarray) -> None:
        with self._merge_lock:
            self._acc += partial
            self._merged += 1
            if self._merged == self.strategy.workers:
                record = OutputRecord.from_sums(self._acc, self.size.cells)
                self.records.append(record)
                self._last_alive = record.prey + record.predators
                self._acc[:] = 0
                self._merged = 0

    # -- kernel call plumbing ------------------------------------------------

    def _call_init(self, w: int, lo: int, hi: int) -> None:
        wd = self.world
        model.init_cells_range(
            wd.countdown, wd.states[w], lo, hi, self.dynamics.cell_restart,
            wd.tapes[w], wd.tape_pos[w], wd.record_tape, wd.cell_cov, wd.coverage,
        )

    def _call_neighbors(self, w: int, lo: int, hi: int) -> None:
        wd = self.world
        model.set_neighbors_range(
            wd.neigh, lo, hi, self.size.width, self.size.height, wd.cell_cov, wd.coverage
        )

    def _call_create(self, w: int, lo: int, hi: int, kind_code: int) -> None:
        wd = self.world
        gain = self.dynamics.gain(kind_code)
        cov = wd.prey_cov if kind_code == PREY else wd.pred_cov
        model.create_agents_range(
            wd.head, wd.tail, wd.locks,
            wd.kind, wd.energy, wd.alive, wd.idw, wd.ids, wd.moved, wd.nxt, wd.prv,
            wd.free, wd.free_top, wd.bump, wd.err, wd.serials,
            wd.states[w], wd.tapes[w], wd.tape_pos[w], wd.record_tape,
            lo, hi, w, kind_code, gain, self.size.cells, self._init_ordered,
            cov, wd.coverage,
        )

    def _call_move(self, w: int, lo: int, hi: int, it: int) -> None:
        wd = self.world
        dyn = self.dynamics
        model.move_grow_range(
            wd.countdown, wd.head, wd.tail, wd.neigh, wd.locks,
            wd.kind, wd.energy, wd.alive, wd.idw, wd.ids, wd.moved, wd.nxt, wd.prv,
            wd.akey_it, wd.akey,
            wd.free, wd.free_top,
            wd.states[w], wd.tapes[w], wd.tape_pos[w], wd.record_tape,
            lo, hi, it, w, dyn.loss_prey, dyn.loss_predator, self._move_canonical,
            wd.snap_bufs[w], wd.cell_cov, wd.coverage,
        )

    def _call_act(self, w: int, lo: int, hi: int, it: int, partial: np.ndarray) -> None:
        wd = self.world
        dyn = self.dynamics
        model.act_stats_range(
            wd.countdown, wd.head, wd.tail, wd.locks,
            wd.kind, wd.energy, wd.alive, wd.idw, wd.ids, wd.moved, wd.nxt, wd.prv,
            wd.free, wd.free_top, wd.bump, wd.err, wd.serials,
            wd.states[w], wd.tapes[w], wd.tape_pos[w], wd.record_tape,
            lo, hi, it, w,
            dyn.gain_prey, dyn.gain_predator,
            dyn.repro_threshold_prey, dyn.repro_threshold_predator,
            dyn.repro_prob_prey, dyn.repro_prob_predator, dyn.cell_restart,
            wd.snap_bufs[w], wd.dead_bufs[w], partial,
            wd.cell_cov, wd.coverage,
        )

    def _call_stats(self, w: int, lo: int, hi: int, it: int, partial: np.ndarray) -> None:
        wd = self.world
        model.stats_range(
            wd.countdown, wd.head, wd.locks, wd.kind, wd.energy, wd.moved, wd.nxt,
            lo, hi, it, partial, wd.cell_cov, wd.coverage,
        )

    # -- passes ----------------------------------------------------------------

    def _cell_pass(self, w: int, call, *extra) -> None:
        """Run one environment-parallel cycle over the cell tokens."""
        if self.strategy.kind == "od":
            while True:
                blk = self._cells.next_block()
                if blk is None:
                    break
                call(w, blk[0], blk[1], *extra)
        else:
            for lo, hi in self._cells.ranges_for(w):
                call(w, lo, hi, *extra)
        self._cells.end_cycle(w)
        self.world.check_errors()

    def _od_move_pass(self, w: int, it: int) -> None:
        wd = self.world
        dyn = self.dynamics
        model.od_move_grow(
            self._cells.counter, self.size.cells, self.strategy.block,
            wd.countdown, wd.head, wd.tail, wd.neigh, wd.locks,
            wd.kind, wd.energy, wd.alive, wd.idw, wd.ids, wd.moved, wd.nxt, wd.prv,
            wd.akey_it, wd.akey,
            wd.free, wd.free_top,
            wd.states[w], wd.tapes[w], wd.tape_pos[w], wd.record_tape,
            it, w, dyn.loss_prey, dyn.loss_predator, self._move_canonical,
            wd.snap_bufs[w], wd.cell_cov, wd.coverage,
        )
        self._cells.end_cycle(w)
        self.world.check_errors()

    def _od_act_pass(self, w: int, it: int, partial: np.ndarray) -> None:
        wd = self.world
        dyn = self.dynamics
        model.od_act_stats(
            self._cells.counter, self.size.cells, self.strategy.block,
            wd.countdown, wd.head, wd.tail, wd.locks,
            wd.kind, wd.energy, wd.alive, wd.idw, wd.ids, wd.moved, wd.nxt, wd.prv,
            wd.free, wd.free_top, wd.bump, wd.err, wd.serials,
            wd.states[w], wd.tapes[w], wd.tape_pos[w], wd.record_tape,
            it, w,
            dyn.gain_prey, dyn.gain_predator,
            dyn.repro_threshold_prey, dyn.repro_threshold_predator,
            dyn.repro_prob_prey, dyn.repro_prob_predator, dyn.cell_restart,
            wd.snap_bufs[w], wd.dead_bufs[w], partial,
            wd.cell_cov, wd.coverage,
        )
        self._cells.end_cycle(w)
        self.world.check_errors()

    def _agent_pass(self, w: int, kind_code: int) -> None:
        provider = self._prey if kind_code == PREY else self._predators
        if provider is None:
            return
        if self.strategy.kind == "od":
            while True:
                blk = provider.next_block()
                if blk is None:
                    break
                self._call_create(w, blk[0], blk[1], kind_code)
        else:
            for lo, hi in provider.ranges_for(w):
                self._call_create(w, lo, hi, kind_code)
        self.world.check_errors()

    # -- the worker loop ---------------------------------------------------

    def _worker_loop(self, w: int) -> None:
        ctl = self.controller
        single = self.strategy.workers == 1
        iterations = self.size.iterations

        ctl.sync(1)
        self._cell_pass(w, self._call_init)
        ctl.sync(2)
        self._cell_pass(w, self._call_neighbors)
        ctl.sync(3)
        self._agent_pass(w, PREY)
        self._agent_pass(w, PREDATOR)
        ctl.sync(4)
        partial = np.zeros(6, dtype=np.int64)
        self._cell_pass(w, self._call_stats, 0, partial)
        self._merge(partial)
        ctl.sync(5)
        for it in range(1, iterations + 1):
            if single:
                self._grow_if_needed()
            if self.strategy.kind == "od":
                self._od_move_pass(w, it)
            else:
                self._cell_pass(w, self._call_move, it)
            ctl.sync(6)  # barrier action grows the agent pool when needed
            partial = np.zeros(6, dtype=np.int64)
            if self.strategy.kind == "od":
                self._od_act_pass(w, it, partial)
            else:
                self._cell_pass(w, self._call_act, it, partial)
            self._merge(partial)
            ctl.sync(7)
        ctl.sync(8)

    def _worker_main(self, w: int) -> None:
        try:
            self._worker_loop(w)
        except threading.BrokenBarrierError:
            pass  # another worker failed; shut down quietly
        except BaseException as exc:  # noqa: BLE001 - must not hang siblings
            with self._fail_lock:
                self._failures.append((w, exc))
            self.controller.abort()
            self._cells.abort()

    def run(self) -> RunResult:
        """Execute the configured run; wall time covers the worker lifecycle."""
        threads = [
            threading.Thread(target=self._worker_main, args=(w,), name=f"worker-{w}")
            for w in range(self.strategy.workers)
        ]
        t0 = time.perf_counter()
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        wall = time.perf_counter() - t0
        if self._failures:
            w, exc = self._failures[0]
            raise SimulationError(f"worker {w} failed: {exc!r}") from exc
        if len(self.records) != self.size.iterations + 1:
            raise SimulationError(
                f"run produced {len(self.records)} records, expected {self.size.iterations + 1}"
            )
        if self.world.coverage:
            self._verify_coverage()
        series = OutputSeries(records=tuple(self.records))
        return RunResult(
            series=series,
            wall_time=wall,
            global_seed=self.global_seed,
            strategy=self.strategy,
            world=self.world,
        )

    def _verify_coverage(self) -> None:
        # every cell token: init + neighbors + iteration-zero stats + two
        # passes per iteration; every creation token exactly once
        expected = 3 + 2 * self.size.iterations
        bad = np.flatnonzero(self.world.cell_cov != expected)
        if bad.size:
            raise SimulationError(
                f"cell token {bad[0]} processed {self.world.cell_cov[bad[0]]} times, "
                f"expected {expected}"
            )
        for name, cov, count in (
            ("prey", self.world.prey_cov, self.size.initial_prey),
            ("predator", self.world.pred_cov, self.size.initial_predators),
        ):
            if count:
                off = np.flatnonzero(cov[:count] != 1)
                if off.size:
                    raise SimulationError(f"{name} token {off[0]} processed {cov[off[0]]} times")
