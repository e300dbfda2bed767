"""Grid world state and the compiled per-cell model kernels.

The world is a toroidal grid of cells, each holding a food countdown and an
ordered list of resident agents. Agents are stored struct-of-arrays and
addressed by slot; cell membership is an intrusive doubly-linked list
(``head``/``tail`` per cell, ``nxt``/``prv`` per agent), so an agent's
position is its list membership and nothing else. Slot numbers are an
allocation artifact: agent identity is the (worker, serial) pair.

All per-token work runs in nogil kernels so worker threads execute in
parallel. Cross-worker mutation happens only when inserting an agent into a
cell (initial placement and movement); those inserts serialize on the
cell's spinlock. Everything else in a phase touches only cells owned by the
calling worker, which the scheduler guarantees.

Frozen draw schedule (one logical draw = one ``uniform_below`` call):

* cell init: availability draw ``uniform(2)`` (1 means food available);
  if unavailable, countdown draw ``1 + uniform(c_restart)``.
* agent creation: energy draw ``1 + uniform(2 * gain)``, then placement
  draw ``uniform(cells)``.
* movement: one direction draw ``uniform(5)`` (0 up, 1 down, 2 left,
  3 right, 4 stay), taken even when the agent then starves.
* acting: list shuffle draws (descending Fisher-Yates, ``k - 1`` draws for
  ``k >= 2`` residents), then per agent at most one reproduction draw
  ``uniform(100)``, taken only when energy exceeds the threshold.

Eating and food growth draw nothing.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .atomics import fetch_add, lock_acquire, lock_release
from .errors import ConfigurationError
from .params import PREY, DynamicsParams, SizeParams
from .rng import STATE_WORDS, make_state, uniform_below, worker_seed

#: Direction codes for the movement draw.
DIR_UP, DIR_DOWN, DIR_LEFT, DIR_RIGHT, DIR_STAY = 0, 1, 2, 3, 4

#: ``last_moved`` value of an agent that has never moved.
NEVER_MOVED = -1

_SCRATCH = 256  # per-worker snapshot buffer; kernels fall back to a fresh
# allocation for the rare cell holding more residents


@njit(cache=True, nogil=True)
def _record_draw(tape, tpos, n, value):
    p = tpos[0]
    if p < 0:
        return
    if p + 2 > tape.shape[0]:
        tpos[0] = -1  # overflow: caller checks and fails the run
        return
    tape[p] = n
    tape[p + 1] = value
    tpos[0] = p + 2


@njit(cache=True, nogil=True)
def _draw(state, n, tape, tpos, record):
    v = uniform_below(state, n)
    if record:
        _record_draw(tape, tpos, n, v)
    return v


@njit(cache=True, nogil=True)
def _list_append(head, tail, nxt, prv, cell, a):
    t = tail[cell]
    if t < 0:
        head[cell] = a
        prv[a] = -1
    else:
        nxt[t] = a
        prv[a] = t
    nxt[a] = -1
    tail[cell] = a


@njit(cache=True, nogil=True)
def _list_insert_ordered(head, tail, nxt, prv, idw, ids, cell, a):
    # keep the list sorted ascending by (worker, serial) so the final order
    # is independent of insertion arrival order
    aw = idw[a]
    as_ = ids[a]
    prev = -1
    cur = head[cell]
    while cur >= 0:
        cw = idw[cur]
        if cw > aw or (cw == aw and ids[cur] > as_):
            break
        prev = cur
        cur = nxt[cur]
    prv[a] = prev
    nxt[a] = cur
    if prev < 0:
        head[cell] = a
    else:
        nxt[prev] = a
    if cur < 0:
        tail[cell] = a
    else:
        prv[cur] = a


@njit(cache=True, nogil=True)
def _list_unlink(head, tail, nxt, prv, cell, a):
    p = prv[a]
    nx = nxt[a]
    if p < 0:
        head[cell] = nx
    else:
        nxt[p] = nx
    if nx < 0:
        tail[cell] = p
    else:
        prv[nx] = p


@njit(cache=True, nogil=True)
def _list_insert_canonical(head, tail, nxt, prv, akey_it, akey, cell, a, it):
    # arrivals of this movement phase stay sorted by (source token, snapshot
    # index) behind the resident block, reproducing the order a single
    # worker sweeping tokens in ascending order would append them in
    key = akey[a]
    cur = tail[cell]
    while cur >= 0 and akey_it[cur] == it and akey[cur] > key:
        cur = prv[cur]
    if cur < 0:
        nx = head[cell]
        head[cell] = a
        prv[a] = -1
    else:
        nx = nxt[cur]
        nxt[cur] = a
        prv[a] = cur
    nxt[a] = nx
    if nx < 0:
        tail[cell] = a
    else:
        prv[nx] = a


@njit(cache=True, nogil=True)
def _insert_locked(locks, head, tail, nxt, prv, idw, ids, cell, a, ordered):
    lock_acquire(locks, cell)
    if ordered:
        _list_insert_ordered(head, tail, nxt, prv, idw, ids, cell, a)
    else:
        _list_append(head, tail, nxt, prv, cell, a)
    lock_release(locks, cell)


@njit(cache=True, nogil=True)
def _unlink_locked(locks, head, tail, nxt, prv, cell, a):
    lock_acquire(locks, cell)
    _list_unlink(head, tail, nxt, prv, cell, a)
    lock_release(locks, cell)


@njit(cache=True, nogil=True)
def _snapshot_locked(locks, head, nxt, cell, buf):
    """Copy the cell's resident slots under its lock; returns (array, count)."""
    lock_acquire(locks, cell)
    k = 0
    a = head[cell]
    while a >= 0:
        k += 1
        a = nxt[a]
    snap = buf
    if k > buf.shape[0]:
        snap = np.empty(k, dtype=np.int32)
    i = 0
    a = head[cell]
    while a >= 0:
        snap[i] = a
        i += 1
        a = nxt[a]
    lock_release(locks, cell)
    return snap, k


@njit(cache=True, nogil=True)
def _alloc_slot(free, free_top, w, bump, capacity, err):
    t = free_top[w]
    if t > 0:
        free_top[w] = t - 1
        return np.int64(free[w, t - 1])
    s = fetch_add(bump, 0, 1)
    if s >= capacity:
        err[0] = 1
        return np.int64(-1)
    return s


@njit(cache=True, nogil=True)
def _free_slot(free, free_top, w, a):
    t = free_top[w]
    free[w, t] = a
    free_top[w] = t + 1


@njit(cache=True, nogil=True)
def init_cells_range(countdown, state, lo, hi, c_restart, tape, tpos, record, cov, track):
    """Initialize cell food for tokens [lo, hi): available with probability
    1/2, otherwise a countdown uniform on {1..c_restart}."""
    for t in range(lo, hi):
        if _draw(state, 2, tape, tpos, record) == 1:
            countdown[t] = 0
        else:
            countdown[t] = np.int32(1 + _draw(state, c_restart, tape, tpos, record))
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def set_neighbors_range(neigh, lo, hi, width, height, cov, track):
    """Link tokens [lo, hi) to their four torus neighbors."""
    for t in range(lo, hi):
        x = t % width
        y = t // width
        neigh[t, DIR_UP] = ((y - 1) % height) * width + x
        neigh[t, DIR_DOWN] = ((y + 1) % height) * width + x
        neigh[t, DIR_LEFT] = y * width + (x - 1) % width
        neigh[t, DIR_RIGHT] = y * width + (x + 1) % width
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def create_agents_range(
    head, tail, locks,
    kind, energy, alive, idw, ids, moved, nxt, prv,
    free, free_top, bump, err, serials,
    state, tape, tpos, record,
    lo, hi, w, kind_code, gain, n_cells, ordered,
    cov, track,
):
    """Create and place one agent per token in [lo, hi).

    Each agent draws energy uniform on {1..2*gain} then a uniformly random
    cell; insertion serializes per cell, ordered by id when requested.
    """
    for t in range(lo, hi):
        a = _alloc_slot(free, free_top, w, bump, kind.shape[0], err)
        if a < 0:
            return
        e = 1 + _draw(state, 2 * gain, tape, tpos, record)
        cell = _draw(state, n_cells, tape, tpos, record)
        kind[a] = kind_code
        energy[a] = np.int32(e)
        alive[a] = 1
        idw[a] = w
        ids[a] = serials[w]
        serials[w] += 1
        moved[a] = NEVER_MOVED
        _insert_locked(locks, head, tail, nxt, prv, idw, ids, cell, a, ordered)
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def move_grow_range(
    countdown, head, tail, neigh, locks,
    kind, energy, alive, idw, ids, moved, nxt, prv, akey_it, akey,
    free, free_top,
    state, tape, tpos, record,
    lo, hi, it, w, loss_prey, loss_predator, canonical, buf,
    cov, track,
):
    """Move the residents of cells [lo, hi), then grow their food.

    Each resident not yet moved this iteration draws a direction, pays its
    movement energy, and either starves (removed, slot freed) or relocates.
    Staying agents keep their list position. Arrivals stamped with the
    current iteration are skipped, so nothing moves twice. With
    ``canonical`` set, arrivals are kept in single-sweep order regardless of
    thread timing; otherwise they append in arrival order.
    """
    for t in range(lo, hi):
        snap, k = _snapshot_locked(locks, head, nxt, t, buf)
        for i in range(k):
            a = snap[i]
            if moved[a] == it:
                continue  # arrived here during this phase
            d = _draw(state, 5, tape, tpos, record)
            if kind[a] == PREY:
                e = energy[a] - loss_prey
            else:
                e = energy[a] - loss_predator
            moved[a] = it
            if e <= 0:
                energy[a] = 0
                alive[a] = 0
                _unlink_locked(locks, head, tail, nxt, prv, t, a)
                _free_slot(free, free_top, w, a)
            else:
                energy[a] = np.int32(e)
                if d != DIR_STAY:
                    dest = neigh[t, d]
                    _unlink_locked(locks, head, tail, nxt, prv, t, a)
                    if canonical:
                        akey_it[a] = it
                        akey[a] = np.int64(t) << 32 | np.int64(i)
                        lock_acquire(locks, dest)
                        _list_insert_canonical(head, tail, nxt, prv, akey_it, akey, dest, a, it)
                        lock_release(locks, dest)
                    else:
                        lock_acquire(locks, dest)
                        _list_append(head, tail, nxt, prv, dest, a)
                        lock_release(locks, dest)
        if countdown[t] > 0:
            countdown[t] -= 1
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def _accumulate_cell(countdown, head, kind, energy, moved, nxt, t, it, partial):
    # agents stamped beyond `it` already moved on and were observed by their
    # origin cell's owner; skip them so the snapshot stays consistent
    a = head[t]
    while a >= 0:
        if moved[a] <= it:
            if kind[a] == PREY:
                partial[0] += 1
                partial[3] += energy[a]
            else:
                partial[1] += 1
                partial[4] += energy[a]
        a = nxt[a]
    cd = countdown[t]
    if cd == 0:
        partial[2] += 1
    partial[5] += cd


@njit(cache=True, nogil=True)
def act_stats_range(
    countdown, head, tail, locks,
    kind, energy, alive, idw, ids, moved, nxt, prv,
    free, free_top, bump, err, serials,
    state, tape, tpos, record,
    lo, hi, it, w,
    gain_prey, gain_predator, rt_prey, rt_predator, rp_prey, rp_predator, c_restart,
    buf, dead, partial,
    cov, track,
):
    """Shuffle, act, and observe cells [lo, hi) for iteration ``it``.

    The cell's list is rewritten in Fisher-Yates order; agents act in that
    order (eat, then maybe reproduce). Newborns are appended, do not act,
    and may still be eaten. Eaten slots are freed only after the cell
    finishes so a newborn can never alias a snapshot entry.
    """
    for t in range(lo, hi):
        k = 0
        a = head[t]
        while a >= 0:
            k += 1
            a = nxt[a]
        snap = buf
        if k > buf.shape[0]:
            snap = np.empty(k, dtype=np.int32)
        i = 0
        a = head[t]
        while a >= 0:
            snap[i] = a
            i += 1
            a = nxt[a]

        for i in range(k - 1, 0, -1):
            j = _draw(state, i + 1, tape, tpos, record)
            tmp = snap[i]
            snap[i] = snap[j]
            snap[j] = tmp
        if k > 1:
            prev = -1
            for i in range(k):
                a = snap[i]
                prv[a] = prev
                if prev < 0:
                    head[t] = a
                else:
                    nxt[prev] = a
                prev = a
            nxt[prev] = -1
            tail[t] = prev

        graveyard = dead
        if k > dead.shape[0]:
            graveyard = np.empty(k, dtype=np.int32)
        n_dead = 0
        for i in range(k):
            a = snap[i]
            if alive[a] == 0:
                continue  # eaten earlier in this cell's turn order
            kd = kind[a]
            if kd == PREY:
                if countdown[t] == 0:
                    energy[a] += gain_prey
                    countdown[t] = c_restart
            else:
                p = head[t]
                while p >= 0:
                    if kind[p] == PREY:
                        break
                    p = nxt[p]
                if p >= 0:
                    alive[p] = 0
                    _list_unlink(head, tail, nxt, prv, t, p)
                    graveyard[n_dead] = p
                    n_dead += 1
                    energy[a] += gain_predator
            e = energy[a]
            threshold = rt_prey if kd == PREY else rt_predator
            if e > threshold:
                u = _draw(state, 100, tape, tpos, record)
                prob = rp_prey if kd == PREY else rp_predator
                if u < prob:
                    child = _alloc_slot(free, free_top, w, bump, kind.shape[0], err)
                    if child < 0:
                        return
                    ce = e // 2
                    energy[a] = np.int32(e - ce)
                    kind[child] = kd
                    energy[child] = np.int32(ce)
                    alive[child] = 1
                    idw[child] = w
                    ids[child] = serials[w]
                    serials[w] += 1
                    moved[child] = it
                    _list_append(head, tail, nxt, prv, t, child)

        _accumulate_cell(countdown, head, kind, energy, moved, nxt, t, it, partial)
        for i in range(n_dead):
            _free_slot(free, free_top, w, graveyard[i])
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def stats_range(countdown, head, locks, kind, energy, moved, nxt, lo, hi, it, partial, cov, track):
    """Standalone observation pass over cells [lo, hi) for iteration ``it``.

    Takes each cell's lock: under serialized controller points a fast
    worker may already be inserting movers while a slow worker still
    observes, and those arrivals must be skipped, not torn.
    """
    for t in range(lo, hi):
        lock_acquire(locks, t)
        _accumulate_cell(countdown, head, kind, energy, moved, nxt, t, it, partial)
        lock_release(locks, t)
        if track:
            cov[t] += 1


@njit(cache=True, nogil=True)
def od_move_grow(
    counter, total, block,
    countdown, head, tail, neigh, locks,
    kind, energy, alive, idw, ids, moved, nxt, prv, akey_it, akey,
    free, free_top,
    state, tape, tpos, record,
    it, w, loss_prey, loss_predator, canonical, buf,
    cov, track,
):
    """On-demand movement pass: claim blocks off the shared counter until done."""
    while True:
        c = fetch_add(counter, 0, block)
        if c >= total:
            break
        hi = c + block
        if hi > total:
            hi = total
        move_grow_range(
            countdown, head, tail, neigh, locks,
            kind, energy, alive, idw, ids, moved, nxt, prv, akey_it, akey,
            free, free_top,
            state, tape, tpos, record,
            c, hi, it, w, loss_prey, loss_predator, canonical, buf,
            cov, track,
        )


@njit(cache=True, nogil=True)
def od_act_stats(
    counter, total, block,
    countdown, head, tail, locks,
    kind, energy, alive, idw, ids, moved, nxt, prv,
    free, free_top, bump, err, serials,
    state, tape, tpos, record,
    it, w,
    gain_prey, gain_predator, rt_prey, rt_predator, rp_prey, rp_predator, c_restart,
    buf, dead, partial,
    cov, track,
):
    """On-demand act/observe pass: claim blocks off the shared counter."""
    while True:
        c = fetch_add(counter, 0, block)
        if c >= total:
            break
        hi = c + block
        if hi > total:
            hi = total
        act_stats_range(
            countdown, head, tail, locks,
            kind, energy, alive, idw, ids, moved, nxt, prv,
            free, free_top, bump, err, serials,
            state, tape, tpos, record,
            c, hi, it, w,
            gain_prey, gain_predator, rt_prey, rt_predator, rp_prey, rp_predator, c_restart,
            buf, dead, partial,
            cov, track,
        )


class World:
    """All mutable state of one simulation run.

    Arrays only; the scheduler decides who touches what when. Growth of the
    agent pool must happen while every worker is parked (barrier action or
    the single-threaded gap between cycles).
    """

    def __init__(
        self,
        size: SizeParams,
        dynamics: DynamicsParams,
        n_workers: int,
        global_seed: int,
        record_tape: bool = False,
        tape_capacity: int = 4_000_000,
        coverage: bool = False,
    ):
        if size.initial_prey > 0 and dynamics.gain_prey == 0:
            raise ConfigurationError("prey energy gain must be >= 1 to create prey")
        if size.initial_predators > 0 and dynamics.gain_predator == 0:
            raise ConfigurationError("predator energy gain must be >= 1 to create predators")
        self.size = size
        self.dynamics = dynamics
        self.n_workers = n_workers
        self.global_seed = global_seed

        n = size.cells
        self.countdown = np.zeros(n, dtype=np.int32)
        self.head = np.full(n, -1, dtype=np.int32)
        self.tail = np.full(n, -1, dtype=np.int32)
        self.neigh = np.zeros((n, 4), dtype=np.int32)
        self.locks = np.zeros(n, dtype=np.int32)

        self.capacity = max(4 * (size.initial_prey + size.initial_predators), 4096)
        self._alloc_agent_arrays(self.capacity)

        self.bump = np.zeros(1, dtype=np.int64)
        self.err = np.zeros(1, dtype=np.int64)
        self.serials = np.zeros(n_workers, dtype=np.int64)
        self.free_top = np.zeros(n_workers, dtype=np.int64)
        self.free = np.zeros((n_workers, self.capacity), dtype=np.int32)

        self.states = np.zeros((n_workers, STATE_WORDS), dtype=np.uint32)
        for w in range(n_workers):
            self.states[w] = make_state(worker_seed(global_seed, w))

        self.record_tape = record_tape
        if record_tape:
            self.tapes = [np.zeros(tape_capacity, dtype=np.int64) for _ in range(n_workers)]
            self.tape_pos = [np.zeros(1, dtype=np.int64) for _ in range(n_workers)]
        else:
            self.tapes = [np.zeros(2, dtype=np.int64) for _ in range(n_workers)]
            self.tape_pos = [np.zeros(1, dtype=np.int64) for _ in range(n_workers)]

        self.coverage = coverage
        self.cell_cov = np.zeros(n if coverage else 1, dtype=np.int32)
        self.prey_cov = np.zeros(size.initial_prey if coverage else 1, dtype=np.int32)
        self.pred_cov = np.zeros(size.initial_predators if coverage else 1, dtype=np.int32)

        self.snap_bufs = [np.zeros(_SCRATCH, dtype=np.int32) for _ in range(n_workers)]
        self.dead_bufs = [np.zeros(_SCRATCH, dtype=np.int32) for _ in range(n_workers)]

    def _alloc_agent_arrays(self, capacity: int) -> None:
        self.kind = np.zeros(capacity, dtype=np.int8)
        self.energy = np.zeros(capacity, dtype=np.int32)
        self.alive = np.zeros(capacity, dtype=np.uint8)
        self.idw = np.zeros(capacity, dtype=np.int32)
        self.ids = np.zeros(capacity, dtype=np.int64)
        self.moved = np.zeros(capacity, dtype=np.int32)
        self.nxt = np.full(capacity, -1, dtype=np.int32)
        self.prv = np.full(capacity, -1, dtype=np.int32)
        self.akey_it = np.zeros(capacity, dtype=np.int32)  # movement-arrival stamp
        self.akey = np.zeros(capacity, dtype=np.int64)  # (source token, snapshot index)

    def headroom(self) -> int:
        return int(self.capacity - self.bump[0] + self.free_top.sum())

    def ensure_headroom(self, need: int) -> None:
        """Grow the agent pool so at least ``need`` slots are available.

        Only safe while no kernel is running.
        """
        if self.headroom() >= need:
            return
        new_cap = max(2 * self.capacity, self.capacity + need)
        names = ("kind", "energy", "alive", "idw", "ids", "moved", "nxt", "prv", "akey_it", "akey")
        old = tuple(getattr(self, name) for name in names)
        used = self.capacity
        self._alloc_agent_arrays(new_cap)
        for name, src in zip(names, old):
            getattr(self, name)[:used] = src
        new_free = np.zeros((self.n_workers, new_cap), dtype=np.int32)
        new_free[:, : self.free.shape[1]] = self.free
        self.free = new_free
        self.capacity = new_cap

    def check_errors(self) -> None:
        if self.err[0] != 0:
            raise RuntimeError("agent pool exhausted mid-cycle (growth check failed)")
        if self.record_tape and any(int(tp[0]) < 0 for tp in self.tape_pos):
            raise RuntimeError("rng tape overflowed; raise tape_capacity or shrink the run")

    def tape_for(self, worker: int) -> list[tuple[int, int]]:
        """Recorded (bound, value) draw pairs of one worker, in draw order."""
        if not self.record_tape:
            raise ValueError("run was not recorded")
        end = int(self.tape_pos[worker][0])
        if end < 0:
            raise RuntimeError("rng tape overflowed")
        flat = self.tapes[worker][:end]
        return [(int(flat[i]), int(flat[i + 1])) for i in range(0, end, 2)]

    # -- inspection helpers (tests and the reference re-execution) ----------

    def cell_agents(self, token: int) -> list[int]:
        """Resident slots of one cell in list order."""
        out = []
        a = int(self.head[token])
        while a >= 0:
            out.append(a)
            a = int(self.nxt[a])
        return out

    def population(self) -> tuple[int, int]:
        prey = predators = 0
        for t in range(self.size.cells):
            for a in self.cell_agents(t):
                if self.kind[a] == PREY:
                    prey += 1
                else:
                    predators += 1
        return prey, predators
