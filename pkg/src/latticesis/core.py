"""SIS dynamics of random-walking agents on an L x L torus.

One tick is ``move -> infect -> heal``:

* move: each agent, in id order, draws one of (+1,0), (-1,0), (0,+1), (0,-1)
  with ``uniform_index(4)`` and steps there modulo L.
* infect: flags are snapshotted on entry.  Sites are visited in row-major
  order (``site = y * L + x``); at a site holding ``k > 0`` snapshot-infected
  agents, each healthy agent (ascending id) is infected with probability
  ``1 - (1 - p)**k`` using a single Bernoulli draw.  This is the same law as
  ``k`` independent Bernoulli(p) trials, one per infected co-occupant.
  Agents infected during the pass are not sources until the next tick.
* heal: every agent infected after the infection pass, in id order, heals
  with probability q.  An agent infected this tick can therefore heal in the
  same tick, exactly as in the single-agent chain of the mean-field model
  (H -> I has probability p'(1 - q)).  Exempting new infections would let the
  epidemic survive even at q = 1 by passing the infection on each tick.

A world with no infected agents only moves.

The per-site occupancy index is a compressed bucket table rebuilt by a
counting sort after every move (O(N + L**2), no per-agent branching):
``members[start[s]:start[s + 1]]`` lists the agents on site ``s`` in id order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from . import rng as _rng
from .rng import RngStream, derive

__all__ = [
    "SimParams",
    "World",
    "init_uniform",
    "step_move",
    "step_infect",
    "step_heal",
    "tick",
    "advance",
    "infected_fraction",
]

# order matches the draw value of uniform_index(4)
MOVES = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64)


@dataclass(frozen=True)
class SimParams:
    """Parameters of a single run.  ``density`` is derived from L and N."""

    lattice_side: int
    agent_count: int
    infect_prob: float
    heal_prob: float
    initial_infected_fraction: float = 0.2
    max_steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if int(self.lattice_side) < 1:
            raise ValueError(f"lattice_side must be >= 1, got {self.lattice_side}")
        if int(self.agent_count) < 1:
            raise ValueError(f"agent_count must be >= 1, got {self.agent_count}")
        if int(self.max_steps) < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        for name in ("infect_prob", "heal_prob", "initial_infected_fraction"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def from_density(cls, lattice_side: int, density: float, infect_prob: float,
                     heal_prob: float, **kwargs) -> "SimParams":
        """Build params with ``N = round(density * L**2)``."""
        if density <= 0:
            raise ValueError(f"density must be positive, got {density}")
        n = round(density * lattice_side * lattice_side)
        return cls(lattice_side, max(int(n), 1), infect_prob, heal_prob, **kwargs)

    @property
    def density(self) -> float:
        return self.agent_count / (self.lattice_side * self.lattice_side)

    @property
    def initial_infected(self) -> int:
        # round() is half-to-even
        return int(round(self.initial_infected_fraction * self.agent_count))

    def replace(self, **changes) -> "SimParams":
        return replace(self, **changes)


# -- compiled kernels --------------------------------------------------------

@nb.njit(cache=True)
def _build_index(L, site, start, members):
    """Counting sort of agents by site: ``members[start[s]:start[s+1]]`` are
    the ids at site ``s``, ascending."""
    start[:] = 0
    for a in range(site.shape[0]):
        start[site[a] + 1] += 1
    for s in range(L * L):
        start[s + 1] += start[s]
    for a in range(site.shape[0]):
        s = site[a]
        members[start[s]] = a
        start[s] += 1
    for s in range(L * L, 0, -1):
        start[s] = start[s - 1]
    start[0] = 0


@nb.njit(cache=True)
def _init_kernel(state, L, n_infected, x, y, infected, perm):
    n = x.shape[0]
    for a in range(n):
        x[a] = _rng.uniform_index(state, L)
        y[a] = _rng.uniform_index(state, L)
    for a in range(n):
        perm[a] = a
    # partial Fisher-Yates: the first n_infected entries are a uniform sample
    for i in range(n_infected):
        j = i + _rng.uniform_index(state, n - i)
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    infected[:] = False
    for i in range(n_infected):
        infected[perm[i]] = True


@nb.njit(cache=True)
def _move_kernel(state, L, x, y, site, start, members, moves):
    for a in range(x.shape[0]):
        d = _rng.uniform_index(state, 4)
        nx = x[a] + moves[d, 0]
        ny = y[a] + moves[d, 1]
        if nx == L:
            nx = 0
        elif nx < 0:
            nx = L - 1
        if ny == L:
            ny = 0
        elif ny < 0:
            ny = L - 1
        x[a] = nx
        y[a] = ny
        site[a] = ny * L + nx
    _build_index(L, site, start, members)


@nb.njit(cache=True)
def _infect_kernel(state, p, start, members, infected, snapshot):
    """Return the number of new infections."""
    new = 0
    for s in range(start.shape[0] - 1):
        lo = start[s]
        hi = start[s + 1]
        if hi - lo < 2:
            continue
        k = 0
        for i in range(lo, hi):
            if snapshot[members[i]]:
                k += 1
        if k == 0 or k == hi - lo:
            continue
        escape = 1.0
        for _ in range(k):
            escape *= 1.0 - p
        prob = 1.0 - escape
        for i in range(lo, hi):
            a = members[i]
            if not snapshot[a] and _rng.bernoulli(state, prob):
                infected[a] = True
                new += 1
    return new


@nb.njit(cache=True)
def _heal_kernel(state, q, infected):
    """Return the number of healed agents."""
    healed = 0
    for a in range(infected.shape[0]):
        if infected[a] and _rng.bernoulli(state, q):
            infected[a] = False
            healed += 1
    return healed


@nb.njit(cache=True)
def _run_kernel(state, L, p, q, x, y, site, start, members, infected,
                snapshot, moves, count, n_ticks, record):
    """Advance ``n_ticks`` full ticks, writing infected counts to ``record``.

    Stops at absorption; returns the number of ticks actually simulated.
    Remaining ``record`` entries are left untouched.
    """
    for t in range(n_ticks):
        if count == 0:
            return t
        _move_kernel(state, L, x, y, site, start, members, moves)
        snapshot[:] = infected
        count += _infect_kernel(state, p, start, members, infected, snapshot)
        count -= _heal_kernel(state, q, infected)
        record[t] = count
    return n_ticks


# -- world -------------------------------------------------------------------

class World:
    """Mutable simulation state.

    Attributes
    ----------
    params : SimParams
    x, y : ndarray of int64
        Agent coordinates in ``[0, L)``.
    infected : ndarray of bool
    tick : int
    rng : RngStream
    """

    def __init__(self, params: SimParams, x, y, infected, rng: RngStream, tick: int = 0):
        n, L = params.agent_count, params.lattice_side
        self.params = params
        self.x = np.array(x, dtype=np.int64)
        self.y = np.array(y, dtype=np.int64)
        self.infected = np.array(infected, dtype=np.bool_)
        if not (self.x.shape == self.y.shape == self.infected.shape == (n,)):
            raise ValueError("positions and flags must have one entry per agent")
        if self.x.min() < 0 or self.y.min() < 0 or self.x.max() >= L or self.y.max() >= L:
            raise ValueError("positions must lie in [0, L)")
        self.rng = rng
        self.tick = int(tick)
        self.site = self.y * L + self.x
        self.start = np.empty(L * L + 1, dtype=np.int64)
        self.members = np.empty(n, dtype=np.int64)
        _build_index(L, self.site, self.start, self.members)
        self.infected_count = int(self.infected.sum())
        self._snapshot = np.empty(n, dtype=np.bool_)

    @classmethod
    def from_positions(cls, params: SimParams, positions, infected, rng=None) -> "World":
        """Build a world from an explicit ``(N, 2)`` array of ``(x, y)``."""
        positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
        if rng is None:
            rng = derive(params.seed, 0)
        return cls(params, positions[:, 0], positions[:, 1], infected, rng)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def agent_count(self) -> int:
        return self.params.agent_count

    def site_index(self) -> dict[int, list[int]]:
        """Occupied sites mapped to their agent ids (ascending)."""
        counts = np.diff(self.start)
        return {int(s): self.members[self.start[s]:self.start[s + 1]].tolist()
                for s in np.flatnonzero(counts)}

    def check_invariants(self):
        L = self.params.lattice_side
        assert self.x.min() >= 0 and self.x.max() < L
        assert self.y.min() >= 0 and self.y.max() < L
        assert np.array_equal(self.site, self.y * L + self.x)
        seen = np.zeros(self.agent_count, dtype=np.int64)
        for s, ids in self.site_index().items():
            for a in ids:
                assert self.site[a] == s
                seen[a] += 1
        assert np.all(seen == 1), "every agent must sit in exactly one bucket"
        assert self.infected_count == int(self.infected.sum())

    def copy(self) -> "World":
        w = World(self.params, self.x.copy(), self.y.copy(), self.infected.copy(),
                  self.rng.copy(), self.tick)
        return w

    def __repr__(self) -> str:
        p = self.params
        return (f"World(L={p.lattice_side}, N={p.agent_count}, tick={self.tick}, "
                f"infected={self.infected_count})")


def init_uniform(params: SimParams, rng: RngStream | None = None) -> World:
    """Uniform positions, then ``round(f0 * N)`` infected agents sampled
    without replacement.  Draws: x then y per agent in id order, then a
    partial Fisher-Yates shuffle of the ids."""
    if rng is None:
        rng = derive(params.seed, 0)
    n, L = params.agent_count, params.lattice_side
    x = np.empty(n, dtype=np.int64)
    y = np.empty(n, dtype=np.int64)
    infected = np.empty(n, dtype=np.bool_)
    perm = np.empty(n, dtype=np.int64)
    _init_kernel(rng.state, L, params.initial_infected, x, y, infected, perm)
    return World(params, x, y, infected, rng)


def step_move(world: World) -> World:
    w = world
    _move_kernel(w.rng.state, w.params.lattice_side, w.x, w.y, w.site,
                 w.start, w.members, MOVES)
    return w


def step_infect(world: World) -> World:
    w = world
    snapshot = w.infected.copy()
    w.infected_count += int(_infect_kernel(w.rng.state, w.params.infect_prob, w.start,
                                           w.members, w.infected, snapshot))
    return w


def step_heal(world: World) -> World:
    w = world
    w.infected_count -= int(_heal_kernel(w.rng.state, w.params.heal_prob, w.infected))
    return w


def tick(world: World) -> World:
    if world.infected_count == 0:
        step_move(world)
    else:
        step_move(world)
        step_infect(world)
        step_heal(world)
    world.tick += 1
    return world


def advance(world: World, n_ticks: int, record: np.ndarray | None = None) -> int:
    """Run ``n_ticks`` ticks in compiled code.

    Infected counts after each tick go to ``record`` (length >= n_ticks).
    Returns the number of ticks simulated before absorption; the world is
    then left at that tick (absorbed worlds are not moved further).
    """
    w = world
    if record is None:
        record = np.empty(n_ticks, dtype=np.int64)
    done = _run_kernel(w.rng.state, w.params.lattice_side, w.params.infect_prob,
                       w.params.heal_prob, w.x, w.y, w.site, w.start, w.members,
                       w.infected, w._snapshot, MOVES,
                       w.infected_count, n_ticks, record)
    w.tick += int(done)
    w.infected_count = int(w.infected.sum())
    return int(done)


def infected_fraction(world: World) -> float:
    return world.infected_count / world.params.agent_count
