"""Replicated runs, equilibrium surfaces and the empirical threshold q*.

Replicate ``i`` of any experiment uses the stream ``derive(master_seed, i)``,
so results do not depend on how replicates are scheduled, and comparisons
between parameter points made with one master seed are paired.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import SimParams, advance, init_uniform
from .rng import RngStream, derive
from .stats import EquilibriumEstimate, TimeSeries, estimate_equilibrium

__all__ = [
    "ReplicateSpec",
    "FInfEstimate",
    "ThresholdEstimate",
    "run_trajectory",
    "estimate_f_inf",
    "survival_probe",
    "find_q_star",
    "sweep",
    "SWEEP_COLUMNS",
]

DEFAULT_REPLICATES = 16
DEFAULT_RESOLUTION = 1 / 256


def default_steps(lattice_side: int) -> int:
    """Horizon of 50 * L**2 ticks, on the order of the cover time."""
    return 50 * lattice_side * lattice_side


@dataclass(frozen=True)
class ReplicateSpec:
    base: SimParams
    replicates: int = DEFAULT_REPLICATES
    master_seed: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError(f"need at least one replicate, got {self.replicates}")
        if self.master_seed is None:
            object.__setattr__(self, "master_seed", self.base.seed)

    def stream(self, i: int) -> RngStream:
        return derive(self.master_seed, i)


@dataclass(frozen=True)
class FInfEstimate:
    f_inf: float
    std_error: float
    surviving: int
    replicates: tuple[EquilibriumEstimate, ...] = field(repr=False, default=())

    def __iter__(self):
        # unpacks as (f_inf, std_error, surviving)
        return iter((self.f_inf, self.std_error, self.surviving))


@dataclass(frozen=True)
class ThresholdEstimate:
    p: float
    d: float
    q_star: float
    bracket_low: float
    bracket_high: float
    survival_counts: tuple[tuple[float, int, int], ...]
    resolution: float


def _map(fn, args, jobs):
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args)))


def run_trajectory(params: SimParams, rng: RngStream | None = None,
                   thin: int = 1) -> TimeSeries:
    """Infected fraction after each of ``params.max_steps`` ticks.

    Ticks after absorption are recorded as zeros.  ``thin`` keeps every
    ``thin``-th tick (ticks thin, 2*thin, ...).
    """
    world = init_uniform(params, rng if rng is not None else derive(params.seed, 0))
    counts = np.zeros(params.max_steps, dtype=np.int64)
    advance(world, params.max_steps, counts)
    values = counts / params.agent_count
    if thin > 1:
        values = values[thin - 1::thin]
    return TimeSeries(values)


def _replicate_equilibrium(params: SimParams, master_seed: int, i: int) -> EquilibriumEstimate:
    return estimate_equilibrium(run_trajectory(params, derive(master_seed, i)))


def _replicate_survives(params: SimParams, master_seed: int, i: int) -> bool:
    world = init_uniform(params, derive(master_seed, i))
    advance(world, params.max_steps)
    return world.infected_count > 0


def combine_replicates(estimates, n_total: int) -> FInfEstimate:
    """Majority-extinction rule: f_inf is 0 unless at least half survive."""
    alive = [e for e in estimates if not e.extinct]
    if not alive or len(alive) < n_total / 2:
        return FInfEstimate(0.0, 0.0, len(alive), tuple(estimates))
    f_inf = math.fsum(e.mean for e in alive) / len(alive)
    err = math.sqrt(math.fsum(e.std_error ** 2 for e in alive)) / len(alive)
    return FInfEstimate(f_inf, err, len(alive), tuple(estimates))


def estimate_f_inf(spec: ReplicateSpec, jobs: int = 1) -> FInfEstimate:
    args = [(spec.base, spec.master_seed, i) for i in range(spec.replicates)]
    return combine_replicates(_map(_replicate_equilibrium, args, jobs), spec.replicates)


def survival_probe(params: SimParams, replicates: int, master_seed: int,
                   jobs: int = 1) -> int:
    """Number of replicates still infected at tick ``params.max_steps``."""
    if replicates < 1:
        raise ValueError(f"need at least one replicate, got {replicates}")
    args = [(params, master_seed, i) for i in range(replicates)]
    return int(sum(_map(_replicate_survives, args, jobs)))


def find_q_star(p: float, d: float, lattice_side: int = 128,
                replicates: int = DEFAULT_REPLICATES, steps: int | None = None,
                resolution: float = DEFAULT_RESOLUTION, master_seed: int = 0,
                f0: float = 0.2, jobs: int = 1, progress=None) -> ThresholdEstimate:
    """Bisect on q for the largest healing probability that keeps a majority
    of replicates infected at the horizon.

    A probe at q counts as epidemic iff ``survivors >= R / 2``.
    """
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if p == 0 or d == 0:
        return ThresholdEstimate(p, d, 0.0, 0.0, 0.0, (), resolution)
    if steps is None:
        steps = default_steps(lattice_side)
    base = SimParams.from_density(lattice_side, d, p, 0.0,
                                  initial_infected_fraction=f0, max_steps=steps,
                                  seed=master_seed)
    lo, hi = 0.0, 1.0
    probes = []
    while hi - lo > resolution:
        q = 0.5 * (lo + hi)
        alive = survival_probe(base.replace(heal_prob=q), replicates, master_seed, jobs)
        probes.append((q, alive, replicates))
        if progress is not None:
            progress(f"p={p:g} d={d:g} q={q:.6f} survivors={alive}/{replicates}")
        if alive >= replicates / 2:
            lo = q
        else:
            hi = q
    return ThresholdEstimate(p, d, 0.5 * (lo + hi), lo, hi, tuple(probes), resolution)


SWEEP_COLUMNS = ("p", "q", "d", "L", "seed", "tau", "burn_in", "f_inf", "std_err",
                 "n_eff", "extinct", "surviving", "replicates", "error")


def _sweep_row(p, q, d, L, master_seed, replicates, estimates, error=None) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(p=p, q=q, d=d, L=L, seed=master_seed, replicates=replicates)
    if error is not None:
        row["error"] = error
        return row
    est = combine_replicates(estimates, replicates)
    alive = [e for e in estimates if not e.extinct]
    row.update(f_inf=est.f_inf, std_err=est.std_error, surviving=est.surviving,
               extinct=est.f_inf == 0.0 and est.surviving < replicates / 2)
    if alive:
        row["tau"] = math.fsum(e.tau for e in alive) / len(alive)
        row["burn_in"] = max(e.burn_in for e in alive)
        row["n_eff"] = math.fsum(e.n_effective for e in alive)
    return row


def _safe_replicate(params, master_seed, i):
    try:
        return _replicate_equilibrium(params, master_seed, i)
    except Exception as exc:  # recorded per row, the sweep carries on
        return f"{type(exc).__name__}: {exc}"


def sweep(p_grid, q_grid, d_grid, lattice_side: int = 128, steps: int | None = None,
          replicates: int = DEFAULT_REPLICATES, master_seed: int = 0, f0: float = 0.2,
          jobs: int = 1, on_row=None) -> list[dict]:
    """Estimate f_inf on the Cartesian product ``p x q x d``.

    Rows come back in grid order (d outermost, then p, then q) whatever the
    number of workers; ``on_row`` is called with each row as soon as it and
    every row before it are complete.
    """
    if steps is None:
        steps = default_steps(lattice_side)
    cells = []
    for d, p, q in itertools.product(d_grid, p_grid, q_grid):
        try:
            params = SimParams.from_density(lattice_side, d, p, q,
                                            initial_infected_fraction=f0,
                                            max_steps=steps, seed=master_seed)
        except ValueError as exc:
            params = str(exc)
        cells.append((p, q, d, params))

    tasks = [(c[3], master_seed, i) for c in cells if isinstance(c[3], SimParams)
             for i in range(replicates)]
    if jobs is None or jobs <= 1:
        results = (_safe_replicate(*t) for t in tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_safe_replicate, *zip(*tasks)) if tasks else iter(())

    rows = []
    try:
        for p, q, d, params in cells:
            if not isinstance(params, SimParams):
                row = _sweep_row(p, q, d, lattice_side, master_seed, replicates, (),
                                 error=f"ValueError: {params}")
            else:
                got = [next(results) for _ in range(replicates)]
                failures = [g for g in got if isinstance(g, str)]
                row = _sweep_row(p, q, d, lattice_side, master_seed, replicates, got,
                                 error=failures[0] if failures else None)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return rows
