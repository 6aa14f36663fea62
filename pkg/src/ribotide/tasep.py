"""Monte Carlo engine for the two-species exclusion process.

Random sequential update: each attempt picks a site uniformly from
``0..n_star-1`` and applies the transition rule of the pair (site, site+1).
One sweep is ``n_star`` attempts and counts as one unit of model time, so the
exit flow estimate is the number of scanning exits per sweep.

Transition rules for the pair (a, b) at site n:

* (1, 0) -> (0, 1) and (2, 0) -> (0, 2) everywhere they are allowed,
* (2, 1) -> (0, 2), the elongating particle knocks off the scanning one,
* at n = 0 an empty site is refilled with probability rho0, and after a
  hop (1, 0) -> (0, 1) the vacated site is refilled with probability rho0,
* at n = n1 - 1 a hopping scanning particle becomes elongating with
  probability c,
* at n = n1 + n2 - 1 an elongating particle leaves the lattice,
* at n = n_star - 1 a scanning particle leaves the lattice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .core import DensityProfile, DomainError, Engine, FlowCurve, ModelParams, UorfGeometry
from .parallel import map_ordered

__all__ = [
    "SiteState",
    "Event",
    "SimStats",
    "SimulationResult",
    "step",
    "simulate",
    "flow_curve",
    "point_seed",
    "batch_means_se",
]

EMPTY, SCANNING, ELONGATING = 0, 1, 2

# event bits returned by the update kernel
HOP = 1
ENTRY = 2
CONVERSION = 4
COLLISION = 8
ELONG_TERMINATION = 16
EXIT = 32

# sweeps per block of pre-drawn random numbers; part of the determinism contract
_BLOCK = 64


class SiteState(enum.IntEnum):
    EMPTY = EMPTY
    SCANNING = SCANNING
    ELONGATING = ELONGATING


class Event(enum.IntFlag):
    NONE = 0
    HOP = HOP
    ENTRY = ENTRY
    CONVERSION = CONVERSION
    COLLISION = COLLISION
    ELONG_TERMINATION = ELONG_TERMINATION
    EXIT = EXIT


@njit(cache=True, nogil=True)
def _update(s, n, u, rho0, c, n1, term, n_star):
    a = s[n]
    if n == 0 and a == EMPTY:
        if u < rho0:
            s[0] = SCANNING
            return ENTRY
        return 0
    if a == EMPTY:
        return 0
    if a == ELONGATING and n == term:
        s[n] = EMPTY
        return ELONG_TERMINATION
    if n == n_star - 1:
        # only scanning particles can sit here unless n3 == 0 (handled above)
        s[n] = EMPTY
        return EXIT
    b = s[n + 1]
    if a == ELONGATING:
        if b == ELONGATING:
            return 0
        s[n + 1] = ELONGATING
        s[n] = EMPTY
        if b == SCANNING:
            return HOP | COLLISION
        return HOP
    if b != EMPTY:
        return 0
    flags = HOP
    if n == n1 - 1:
        # one uniform serves both the conversion and the refill decision
        if u < c:
            s[n + 1] = ELONGATING
            flags |= CONVERSION
            u = u / c
        else:
            s[n + 1] = SCANNING
            u = (u - c) / (1.0 - c)
    else:
        s[n + 1] = SCANNING
    s[n] = EMPTY
    if n == 0 and u < rho0:
        s[0] = SCANNING
        flags |= ENTRY
    return flags


@njit(cache=True, nogil=True)
def _run(s, sites, draws, rho0, c, n1, n2, n_star, counts,
         record, occ_s, occ_e, batch_exits, sweep0, total_sweeps, n_batches):
    """Apply pre-drawn attempts. counts: entries, exits, conversions, terminations, collisions.

    When ``record`` is set, occupancy is accumulated after each completed
    sweep and exits are binned into batches by sweep index.
    """
    term = n1 + n2 - 1
    sweep = sweep0
    done = 0
    for k in range(sites.shape[0]):
        f = _update(s, sites[k], draws[k], rho0, c, n1, term, n_star)
        if f != 0:
            if f & ENTRY:
                counts[0] += 1
            if f & EXIT:
                counts[1] += 1
                if record:
                    batch_exits[sweep * n_batches // total_sweeps] += 1
            if f & CONVERSION:
                counts[2] += 1
            if f & ELONG_TERMINATION:
                counts[3] += 1
            if f & COLLISION:
                counts[4] += 1
        done += 1
        if done == n_star:
            done = 0
            if record:
                for i in range(n_star):
                    v = s[i]
                    if v == SCANNING:
                        occ_s[i] += 1
                    elif v == ELONGATING:
                        occ_e[i] += 1
            sweep += 1
    return sweep


def step(state, site: int, draw: float, params: ModelParams, g: UorfGeometry) -> Tuple[np.ndarray, Event]:
    """Apply one update attempt to a copy of ``state``; returns the new lattice and events."""
    s = np.array(state, dtype=np.int8)
    if s.shape != (g.n_star,):
        raise DomainError(f"state must have length n_star={g.n_star}")
    if not (0 <= site < g.n_star):
        raise DomainError(f"site must lie in [0, {g.n_star - 1}], got {site}")
    if not (0.0 <= draw < 1.0):
        raise DomainError(f"draw must lie in [0, 1), got {draw}")
    flags = _update(s, site, draw, params.rho0, params.c, g.n1, g.stop - 1, g.n_star)
    return s, Event(flags)


@dataclass(frozen=True)
class SimStats:
    """Event counters accumulated from the initial state, burn-in included."""

    sweeps: int
    entries: int
    exits_scanning: int
    conversions: int
    elong_terminations: int
    collisions: int
    site_occupancy_s: np.ndarray
    site_occupancy_e: np.ndarray
    scanning_on_lattice: int
    elongating_on_lattice: int

    def ledger_residual(self) -> int:
        """Zero when every scanning particle that entered is accounted for."""
        return self.entries - (
            self.exits_scanning + self.conversions + self.collisions + self.scanning_on_lattice
        )

    def elongating_residual(self) -> int:
        return self.conversions - (self.elong_terminations + self.elongating_on_lattice)


@dataclass(frozen=True)
class SimulationResult:
    stats: SimStats
    rho_hat: DensityProfile
    j3_hat: float
    se_j3: float
    sample_sweeps: int
    burn_in_sweeps: int
    final_state: np.ndarray

    @property
    def rho_hat_s(self) -> np.ndarray:
        return self.rho_hat.rho_s

    @property
    def rho_hat_e(self) -> np.ndarray:
        return self.rho_hat.rho_e


def point_seed(seed_base: int, index: int) -> np.random.SeedSequence:
    """Independent stream for grid point ``index``."""
    return np.random.SeedSequence(int(seed_base), spawn_key=(int(index),))


def batch_means_se(batch_sums: np.ndarray, batch_sizes: np.ndarray) -> float:
    nb = len(batch_sums)
    if nb < 2:
        return float("nan")
    means = batch_sums / batch_sizes
    return float(np.std(means, ddof=1) / np.sqrt(nb))


def _batch_sizes(total: int, nb: int) -> np.ndarray:
    idx = np.arange(total, dtype=np.int64) * nb // total
    return np.bincount(idx, minlength=nb).astype(np.float64)


def simulate(
    params: ModelParams,
    g: UorfGeometry,
    seed,
    burn_in_sweeps: Optional[int] = None,
    sample_sweeps: int = 100_000,
    n_batches: int = 100,
) -> SimulationResult:
    """Run the chain from one scanning particle at site 0.

    ``seed`` is an integer or a :class:`numpy.random.SeedSequence`. Burn-in
    defaults to ``20 * n_star`` sweeps.
    """
    if sample_sweeps < 1:
        raise DomainError("sample_sweeps must be >= 1")
    if burn_in_sweeps is None:
        burn_in_sweeps = 20 * g.n_star
    if burn_in_sweeps < 0:
        raise DomainError("burn_in_sweeps must be >= 0")
    if n_batches < 1:
        raise DomainError("n_batches must be >= 1")
    if isinstance(seed, np.random.SeedSequence):
        seq = seed
    else:
        if int(seed) < 0 or int(seed) >= 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        seq = np.random.SeedSequence(int(seed))
    rng = np.random.Generator(np.random.PCG64(seq))
    nb = min(n_batches, sample_sweeps)
    n = g.n_star

    s = np.zeros(n, dtype=np.int8)
    s[0] = SCANNING
    counts = np.zeros(5, dtype=np.int64)
    counts[0] = 1  # the initial particle entered at time zero
    occ_s = np.zeros(n, dtype=np.int64)
    occ_e = np.zeros(n, dtype=np.int64)
    batch_exits = np.zeros(nb, dtype=np.int64)

    done = 0
    while done < burn_in_sweeps:
        m = min(_BLOCK, burn_in_sweeps - done)
        sites = rng.integers(0, n, m * n)
        draws = rng.random(m * n)
        _run(s, sites, draws, params.rho0, params.c, g.n1, g.n2, n, counts,
             False, occ_s, occ_e, batch_exits, 0, 1, nb)
        done += m
    exits_before = int(counts[1])
    sweep = 0
    while sweep < sample_sweeps:
        m = min(_BLOCK, sample_sweeps - sweep)
        sites = rng.integers(0, n, m * n)
        draws = rng.random(m * n)
        sweep = _run(s, sites, draws, params.rho0, params.c, g.n1, g.n2, n, counts,
                     True, occ_s, occ_e, batch_exits, sweep, sample_sweeps, nb)

    sampled_exits = int(counts[1]) - exits_before
    stats = SimStats(
        sweeps=burn_in_sweeps + sample_sweeps,
        entries=int(counts[0]),
        exits_scanning=int(counts[1]),
        conversions=int(counts[2]),
        elong_terminations=int(counts[3]),
        collisions=int(counts[4]),
        site_occupancy_s=occ_s,
        site_occupancy_e=occ_e,
        scanning_on_lattice=int(np.count_nonzero(s == SCANNING)),
        elongating_on_lattice=int(np.count_nonzero(s == ELONGATING)),
    )
    rho_s = np.zeros(n + 1)
    rho_e = np.zeros(n + 1)
    rho_s[:n] = occ_s / sample_sweeps
    rho_e[:n] = occ_e / sample_sweeps
    sizes = _batch_sizes(sample_sweeps, nb)
    return SimulationResult(
        stats=stats,
        rho_hat=DensityProfile(g, rho_s, rho_e),
        j3_hat=sampled_exits / sample_sweeps,
        se_j3=batch_means_se(batch_exits.astype(np.float64), sizes),
        sample_sweeps=sample_sweeps,
        burn_in_sweeps=burn_in_sweeps,
        final_state=s,
    )


def flow_curve(
    rho0_grid: Sequence[float],
    c: float,
    g: UorfGeometry,
    seed_base: int,
    sample_sweeps: int = 100_000,
    burn_in_sweeps: Optional[int] = None,
    threads: Optional[int] = None,
    v: float = 1.0,
) -> FlowCurve:
    """TASEP exit flow over a grid of upstream densities; point k uses ``point_seed(seed_base, k)``."""
    grid = [float(r) for r in rho0_grid]
    if not grid:
        raise DomainError("rho0_grid must not be empty")

    def one(k):
        res = simulate(ModelParams(grid[k], c, v), g, point_seed(seed_base, k),
                       burn_in_sweeps=burn_in_sweeps, sample_sweeps=sample_sweeps)
        return res.j3_hat, res.se_j3

    out = map_ordered(one, range(len(grid)), threads)
    return FlowCurve(
        points=tuple((r, j) for r, (j, _) in zip(grid, out)),
        engine_tag=Engine.TASEP,
        errors=tuple(se for _, se in out),
    )
