"""Parameter sweeps: exit-flow tables, limit convergence and site profiles.

Grid points are independent and run on a thread pool; every table comes
back sorted by grid index so repeated runs give identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analytic import limit_exit_flow, phi, rho_star
from .core import (
    DensityProfile,
    DomainError,
    Engine,
    ModelParams,
    RibotideError,
    UorfGeometry,
    validate_geometry,
)
from .dynamic import relax
from .parallel import map_ordered
from .stationary import solve_stationary
from .tasep import point_seed, simulate

__all__ = [
    "SweepSpec",
    "ExitFlowRow",
    "ConvergenceReport",
    "ProfileTable",
    "figure3_sweep",
    "figure4_convergence",
    "figure56_profiles",
    "deterministic_exit_flow",
    "deterministic_profile",
    "default_rho0_grid",
    "default_convergence_grid",
    "DEFAULT_GEOMETRY",
    "DEFAULT_C_VALUES",
    "DEFAULT_N2_LIST",
    "DEFAULT_PROFILE_RHO0",
]

DEFAULT_GEOMETRY = UorfGeometry(100, 200, 100)
DEFAULT_C_VALUES = (0.025, 0.035, 0.05, 0.1, 0.2, 0.3)
DEFAULT_N2_LIST = (50, 100, 200, 400, 800)
DEFAULT_PROFILE_RHO0 = (0.3, 0.4, 0.5, 0.9)


def _grid(lo_steps: int, hi_steps: int, step: float) -> Tuple[float, ...]:
    # k * step rounded so that 0.07 prints as 0.07 and not 0.07000000000000001
    return tuple(round(k * step, 12) for k in range(lo_steps, hi_steps + 1))


def default_rho0_grid() -> Tuple[float, ...]:
    return _grid(1, 99, 0.01)


def default_convergence_grid() -> Tuple[float, ...]:
    return _grid(1, 99, 0.005)


@dataclass(frozen=True)
class SweepSpec:
    rho0_grid: Tuple[float, ...] = field(default_factory=default_rho0_grid)
    c_values: Tuple[float, ...] = DEFAULT_C_VALUES
    geometry: UorfGeometry = DEFAULT_GEOMETRY
    engines: Tuple[Engine, ...] = (Engine.TASEP, Engine.DETERMINISTIC, Engine.LIMIT)
    tasep_sweeps: int = 100_000
    seed: int = 0
    burn_in_sweeps: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "rho0_grid", tuple(float(r) for r in self.rho0_grid))
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "engines", tuple(Engine(e) for e in self.engines))
        if not self.rho0_grid or not self.c_values or not self.engines:
            raise DomainError("rho0_grid, c_values and engines must be non-empty")
        for r in self.rho0_grid:
            if not 0.0 < r < 1.0:
                raise DomainError(f"rho0 values must lie in (0, 1), got {r}")
        for c in self.c_values:
            if not 0.0 < c < 1.0:
                raise DomainError(f"c values must lie in (0, 1), got {c}")
        validate_geometry(self.geometry)
        if self.tasep_sweeps < 1:
            raise DomainError("tasep_sweeps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ExitFlowRow:
    """One table row; ``None`` marks a value that is undefined or was not computed."""

    rho0: float
    c: float
    j3_tasep: Optional[float]
    se_tasep: Optional[float]
    j3_det: Optional[float]
    j3_limit: Optional[float]
    error: Optional[str] = None


def deterministic_exit_flow(params: ModelParams, g: UorfGeometry) -> float:
    """Shooting solver up to rho0 = 1/2, time relaxation above."""
    if params.rho0 <= 0.5:
        return solve_stationary(params, g).j3
    return relax(params, g)[1]


def deterministic_profile(params: ModelParams, g: UorfGeometry) -> DensityProfile:
    if params.rho0 <= 0.5:
        return solve_stationary(params, g).to_profile()
    return relax(params, g)[0]


def figure3_sweep(spec: SweepSpec, threads: Optional[int] = None) -> List[ExitFlowRow]:
    """Exit flow for every (c, rho0) pair, rows ordered by c then rho0.

    Engine failures are stored in the row's ``error`` field instead of
    aborting the sweep.
    """
    g = spec.geometry
    items = [(ci, k) for ci in range(len(spec.c_values)) for k in range(len(spec.rho0_grid))]

    def one(item):
        ci, k = item
        rho0, c = spec.rho0_grid[k], spec.c_values[ci]
        params = ModelParams(rho0, c)
        j_t = se_t = j_d = j_l = None
        errors = []
        if Engine.TASEP in spec.engines:
            try:
                res = simulate(params, g, point_seed(spec.seed, ci * len(spec.rho0_grid) + k),
                               burn_in_sweeps=spec.burn_in_sweeps,
                               sample_sweeps=spec.tasep_sweeps)
                j_t = res.j3_hat
                se_t = None if math.isnan(res.se_j3) else res.se_j3
            except RibotideError as exc:
                errors.append(f"tasep: {exc}")
        if Engine.DETERMINISTIC in spec.engines:
            try:
                j_d = deterministic_exit_flow(params, g)
            except RibotideError as exc:
                errors.append(f"deterministic: {exc}")
        if Engine.LIMIT in spec.engines and rho0 < 0.5:
            try:
                j_l = limit_exit_flow(rho0, c * g.n2)
            except RibotideError as exc:
                errors.append(f"limit: {exc}")
        return ExitFlowRow(rho0, c, j_t, se_t, j_d, j_l, "; ".join(errors) or None)

    return map_ordered(one, items, threads)


@dataclass(frozen=True)
class ConvergenceReport:
    c0: float
    n2_values: Tuple[int, ...]
    sup_errors: Tuple[float, ...]
    argmax_rho0: Tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.n2_values) != len(self.sup_errors):
            raise DomainError("n2_values and sup_errors must have equal length")
        if any(not e > 0 for e in self.sup_errors):
            raise DomainError("sup_errors must be positive")

    def rate_ratios(self) -> np.ndarray:
        """``sup_error / (ln N2 / N2)`` for each N2."""
        n = np.asarray(self.n2_values, dtype=float)
        return np.asarray(self.sup_errors) / (np.log(n) / n)

    def fitted_constant(self) -> float:
        """Smallest C with ``sup_error <= C ln(N2) / N2`` for every row."""
        return float(self.rate_ratios().max())


def figure4_convergence(
    c0: float = 20.0,
    n2_list: Sequence[int] = DEFAULT_N2_LIST,
    rho0_grid: Optional[Sequence[float]] = None,
    n1: int = 100,
    n3: int = 100,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """Sup over the grid of ``|j3(N2) - j3_limit|`` with ``c = c0 / N2``."""
    n2_list = [int(n) for n in n2_list]
    if not n2_list or any(b <= a for a, b in zip(n2_list, n2_list[1:])):
        raise DomainError("n2_list must be non-empty and strictly increasing")
    grid = default_convergence_grid() if rho0_grid is None else tuple(float(r) for r in rho0_grid)
    if not grid or any(not 0.0 < r < 0.5 for r in grid):
        raise DomainError("rho0 grid must be non-empty and inside (0, 1/2)")
    if not c0 > 0:
        raise DomainError(f"c0 must be positive, got {c0}")
    limits = [limit_exit_flow(r, c0) for r in grid]
    items = [(n2, k) for n2 in n2_list for k in range(len(grid))]

    def one(item):
        n2, k = item
        g = UorfGeometry(n1, n2, n3)
        return solve_stationary(ModelParams.scaled(grid[k], c0, g), g).j3

    flows = np.array(map_ordered(one, items, threads)).reshape(len(n2_list), len(grid))
    errors = np.abs(flows - np.asarray(limits))
    peaks = tuple(grid[int(np.argmax(row))] for row in flows)
    return ConvergenceReport(
        c0=float(c0),
        n2_values=tuple(n2_list),
        sup_errors=tuple(float(e) for e in errors.max(axis=1)),
        argmax_rho0=peaks,
    )


@dataclass(frozen=True)
class ProfileTable:
    """Per-site densities and scanning flow; limit columns only for rho0 < 1/2."""

    rho0: float
    params: ModelParams
    geometry: UorfGeometry
    n: np.ndarray
    rho_s: np.ndarray
    rho_e: np.ndarray
    flow_s: np.ndarray
    limit_n: Optional[np.ndarray] = None
    limit_rho: Optional[np.ndarray] = None
    limit_flow: Optional[np.ndarray] = None


def figure56_profiles(
    rho0_list: Sequence[float] = DEFAULT_PROFILE_RHO0,
    c: float = 0.025,
    g: UorfGeometry = DEFAULT_GEOMETRY,
    threads: Optional[int] = None,
) -> List[ProfileTable]:
    rho0_list = [float(r) for r in rho0_list]
    if not rho0_list:
        raise DomainError("rho0_list must not be empty")

    def one(rho0):
        params = ModelParams(rho0, c)
        prof = deterministic_profile(params, g)
        n = np.arange(g.n_star)
        table = dict(
            rho0=rho0, params=params, geometry=g, n=n,
            rho_s=np.array(prof.rho_s[:-1]), rho_e=np.array(prof.rho_e[:-1]),
            flow_s=prof.scanning_flows(),
        )
        if rho0 < 0.5:
            sites = np.arange(g.n1, g.stop + 1)
            c0 = c * g.n2
            lim = np.array([rho_star(rho0, (m - g.n1) / g.n2, c0) for m in sites])
            table.update(limit_n=sites, limit_rho=lim, limit_flow=np.array([phi(x) for x in lim]))
        return ProfileTable(**table)

    return map_ordered(one, rho0_list, threads)
