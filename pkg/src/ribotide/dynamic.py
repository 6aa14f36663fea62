"""Time relaxation of the deterministic balance equations.

Explicit Euler on the lattice ODE, started from the empty lattice with the
reservoir ``rho_0^s = rho0`` switched on. The start codon carries a single
total density which is re-split into scanning and elongating parts after
every step. Works for any ``rho0`` in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numba import njit

from .core import (
    BoundViolationError,
    DensityProfile,
    DomainError,
    ModelParams,
    NotConvergedError,
    UorfGeometry,
    validate_params,
)

__all__ = ["DynamicState", "Derivative", "rhs", "relax", "exit_flow_of", "initial_state"]


@dataclass(frozen=True)
class DynamicState:
    profile: DensityProfile
    rho_start_total: float
    time: float = 0.0

    def __post_init__(self):
        g = self.profile.geometry
        s, e = self.profile.rho_s[g.n1], self.profile.rho_e[g.n1]
        if abs(s + e - self.rho_start_total) > 1e-12:
            raise DomainError("rho_start_total must equal rho_s + rho_e at the start codon")


@dataclass(frozen=True)
class Derivative:
    """Time derivatives; at the start codon ``d_total`` is split as ``(1-c, c)``."""

    d_s: np.ndarray
    d_e: np.ndarray
    d_total: float

    def max_abs(self, g: UorfGeometry) -> float:
        mask = np.ones(g.n_star + 1, dtype=bool)
        mask[g.n1] = False
        return max(
            float(np.max(np.abs(self.d_s[mask]))),
            float(np.max(np.abs(self.d_e[g.n1 + 1 : g.stop]), initial=0.0)),
            abs(self.d_total),
        )


def initial_state(params: ModelParams, g: UorfGeometry) -> DynamicState:
    s = np.zeros(g.n_star + 1)
    s[0] = params.rho0
    return DynamicState(DensityProfile(g, s, np.zeros(g.n_star + 1)), 0.0)


def rhs(state: DynamicState, params: ModelParams, g: UorfGeometry) -> Derivative:
    s = np.asarray(state.profile.rho_s)
    e = np.asarray(state.profile.rho_e)
    v, c, n1 = params.v, params.c, g.n1
    fs = s[:-1] * (1.0 - s[1:] - e[1:])
    fe = e[:-1] * (1.0 - e[1:])
    d_s = np.zeros_like(s)
    d_e = np.zeros_like(e)
    # sites 1..n_star-1; site 0 and the ghost site are held fixed
    d_s[1:-1] = v * (fs[:-1] - fs[1:] - s[1:-1] * e[:-2])
    d_e[n1 + 1 : g.stop] = v * (fe[n1 : g.stop - 1] - fe[n1 + 1 : g.stop])
    d_total = v * (fs[n1 - 1] - fs[n1] - fe[n1])
    d_s[n1] = (1.0 - c) * d_total
    d_e[n1] = c * d_total
    return Derivative(d_s, d_e, d_total)


@njit(cache=True, nogil=True)
def _relax_kernel(s, e, c, v, n1, n2, n_star, dt, steady_tol, max_steps):
    """Euler steps in place. Returns (status, steps, max_derivative).

    status: 0 converged, 1 step budget exhausted, 2 bound violation.
    """
    stop = n1 + n2
    fs = np.zeros(n_star)
    fe = np.zeros(n_star)
    ds = np.zeros(n_star + 1)
    de = np.zeros(n_star + 1)
    worst = np.inf
    for step in range(max_steps + 1):
        for n in range(n_star):
            fs[n] = s[n] * (1.0 - s[n + 1] - e[n + 1])
            fe[n] = e[n] * (1.0 - e[n + 1])
        worst = 0.0
        for n in range(1, n_star):
            if n == n1:
                d = v * (fs[n - 1] - fs[n] - fe[n])
            else:
                d = v * (fs[n - 1] - fs[n] - s[n] * e[n - 1])
            ds[n] = d
            if abs(d) > worst:
                worst = abs(d)
        for n in range(n1 + 1, stop):
            d = v * (fe[n - 1] - fe[n])
            de[n] = d
            if abs(d) > worst:
                worst = abs(d)
        if worst < steady_tol:
            return 0, step, worst
        if step == max_steps:
            break
        for n in range(1, n_star):
            if n == n1:
                total = s[n] + e[n] + dt * ds[n]
                s[n] = (1.0 - c) * total
                e[n] = c * total
            else:
                s[n] += dt * ds[n]
        for n in range(n1 + 1, stop):
            e[n] += dt * de[n]
        for n in range(1, n_star):
            if s[n] < 0.0 or e[n] < 0.0 or s[n] + e[n] > 1.0:
                return 2, step + 1, worst
    return 1, max_steps, worst


def relax(
    params: ModelParams,
    g: UorfGeometry,
    dt: Optional[float] = None,
    steady_tol: float = 1e-10,
    max_time: float = 1e6,
    initial: Optional[DensityProfile] = None,
) -> Tuple[DensityProfile, float]:
    """Integrate to steady state; returns the profile and the exit flow ``j3``.

    ``dt`` defaults to ``0.1 / v``. Densities leaving the physical bounds
    abort with :class:`BoundViolationError` (reduce ``dt``); no clamping.
    """
    validate_params(params, g)
    if dt is None:
        dt = 0.1 / params.v
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if initial is None:
        initial = initial_state(params, g).profile
    if initial.geometry != g:
        raise DomainError("initial profile geometry does not match")
    s = np.array(initial.rho_s, dtype=np.float64)
    e = np.array(initial.rho_e, dtype=np.float64)
    s[0] = params.rho0
    total = s[g.n1] + e[g.n1]
    s[g.n1], e[g.n1] = (1.0 - params.c) * total, params.c * total
    max_steps = int(np.ceil(max_time / dt))
    status, steps, worst = _relax_kernel(
        s, e, params.c, params.v, g.n1, g.n2, g.n_star, dt, steady_tol, max_steps
    )
    if status == 2:
        raise BoundViolationError(
            f"density left [0, 1] after {steps} steps at dt={dt}; reduce dt"
        )
    if status == 1:
        raise NotConvergedError(
            f"no steady state by t={max_time} (max |drho/dt|={worst:.3e} > {steady_tol})"
        )
    profile = DensityProfile(g, s, e)
    return profile, exit_flow_of(profile)


def exit_flow_of(profile: DensityProfile) -> float:
    n = profile.geometry.n_star
    s, e = profile.rho_s, profile.rho_e
    return float(s[n - 1] * (1.0 - s[n] - e[n]))
