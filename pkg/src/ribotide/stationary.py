"""Positive decreasing stationary solution of the deterministic model.

Two solution routes are provided.

``method="backward"`` (default) runs every recursion from its terminal zero
towards the start codon and the lattice entrance. The forward maps
``rho -> 1 - j/rho`` amplify perturbations by ``(1 - rho)/rho`` per site, so
for realistic lattices a forward trajectory loses all digits after a few
dozen sites; the backward maps contract instead. Three nested bisections
are used:

* ``J2 = psi_{n2}(R0)``: the elongating flow making ``R_{n2} = 0``;
* the exit flow ``j3 = rho2_{N-1}`` making the backward scanning sweep land
  on ``rho2_0 = (1 - c) rho1_{n1}``;
* the total start-codon density ``rho1_{n1}`` making the upstream sweep land
  on ``rho1_0 = rho0``.

``method="forward"`` bisects the signed survival score :func:`residual` on
the upstream flow ``j1``. It is only usable on short lattices and is kept as
an independent cross-check.

Densities that differ by less than one ulp are common in the solution (the
upstream profile is flat to ~1e-40 away from the start codon), so strict
monotonicity is certified through log-increments that are propagated by
their own exact recursions, see :func:`_log_gaps`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numba import njit

from .core import (
    DensityProfile,
    DomainError,
    ModelParams,
    NoSignChangeError,
    NotConvergedError,
    UorfGeometry,
    validate_params,
)

__all__ = [
    "IterationOutcome",
    "StationarySolution",
    "density_iteration",
    "critical_flow_psi",
    "elongating_branch",
    "coupled_iteration",
    "downstream_sweep",
    "residual",
    "solve_stationary",
]

DIVISION_GUARD = 1e-14
DEFAULT_TOL = 1e-12
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class IterationOutcome:
    """Result of ``rho_{n+1} = 1 - j_n / rho_n`` run until it leaves (0, inf).

    ``values[0..survived]`` are all positive. ``terminal`` is the first value
    that was not (``None`` if the run completed).
    """

    values: np.ndarray
    survived: int
    terminal: Optional[float] = None

    @property
    def completed(self) -> bool:
        return self.terminal is None


def density_iteration(j: float, rho0: float, n: int) -> IterationOutcome:
    if not (j > 0 and 0 < rho0 < 1 and n >= 1):
        raise DomainError("density_iteration needs j > 0, 0 < rho0 < 1, n >= 1")
    values = [rho0]
    rho = rho0
    for _ in range(n):
        rho = 1.0 - j / rho
        values.append(rho)
        if rho < DIVISION_GUARD:
            return IterationOutcome(np.array(values), len(values) - 2, rho)
    return IterationOutcome(np.array(values), n, None)


# ---------------------------------------------------------------- kernels


@njit(cache=True, nogil=True)
def _backward_start(j, n):
    # rho_N = 0, rho_{k} = j / (1 - rho_{k+1}); returns rho_0
    x = 0.0
    for _ in range(n):
        if x >= 1.0:
            return np.inf
        x = j / (1.0 - x)
    return x


@njit(cache=True, nogil=True)
def _psi(rho0, n, max_iter):
    lo = rho0 * (1.0 - rho0)
    hi = rho0
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid, it
        if _backward_start(mid, n) < rho0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), -1


@njit(cache=True, nogil=True)
def _fill_backward(j, n, out):
    out[n] = 0.0
    x = 0.0
    for k in range(n - 1, -1, -1):
        x = j / (1.0 - x)
        out[k] = x


@njit(cache=True, nogil=True)
def _downstream_back(t, R, N, out):
    # scanning densities from rho_N = 0, rho_{N-1} = t back to rho_0
    out[N] = 0.0
    out[N - 1] = t
    for m in range(N - 2, -1, -1):
        den = 1.0 - out[m + 1] - R[m + 1]
        if den <= 0.0:
            return np.inf
        v = (out[m + 1] * (1.0 - out[m + 2]) + (R[m] - R[m + 2]) * out[m + 1]) / den
        if not (v < 1.0):
            return np.inf
        out[m] = v
    return out[0]


@njit(cache=True, nogil=True)
def _downstream_for(x, c, n2, N, R, rho2, max_iter):
    """Given the start-codon total ``x``: fill R and rho2, return (j1, J2, t, ok)."""
    r0 = c * x
    J2, it = _psi(r0, n2, max_iter)
    if it < 0:
        return np.nan, J2, np.nan, False
    R[:] = 0.0
    _fill_backward(J2, n2, R)
    target = (1.0 - c) * x
    lo = 0.0
    hi = target
    ok = False
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            ok = True
            break
        if _downstream_back(mid, R, N, rho2) < target:
            lo = mid
        else:
            hi = mid
    if not ok:
        return np.nan, J2, np.nan, False
    # keep the endpoint whose backward sweep lands closer to the target
    r_hi = _downstream_back(hi, R, N, rho2)
    r_lo = _downstream_back(lo, R, N, rho2)
    t = lo
    if abs(r_hi - target) < abs(r_lo - target):
        t = hi
    _downstream_back(t, R, N, rho2)
    j1 = rho2[0] * (1.0 - rho2[1]) + J2 - rho2[0] * R[1]
    return j1, J2, t, True


@njit(cache=True, nogil=True)
def _upstream_back(x, j1, n1, rho1):
    rho1[n1] = x
    for n in range(n1 - 1, -1, -1):
        if rho1[n + 1] >= 1.0:
            return np.inf
        rho1[n] = j1 / (1.0 - rho1[n + 1])
    return rho1[0]


@njit(cache=True, nogil=True)
def _entrance_density(x, c, n1, n2, N, rho1, rho2, R, max_iter):
    j1, J2, t, ok = _downstream_for(x, c, n2, N, R, rho2, max_iter)
    if not ok:
        return np.nan
    return _upstream_back(x, j1, n1, rho1)


@njit(cache=True, nogil=True)
def _solve_backward(rho0, c, n1, n2, n3, tol, max_iter, rho1, rho2, R):
    """Returns (status, x_lo, x_hi, iterations). status: 0 ok, 1 no sign change, 2 not converged."""
    N = n2 + n3
    lo = 0.0
    hi = rho0
    f_hi = _entrance_density(hi, c, n1, n2, N, rho1, rho2, R, max_iter)
    if not (f_hi >= rho0):
        return 1, lo, hi, 0
    for it in range(max_iter):
        if hi - lo <= tol:
            return 0, lo, hi, it
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return 0, lo, hi, it
        f = _entrance_density(mid, c, n1, n2, N, rho1, rho2, R, max_iter)
        if f != f:
            return 2, lo, hi, it
        if f < rho0:
            lo = mid
        else:
            hi = mid
    return 2, lo, hi, max_iter


# ---------------------------------------------------------------- public ops


def critical_flow_psi(rho0: float, n: int, tol: float = DEFAULT_TOL) -> float:
    """Flow ``j`` for which the density iteration started at ``rho0`` hits 0 at step ``n``.

    Lies in ``(phi(rho0), rho0]``. Computed by bisection on the backward
    recursion from ``rho_n = 0``, which is well conditioned where the
    forward one is not.
    """
    if not (0.0 < rho0 < 1.0) or n < 1:
        raise DomainError("critical_flow_psi needs 0 < rho0 < 1 and n >= 1")
    if n == 1:
        return float(rho0)
    j, it = _psi(float(rho0), int(n), MAX_BISECTIONS)
    if it < 0:
        raise NotConvergedError(f"psi bisection did not reach tol={tol}")
    return float(j)


def elongating_branch(r0: float, n2: int, tol: float = DEFAULT_TOL) -> Tuple[float, np.ndarray]:
    """Elongating flow ``J2`` and densities ``R_0 > ... > R_{n2} = 0``."""
    j_big2 = critical_flow_psi(r0, n2, tol)
    r = np.zeros(n2 + 1)
    _fill_backward(j_big2, n2, r)
    return j_big2, r


def coupled_iteration(j0, rho0, r, delta, n) -> Tuple[IterationOutcome, np.ndarray]:
    """Run ``rho_{k+1} = 1 - j_k/rho_k``, ``j_{k+1} = j_k - r_k rho_k - delta_k rho_{k+1}``.

    Produces ``rho_0..rho_n`` and ``j_0..j_{n-1}``; stops as soon as a
    density or a flow is no longer positive.
    """
    rho = [float(rho0)]
    js = [float(j0)]
    if not (j0 > 0 and rho0 > 0):
        return IterationOutcome(np.array(rho), -1 if rho0 <= 0 else 0, float(rho0)), np.array(js)
    for k in range(n):
        nxt = 1.0 - js[k] / rho[k]
        rho.append(nxt)
        if nxt < DIVISION_GUARD:
            return IterationOutcome(np.array(rho), k, nxt), np.array(js)
        if k + 1 < n:
            jn = js[k] - r[k] * rho[k] - delta[k] * nxt
            js.append(jn)
            if jn <= 0.0:
                return IterationOutcome(np.array(rho), k + 1, None), np.array(js)
    return IterationOutcome(np.array(rho), n, None), np.array(js)


def downstream_sweep(j2_0, rho2_0, r_elong, n_total) -> Tuple[IterationOutcome, np.ndarray]:
    """Forward sweep of the scanning densities downstream of the start codon.

    ``r_elong`` holds ``R_0, R_1, ...``; it is zero-padded to ``n_total + 2``.
    """
    r_pad = np.zeros(n_total + 2)
    r_in = np.asarray(r_elong, dtype=float)[: n_total + 2]
    r_pad[: r_in.size] = r_in
    collide = r_pad[1:]
    overtake = r_pad[:-2] - r_pad[2:]
    return coupled_iteration(j2_0, rho2_0, collide, overtake, n_total)


def residual(j1: float, params: ModelParams, g: UorfGeometry) -> float:
    """Signed survival score of the forward trajectory for upstream flow ``j1``.

    Positive when the scanning density is still positive after the last
    site (``j1`` too small), negative when the trajectory dies early, with
    magnitude growing with the number of sites left.
    """
    n1, n2, N = g.n1, g.n2, g.downstream
    c = params.c
    up = density_iteration(j1, params.rho0, n1)
    if not up.completed:
        return -(N + n1 - up.survived) - abs(up.terminal)
    x = float(up.values[-1])
    j_big2, r = elongating_branch(c * x, n2)
    rho2_0 = (1.0 - c) * x
    r1 = r[1] if n2 >= 1 else 0.0
    j2_0 = j1 - j_big2 + rho2_0 * r1
    if j2_0 <= 0.0:
        return float(N + 1)
    down, js = downstream_sweep(j2_0, rho2_0, r, N)
    vals = down.values[: down.survived + 1]
    rises = np.nonzero(np.diff(vals) >= 0.0)[0]
    if rises.size:
        # once the density stops decreasing it never turns back down
        return float(N - rises[0])
    if down.terminal is not None:
        k = down.survived + 1
        return -(N - k) - abs(down.terminal)
    if down.survived < N:
        # the flow ran out while densities stayed positive
        return float(N - down.survived + 1)
    return float(down.values[-1])


@dataclass(frozen=True)
class StationarySolution:
    """Unknowns of the stationary problem plus log-increments certifying strict decrease.

    ``log_gap1[n] = log(rho1[n] - rho1[n+1])``, ``log_gap2[m]`` and
    ``log_gap_r[m]`` likewise for ``rho2`` and ``r_elong``.
    """

    params: ModelParams
    geometry: UorfGeometry
    rho1: np.ndarray
    rho2: np.ndarray
    r_elong: np.ndarray
    j1: float
    j2: np.ndarray
    j_big2: float
    j3: float
    log_gap1: np.ndarray = field(repr=False)
    log_gap2: np.ndarray = field(repr=False)
    log_gap_r: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("rho1", "rho2", "r_elong", "j2", "log_gap1", "log_gap2", "log_gap_r"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_profile(self) -> DensityProfile:
        g, c = self.geometry, self.params.c
        s = np.zeros(g.n_star + 1)
        e = np.zeros(g.n_star + 1)
        s[: g.n1] = self.rho1[: g.n1]
        s[g.n1 : g.n_star + 1] = self.rho2
        s[g.n1] = (1.0 - c) * self.rho1[g.n1]
        e[g.n1 : g.stop] = self.r_elong[: g.n2]
        e[g.n1] = c * self.rho1[g.n1]
        return DensityProfile(g, s, e)

    def violations(self, tol: float = 1e-9) -> List[str]:
        """Every failed invariant, as human-readable strings (empty when valid)."""
        g, p = self.geometry, self.params
        n1, n2, N = g.n1, g.n2, g.downstream
        rho1, rho2, R, j2 = self.rho1, self.rho2, self.r_elong, self.j2
        out = []

        def check(ok, msg):
            if not ok:
                out.append(msg)

        check(np.all(rho1 > 0), "rho1 not positive")
        check(np.all(rho2[:N] > 0) and rho2[N] == 0.0, "rho2 positivity / terminal zero")
        check(np.all(R[:n2] > 0) and R[n2] == 0.0, "R positivity / terminal zero")
        check(self.j1 > 0 and self.j_big2 > 0 and self.j3 > 0, "flows not positive")
        check(np.all(j2 > 0), "j2 not positive")

        for name, lg, vals in (
            ("rho1", self.log_gap1, rho1),
            ("rho2", self.log_gap2, rho2),
            ("R", self.log_gap_r, R[: n2 + 1]),
        ):
            check(np.all(np.isfinite(lg)), f"{name} not strictly decreasing")
            check(np.all(np.diff(vals) <= 1e-15), f"{name} increases in float values")
        check(rho1[n1] > rho2[0], "rho1 end not above rho2 start")
        check(np.all(np.diff(j2) <= 1e-15), "j2 increases")

        check(abs(rho1[0] - p.rho0) <= tol, "rho1_0 != rho0")
        check(abs(R[0] - p.c * rho1[n1]) <= tol, "R_0 != c rho1_N1")
        check(abs(rho2[0] - (1 - p.c) * rho1[n1]) <= tol, "rho2_0 != (1-c) rho1_N1")
        check(
            abs(self.j1 - (j2[0] + self.j_big2 - rho2[0] * R[1])) <= tol,
            "start-codon flow balance",
        )
        check(abs(self.j3 - rho2[N - 1]) <= tol, "j3 != rho2_{N-1}")

        up = rho1[1:] - (1.0 - self.j1 / rho1[:-1])
        check(np.max(np.abs(up)) <= tol, "upstream recursion residual")
        r_res = R[1 : n2 + 1] - (1.0 - self.j_big2 / R[:n2])
        check(np.max(np.abs(r_res)) <= tol, "elongating recursion residual")
        check(np.max(np.abs(j2 - rho2[:N] * (1.0 - rho2[1:]))) <= tol, "j2 definition")
        rp = np.zeros(N + 2)
        rp[: n2 + 1] = R
        j_next = j2[:-1] - rp[1:N] * rho2[: N - 1] - (rp[: N - 1] - rp[2 : N + 1]) * rho2[1:N]
        if N > 1:
            check(np.max(np.abs(j2[1:] - j_next)) <= tol, "downstream flow recursion residual")

        prof = self.to_profile()
        fs = prof.scanning_flows()
        fe = prof.elongating_flows()
        check(np.max(np.abs(fs[:n1] - self.j1)) <= tol, "upstream scanning flow not constant")
        check(np.max(np.abs(fe[n1 : g.stop] - self.j_big2)) <= tol, "elongating flow not constant")
        if g.n3 > 0:
            check(
                np.max(np.abs(fs[g.stop : g.n_star] - self.j3)) <= tol,
                "post-stop scanning flow not constant",
            )
        return out


def _logsum(*terms):
    finite = [t for t in terms if t != -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    return top + math.log(sum(math.exp(t - top) for t in finite))


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _log_gaps(rho1, rho2, R, j1, j_big2, n1, n2, N):
    """Log-increments of the three monotone sequences, by backward recursion.

    Upstream: ``d_{n-1} = j1 d_n / ((1 - rho_n)(1 - rho_{n+1}))``.
    Downstream: ``d_m = rho_{m+1} (d_{m+1} + R_m - R_{m+2} + R_{m+1}) / (1 - rho_{m+1} - R_{m+1})``.
    """
    lg1 = np.empty(n1)
    lg1[n1 - 1] = _log(rho1[n1 - 1] - rho1[n1])
    lj1 = _log(j1)
    for n in range(n1 - 1, 0, -1):
        lg1[n - 1] = lj1 + lg1[n] - math.log1p(-rho1[n]) - math.log1p(-rho1[n + 1])

    lgr = np.empty(n2)
    lgr[n2 - 1] = _log(R[n2 - 1])
    lJ = _log(j_big2)
    for m in range(n2 - 1, 0, -1):
        lgr[m - 1] = lJ + lgr[m] - math.log1p(-R[m]) - math.log1p(-R[m + 1])

    rp = np.zeros(N + 2)
    rp[: n2 + 1] = R
    lgr_full = np.full(N + 1, -math.inf)
    lgr_full[:n2] = lgr
    lg2 = np.empty(N)
    lg2[N - 1] = _log(rho2[N - 1])
    for m in range(N - 2, -1, -1):
        den = 1.0 - rho2[m + 1] - rp[m + 1]
        inner = _logsum(lg2[m + 1], lgr_full[m], lgr_full[m + 1], _log(rp[m + 1]))
        lg2[m] = _log(rho2[m + 1]) + inner - _log(den)
    return lg1, lg2, lgr


def _assemble(params, g, rho1, rho2, R, j1, j_big2) -> StationarySolution:
    n1, n2, N = g.n1, g.n2, g.downstream
    j2 = rho2[:N] * (1.0 - rho2[1:])
    lg1, lg2, lgr = _log_gaps(rho1, rho2, R, j1, j_big2, n1, n2, N)
    return StationarySolution(
        params=params,
        geometry=g,
        rho1=rho1,
        rho2=rho2,
        r_elong=R,
        j1=float(j1),
        j2=j2,
        j_big2=float(j_big2),
        j3=float(rho2[N - 1]),
        log_gap1=lg1,
        log_gap2=lg2,
        log_gap_r=lgr,
    )


def solve_stationary(
    params: ModelParams,
    g: UorfGeometry,
    tol: float = DEFAULT_TOL,
    method: str = "backward",
) -> StationarySolution:
    """Stationary solution for ``0 < rho0 <= 1/2``.

    Raises :class:`DomainError` for ``rho0 > 1/2`` (use the dynamic
    relaxation there), :class:`NoSignChangeError` when the initial bracket
    is invalid and :class:`NotConvergedError` when the bisection cap is hit.
    """
    validate_params(params, g)
    if not (0.0 < params.rho0 <= 0.5):
        raise DomainError(f"stationary shooting needs 0 < rho0 <= 1/2, got {params.rho0}")
    if method == "backward":
        return _solve_backward_route(params, g, tol)
    if method == "forward":
        return _solve_forward_route(params, g, tol)
    raise ValueError(f"unknown method {method!r}")


def _solve_backward_route(params, g, tol):
    n1, n2, n3, N = g.n1, g.n2, g.n3, g.downstream
    rho1 = np.zeros(n1 + 1)
    rho2 = np.zeros(N + 1)
    R = np.zeros(N + 2)
    status, lo, hi, _ = _solve_backward(
        params.rho0, params.c, n1, n2, n3, tol, MAX_BISECTIONS, rho1, rho2, R
    )
    if status == 1:
        raise NoSignChangeError(
            f"no sign change on start-codon density bracket [{lo}, {hi}]", lo, hi
        )
    if status == 2:
        raise NotConvergedError(f"bisection stalled with bracket [{lo}, {hi}]")
    best = None
    for x in (lo, hi):
        f = _entrance_density(x, params.c, n1, n2, N, rho1, rho2, R, MAX_BISECTIONS)
        if f == f and (best is None or abs(f - params.rho0) < best[0]):
            best = (abs(f - params.rho0), x)
    x = best[1]
    j1, j_big2, _, ok = _downstream_for(x, params.c, n2, N, R, rho2, MAX_BISECTIONS)
    _upstream_back(x, j1, n1, rho1)
    return _assemble(params, g, rho1.copy(), rho2.copy(), R[: n2 + 1].copy(), j1, j_big2)


def _solve_forward_route(params, g, tol):
    hi = critical_flow_psi(params.rho0, g.n1)
    lo = 1e-12
    s_lo, s_hi = residual(lo, params, g), residual(hi, params, g)
    if not (s_lo > 0 > s_hi):
        raise NoSignChangeError(f"residual has no sign change on [{lo}, {hi}]", lo, hi)
    # the forward map amplifies errors in j1, so bisect to machine precision
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if residual(mid, params, g) > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise NotConvergedError(f"forward bisection stalled with bracket [{lo}, {hi}]")
    j1 = lo
    up = density_iteration(j1, params.rho0, g.n1)
    rho1 = up.values
    x = rho1[-1]
    j_big2, R = elongating_branch(params.c * x, g.n2)
    rho2_0 = (1.0 - params.c) * x
    down, _ = downstream_sweep(j1 - j_big2 + rho2_0 * R[1], rho2_0, R, g.downstream)
    if down.survived < g.downstream:
        raise NotConvergedError("forward trajectory did not reach the lattice end")
    rho2 = np.array(down.values, dtype=float)
    rho2[-1] = 0.0
    return _assemble(params, g, rho1, rho2, R, j1, j_big2)
