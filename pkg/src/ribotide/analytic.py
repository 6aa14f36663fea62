"""Closed-form continuous limit of the stationary solution.

For ``c = c0 / n2`` and ``0 < rho0 < 1/2`` the scanning density along the
uORF approaches

    rho_star(rho0, tau) = -W(-2 rho0 exp(-rho0 (2 + c0 tau))) / 2,

with ``W`` the principal branch of the Lambert W function, and the exit flow
approaches ``phi(rho_star(rho0, 1))`` where ``phi(rho) = rho (1 - rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

from .core import DomainError

__all__ = [
    "LimitCurveSample",
    "lambert_w0",
    "phi",
    "phi_inverse",
    "rho_star",
    "limit_exit_flow",
    "limit_peak_density",
    "limit_profile",
]

INV_E = math.exp(-1.0)
_MAX_ITER = 50


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``.

    Halley iteration, started from the branch-point series when ``x`` is
    close to ``-1/e`` and from ``log x - log log x`` for large ``x``.
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("lambert_w0 of NaN")
    if x < -INV_E:
        # tolerate the rounding of -1/e itself
        if x < -INV_E * (1.0 + 4e-16):
            raise DomainError(f"lambert_w0 undefined for x={x} < -1/e")
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    if x < -0.32:
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)

    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w_new = w - step
        if w_new < -1.0:
            w_new = -1.0
        if abs(w_new - w) <= 4e-16 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def phi(rho: float) -> float:
    return rho * (1.0 - rho)


def phi_inverse(j: float) -> float:
    """Inverse of ``phi`` restricted to ``[0, 1/2]``."""
    if not (0.0 <= j <= 0.25):
        raise DomainError(f"phi_inverse needs 0 <= j <= 1/4, got {j}")
    # written to avoid cancellation for small j
    return 2.0 * j / (1.0 + math.sqrt(1.0 - 4.0 * j))


def _check_rho0(rho0: float):
    if not (0.0 < rho0 < 0.5):
        raise DomainError(f"continuous limit needs 0 < rho0 < 1/2, got {rho0}")


def rho_star(rho0: float, tau: float, c0: float) -> float:
    _check_rho0(rho0)
    if tau < 0.0 or c0 < 0.0:
        raise DomainError("rho_star needs tau >= 0 and c0 >= 0")
    arg = -2.0 * rho0 * math.exp(-rho0 * (2.0 + c0 * tau))
    return -0.5 * lambert_w0(arg)


def limit_exit_flow(rho0: float, c0: float) -> float:
    if rho0 == 0.0:
        return 0.0
    return phi(rho_star(rho0, 1.0, c0))


def limit_peak_density(c0: float) -> float:
    """Upstream density maximising the limit exit flow."""
    if c0 < 0.0:
        raise DomainError(f"c0 must be non-negative, got {c0}")
    return 1.0 / (2.0 + c0)


@dataclass(frozen=True)
class LimitCurveSample:
    tau: float
    rho_hat: float
    j_hat: float


def limit_profile(rho0: float, c0: float, grid_points: int) -> List[LimitCurveSample]:
    """Sample the limit density and flow on a uniform grid of ``tau`` in [0, 1]."""
    _check_rho0(rho0)
    if grid_points < 2:
        raise DomainError("grid_points must be at least 2")
    out = []
    for k in range(grid_points):
        tau = k / (grid_points - 1)
        r = rho_star(rho0, tau, c0)
        out.append(LimitCurveSample(tau, r, phi(r)))
    return out
