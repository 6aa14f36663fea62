"""Shared domain types for the uORF ribosome-flow models.

Sites are indexed from 0 exactly as on the lattice: positions ``0..n_star-1``
are physical and ``n_star`` is a ghost site that is always empty. The start
codon sits at ``n1`` and the stop codon at ``n1 + n2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "RibotideError",
    "GeometryError",
    "DomainError",
    "SolverError",
    "NoSignChangeError",
    "NotConvergedError",
    "BoundViolationError",
    "UorfGeometry",
    "ModelParams",
    "DensityProfile",
    "FlowCurve",
    "Engine",
    "validate_geometry",
    "validate_params",
    "scanning_flow",
    "elongating_flow",
]

# slack for float noise when checking density bounds
BOUND_SLACK = 1e-12


class RibotideError(Exception):
    """Base class for all package errors."""


class GeometryError(RibotideError, ValueError):
    pass


class DomainError(RibotideError, ValueError):
    pass


class SolverError(RibotideError, RuntimeError):
    pass


class NoSignChangeError(SolverError):
    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class NotConvergedError(SolverError):
    pass


class BoundViolationError(SolverError):
    pass


@dataclass(frozen=True)
class UorfGeometry:
    """Segment lengths of the lattice.

    ``n1`` sites precede the start codon, ``n2`` sites run from start to stop
    codon and ``n3`` sites follow the stop codon. ``n_star`` is stored
    redundantly and must equal the sum.
    """

    n1: int
    n2: int
    n3: int
    n_star: Optional[int] = None

    def __post_init__(self):
        if self.n_star is None:
            object.__setattr__(self, "n_star", self.n1 + self.n2 + self.n3)
        validate_geometry(self)

    @property
    def start(self) -> int:
        return self.n1

    @property
    def stop(self) -> int:
        return self.n1 + self.n2

    @property
    def downstream(self) -> int:
        """Number of sites from the start codon to the lattice end (n2 + n3)."""
        return self.n2 + self.n3


def validate_geometry(g: UorfGeometry) -> UorfGeometry:
    for name in ("n1", "n2", "n3", "n_star"):
        value = getattr(g, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise GeometryError(f"{name} must be an integer, got {value!r}")
    if g.n1 < 1:
        raise GeometryError(f"n1 must be >= 1, got {g.n1}")
    if g.n2 < 2:
        raise GeometryError(f"n2 must be >= 2, got {g.n2}")
    if g.n3 < 0:
        raise GeometryError(f"n3 must be >= 0, got {g.n3}")
    if g.n_star != g.n1 + g.n2 + g.n3:
        raise GeometryError(
            f"n_star mismatch: n_star={g.n_star} but n1+n2+n3={g.n1 + g.n2 + g.n3}"
        )
    return g


@dataclass(frozen=True)
class ModelParams:
    """Upstream density ``rho0``, conversion probability ``c`` and velocity ``v``.

    ``c0`` is the scaled conversion rate ``c * n2``; it is optional and only
    checked against a geometry in :func:`validate_params`.
    """

    rho0: float
    c: float
    v: float = 1.0
    c0: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.rho0 < 1.0):
            raise DomainError(f"rho0 must lie in (0, 1), got {self.rho0}")
        if not (0.0 < self.c < 1.0):
            raise DomainError(f"c must lie in (0, 1), got {self.c}")
        if not (self.v > 0.0) or not math.isfinite(self.v):
            raise DomainError(f"v must be positive, got {self.v}")
        if self.c0 is not None and not (self.c0 > 0.0):
            raise DomainError(f"c0 must be positive, got {self.c0}")

    @classmethod
    def scaled(cls, rho0: float, c0: float, geometry: UorfGeometry, v: float = 1.0):
        """Parameters with ``c = c0 / n2``."""
        return cls(rho0=rho0, c=c0 / geometry.n2, v=v, c0=c0)

    def replace(self, **changes) -> "ModelParams":
        values = dict(rho0=self.rho0, c=self.c, v=self.v, c0=self.c0)
        values.update(changes)
        return ModelParams(**values)


def validate_params(params: ModelParams, g: UorfGeometry) -> ModelParams:
    if params.c0 is not None and not math.isclose(
        params.c0, params.c * g.n2, rel_tol=1e-12, abs_tol=0.0
    ):
        raise DomainError(
            f"c0={params.c0} inconsistent with c*n2={params.c * g.n2}"
        )
    return params


def scanning_flow(rho_s_n: float, rho_next_total: float) -> float:
    """Flow of scanning particles out of a site into a partly filled neighbour."""
    return rho_s_n * (1.0 - rho_next_total)


def elongating_flow(rho_e_n: float, rho_e_next: float) -> float:
    """Flow of elongating particles; scanning occupancy ahead does not block them."""
    return rho_e_n * (1.0 - rho_e_next)


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityProfile:
    """Per-site densities of scanning (``rho_s``) and elongating (``rho_e``) particles.

    Both arrays have length ``n_star + 1``; the last entry is the ghost site.
    """

    geometry: UorfGeometry
    rho_s: np.ndarray
    rho_e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho_s", _frozen(self.rho_s, "rho_s"))
        object.__setattr__(self, "rho_e", _frozen(self.rho_e, "rho_e"))
        problems = self.violations()
        if problems:
            raise DomainError("invalid density profile: " + "; ".join(problems))

    def violations(self, slack: float = BOUND_SLACK):
        g = self.geometry
        s, e = self.rho_s, self.rho_e
        size = g.n_star + 1
        if s.shape != (size,) or e.shape != (size,):
            return [f"arrays must have length n_star+1={size}"]
        out = []
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
            out.append("non-finite density")
            return out
        if s.min() < -slack:
            out.append(f"rho_s negative at site {int(np.argmin(s))}")
        if e.min() < -slack:
            out.append(f"rho_e negative at site {int(np.argmin(e))}")
        total = s + e
        if total.max() > 1.0 + slack:
            out.append(f"rho_s + rho_e exceeds 1 at site {int(np.argmax(total))}")
        outside = np.concatenate([e[: g.n1], e[g.stop :]])
        if outside.size and np.abs(outside).max() > slack:
            out.append("rho_e nonzero outside the start-stop segment")
        if abs(s[g.n_star]) > slack:
            out.append("ghost site rho_s must be 0")
        return out

    @classmethod
    def empty(cls, geometry: UorfGeometry) -> "DensityProfile":
        zeros = np.zeros(geometry.n_star + 1)
        return cls(geometry, zeros, zeros)

    def scanning_flows(self) -> np.ndarray:
        """``f_n^s`` for n = 0..n_star-1."""
        s, e = self.rho_s, self.rho_e
        return s[:-1] * (1.0 - s[1:] - e[1:])

    def elongating_flows(self) -> np.ndarray:
        """``f_n^e`` for n = 0..n_star-1."""
        e = self.rho_e
        return e[:-1] * (1.0 - e[1:])


class Engine(str, enum.Enum):
    TASEP = "tasep"
    DETERMINISTIC = "deterministic"
    LIMIT = "limit"


@dataclass(frozen=True)
class FlowCurve:
    """Exit flow ``j3`` sampled at strictly increasing upstream densities."""

    points: Tuple[Tuple[float, float], ...]
    engine_tag: Engine
    errors: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        pts = tuple((float(r), float(j)) for r, j in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "engine_tag", Engine(self.engine_tag))
        object.__setattr__(self, "errors", tuple(float(x) for x in self.errors))
        rhos = [r for r, _ in pts]
        if any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise DomainError("FlowCurve rho0 values must be strictly increasing")
        if self.errors and len(self.errors) != len(pts):
            raise DomainError("FlowCurve errors must match points")

    @property
    def rho0(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    @property
    def j3(self) -> np.ndarray:
        return np.array([j for _, j in self.points])
