"""Ribosome flow through an mRNA with an upstream open reading frame.

Three engines compute the stationary exit flow of scanning ribosomes: a
stochastic exclusion process (:mod:`ribotide.tasep`), a deterministic
balance model (:mod:`ribotide.stationary`, :mod:`ribotide.dynamic`) and its
closed-form continuous limit (:mod:`ribotide.analytic`).
"""

from .core import (
    BoundViolationError,
    DensityProfile,
    DomainError,
    Engine,
    FlowCurve,
    GeometryError,
    ModelParams,
    NoSignChangeError,
    NotConvergedError,
    RibotideError,
    SolverError,
    UorfGeometry,
)

__all__ = [
    "BoundViolationError",
    "DensityProfile",
    "DomainError",
    "Engine",
    "FlowCurve",
    "GeometryError",
    "ModelParams",
    "NoSignChangeError",
    "NotConvergedError",
    "RibotideError",
    "SolverError",
    "UorfGeometry",
]

__version__ = "0.1.0"
