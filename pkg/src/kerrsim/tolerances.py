"""Numerical tolerance constants shared across the package.

All magic tolerances live in one frozen record so that tests and library code
agree on what "negligible" means.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # coherent-state construction: maximum truncated tail weight 1 - sum |c_n|^2
    tail: float = 1e-6
    # creation operator: maximum population of the top Fock level before erroring
    overflow: float = 1e-8
    # three-level targets: maximum relative amplitude allowed above n = 2
    subspace: float = 1e-6
    # Hermiticity residual for density matrices
    hermitian: float = 1e-10
    # most negative eigenvalue tolerated in a "positive semidefinite" matrix
    psd_floor: float = 1e-9
    # |norm - 1| for a vector labeled normalized
    norm_unit: float = 1e-10
    # conditional-operation weight below which a zero-output warning is raised
    zero_weight: float = 1e-15
    # quadrature grid: maximum probability mass missing from the tabulated range
    grid_deficit: float = 1e-6
    # POVM per-phase completeness residual
    completeness: float = 1e-6


TOL = Tolerances()
