"""Problem bundles: everything that defines one transmission equation.

An instance fixes the data of

    sigma_plus(|Du + q|)  F(D^2 u) = f   where u > 0,
    sigma_minus(|Du + q|) F(D^2 u) = f   where u < 0,
    u = g on the boundary of [-1, 1]^d,

together with the constant C0 bounding |f| that the viscosity certificates
test against.  Where u = 0 the discretization uses the smaller of the two
laws, matching the minimal inequality that viscosity solutions satisfy
across the free boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticOperator
from .errors import DomainError
from .grids import Grid
from .laws import DegeneracyLaw


def _as_node_function(obj, what: str):
    """Normalize f / g specifications to a callable of coordinate arrays."""
    if callable(obj):
        return obj
    try:
        const = float(obj)
    except (TypeError, ValueError):
        raise DomainError(f"{what} must be a callable or a number") from None
    return lambda *coords: np.full_like(np.asarray(coords[0], dtype=float), const)


@dataclass(frozen=True)
class ProblemInstance:
    """Data of one equation on [-1, 1]^d.

    ``f`` and ``g`` may be numbers or callables of the coordinate arrays;
    ``q`` is the constant gradient shift (zero vector by default).
    """

    operator: EllipticOperator
    sigma_plus: DegeneracyLaw
    sigma_minus: DegeneracyLaw
    f: object
    g: object
    C0: float
    q: tuple = ()

    def __post_init__(self):
        if not (self.C0 >= 0.0 and np.isfinite(self.C0)):
            raise DomainError("ProblemInstance: C0 must be a finite non-negative real")
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))

    def q_vector(self, d: int) -> np.ndarray:
        if not self.q:
            return np.zeros(d)
        if len(self.q) != d:
            raise DomainError(
                f"ProblemInstance: q has length {len(self.q)}, expected {d}"
            )
        return np.asarray(self.q, dtype=float)

    def f_on(self, grid: Grid) -> np.ndarray:
        return grid.sample(_as_node_function(self.f, "f"))

    def g_on(self, grid: Grid) -> np.ndarray:
        return grid.sample(_as_node_function(self.g, "g"))
