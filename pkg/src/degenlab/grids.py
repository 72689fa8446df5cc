"""Uniform tensor grids on [-1, 1]^d and scalar fields living on them.

Layout conventions used across the solver, certifier and lab:

* d = 1: values[i] sits at x_i = -1 + i h, h = 2 / (n - 1).
* d = 2: values[i, j] sits at (x_i, y_j); axis 0 is x, axis 1 is y
  (row-major, matching ``np.meshgrid(..., indexing="ij")``).

Interior nodes are those with all indices in 1 .. n-2; diagonal neighbours
of interior nodes always exist, which the wide-stencil operators rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MIN_NODES = 9


@dataclass(frozen=True)
class Grid:
    """Uniform grid with n nodes per axis on [-1, 1]^d, d in {1, 2}."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DomainError("Grid: dimension d must be 1 or 2")
        if self.n < MIN_NODES:
            raise DomainError(f"Grid: need at least {MIN_NODES} nodes per axis")

    @property
    def h(self) -> float:
        return 2.0 / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    def meshgrid(self):
        """Coordinate arrays of the full grid, shape == self.shape each."""
        if self.d == 1:
            return (self.axis,)
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        if self.d == 1:
            mask[0] = mask[-1] = True
        else:
            mask[0, :] = mask[-1, :] = True
            mask[:, 0] = mask[:, -1] = True
        return mask

    def sample(self, func) -> np.ndarray:
        """Evaluate a callable of d arguments on every node."""
        coords = self.meshgrid()
        vals = np.asarray(func(*coords), dtype=float)
        if vals.shape != self.shape:
            vals = np.broadcast_to(vals, self.shape).copy()
        return vals


@dataclass
class DiscreteField:
    """Scalar field on a Grid.  Mutable: the solver updates it in place."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise DomainError(
                f"DiscreteField: values shape {vals.shape} does not match "
                f"grid shape {self.grid.shape}"
            )
        self.values = vals

    @classmethod
    def from_function(cls, grid: Grid, func) -> "DiscreteField":
        return cls(grid=grid, values=grid.sample(func))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "DiscreteField":
        return cls(grid=grid, values=np.full(grid.shape, float(value)))

    def copy(self) -> "DiscreteField":
        return DiscreteField(grid=self.grid, values=self.values.copy())

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def assert_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError("DiscreteField contains non-finite values")

    def interior(self) -> np.ndarray:
        """View of the interior nodes."""
        if self.grid.d == 1:
            return self.values[1:-1]
        return self.values[1:-1, 1:-1]


def refine_linear(field: DiscreteField) -> DiscreteField:
    """Interpolate a field onto the grid with 2n - 1 nodes per axis.

    Fine nodes are the coarse nodes plus edge / cell midpoints, so linear
    interpolation is exact averaging; used to warm-start fine solves.
    """
    g = field.grid
    fine = Grid(d=g.d, n=2 * g.n - 1)
    u = field.values
    if g.d == 1:
        v = np.empty(fine.shape)
        v[0::2] = u
        v[1::2] = 0.5 * (u[:-1] + u[1:])
        return DiscreteField(grid=fine, values=v)
    v = np.empty(fine.shape)
    v[0::2, 0::2] = u
    v[1::2, 0::2] = 0.5 * (u[:-1, :] + u[1:, :])
    v[0::2, 1::2] = 0.5 * (u[:, :-1] + u[:, 1:])
    v[1::2, 1::2] = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    return DiscreteField(grid=fine, values=v)
