"""Symmetric tensor fields of order 0, 1, 2 on the metric lattice."""

from __future__ import annotations

import numpy as np

from ..geometry.grids import Grid, ScalarField


def sym_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def n_components(order: int, ndim: int) -> int:
    if order == 0:
        return 1
    if order == 1:
        return ndim
    if order == 2:
        return ndim * (ndim + 1) // 2
    raise ValueError("tensor order must be 0, 1, or 2")


class TensorGrid:
    """Order-m symmetric tensor field; components stored once (f_ij = f_ji).

    Component order: m=0 a single block; m=1 the coordinate components;
    m=2 the upper-triangle pairs of sym_pairs(n).
    """

    def __init__(self, grid: Grid, order: int, components: np.ndarray,
                 interior_supported: bool = False):
        components = np.asarray(components, dtype=float)
        ncomp = n_components(order, grid.ndim)
        if components.shape != (ncomp,) + grid.shape:
            raise ValueError(f"components must have shape {(ncomp,) + grid.shape}")
        if not np.all(np.isfinite(components)):
            raise ValueError("tensor components contain non-finite values")
        self.grid = grid
        self.order = order
        self.components = components
        self.interior_supported = interior_supported
        self._fields = None

    @property
    def ncomp(self) -> int:
        return self.components.shape[0]

    def fields(self) -> list[ScalarField]:
        if self._fields is None:
            self._fields = [ScalarField(self.grid, comp) for comp in self.components]
        return self._fields

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_function(grid: Grid, order: int, fn, interior_supported=False) -> "TensorGrid":
        """Sample fn(points) -> (N,) or (N, ncomp) on the grid."""
        vals = np.asarray(fn(grid.nodes()))
        ncomp = n_components(order, grid.ndim)
        if vals.ndim == 1:
            vals = vals[:, None]
        comps = np.stack([vals[:, k].reshape(grid.shape) for k in range(ncomp)])
        return TensorGrid(grid, order, comps, interior_supported)

    @staticmethod
    def zeros(grid: Grid, order: int) -> "TensorGrid":
        return TensorGrid(grid, order,
                          np.zeros((n_components(order, grid.ndim),) + grid.shape))

    # -- evaluation ----------------------------------------------------------

    def values(self, points) -> np.ndarray:
        """Interpolated components at points, (N, ncomp)."""
        return np.stack([f.value(points) for f in self.fields()], axis=-1)

    def contract(self, points, velocities) -> np.ndarray:
        """f, f_i v^i, or f_ij v^i v^j at points (symmetry factor applied)."""
        vals = self.values(points)
        v = np.atleast_2d(velocities)
        if self.order == 0:
            return vals[:, 0]
        if self.order == 1:
            return np.einsum("nk,nk->n", vals, v)
        out = np.zeros(len(v))
        for k, (i, j) in enumerate(sym_pairs(self.grid.ndim)):
            fac = 1.0 if i == j else 2.0
            out += fac * vals[:, k] * v[:, i] * v[:, j]
        return out

    def contraction_factors(self, velocities) -> np.ndarray:
        """Per-component velocity factors, (N, ncomp): contract = sum(values * factors)."""
        v = np.atleast_2d(velocities)
        return contraction_factors(self.order, self.grid.ndim, v)

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "TensorGrid") -> "TensorGrid":
        self._check_compatible(other)
        return TensorGrid(self.grid, self.order, self.components + other.components)

    def __sub__(self, other: "TensorGrid") -> "TensorGrid":
        self._check_compatible(other)
        return TensorGrid(self.grid, self.order, self.components - other.components)

    def __mul__(self, scalar: float) -> "TensorGrid":
        return TensorGrid(self.grid, self.order, self.components * float(scalar),
                          self.interior_supported)

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if self.grid != other.grid or self.order != other.order:
            raise ValueError("tensor grids are incompatible")

    def norm_l2(self, mask=None, cell_volume=True) -> float:
        """Discrete L2 norm over nodes (symmetry multiplicity applied for m=2)."""
        comps = self.components.reshape(self.ncomp, -1)
        mult = self._component_multiplicity()[:, None]
        sq = mult * comps**2
        if mask is not None:
            sq = sq[:, np.asarray(mask).ravel()]
        total = float(sq.sum())
        if cell_volume:
            total *= self.grid.cell_volume
        return np.sqrt(total)

    def _component_multiplicity(self) -> np.ndarray:
        if self.order != 2:
            return np.ones(self.ncomp)
        return np.array([1.0 if i == j else 2.0 for i, j in sym_pairs(self.grid.ndim)])


def contraction_factors(order: int, ndim: int, velocities: np.ndarray) -> np.ndarray:
    """Velocity monomials multiplying each stored component in a contraction."""
    v = np.atleast_2d(velocities)
    if order == 0:
        return np.ones((len(v), 1))
    if order == 1:
        return v.copy()
    cols = []
    for i, j in sym_pairs(ndim):
        fac = 1.0 if i == j else 2.0
        cols.append(fac * v[:, i] * v[:, j])
    return np.stack(cols, axis=-1)
