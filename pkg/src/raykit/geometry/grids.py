"""Rectangular lattices and C2 cubic-spline fields sampled on them.

Every sampled quantity in the toolkit (speeds, metric components, tensor
components) lives on a `Grid` and is evaluated through `ScalarField`, a
tensor-product cubic B-spline interpolant with analytic first and second
derivatives.  Samples are extended by two ghost cells per side (quadratic
extrapolation) and prefiltered once by an exact banded collocation solve;
evaluation is vectorized over batches of points, which is what makes the
ray tracers fast enough in pure numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

MARGIN = 2  # ghost cells appended on each side by quadratic extrapolation


@dataclass(frozen=True)
class Grid:
    """Axis-aligned rectangular lattice: node i sits at origin + i*spacing."""

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.origin) == len(self.spacing) == len(self.shape)):
            raise ValueError("origin, spacing, shape must share length")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("spacing must be positive")
        if any(m < 4 for m in self.shape):
            raise ValueError("need at least 4 nodes per axis for cubic interpolation")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + (m - 1) * s for o, s, m in zip(self.origin, self.spacing, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [o + s * np.arange(m) for o, s, m in zip(self.origin, self.spacing, self.shape)]

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (prod(shape), ndim), row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, points: np.ndarray, pad: float = 0.0) -> np.ndarray:
        """Boolean mask of points inside the grid bounding box (+pad)."""
        p = np.atleast_2d(points)
        lo = np.asarray(self.origin) - pad
        hi = np.asarray(self.upper) + pad
        return np.all((p >= lo) & (p <= hi), axis=-1)

    @staticmethod
    def from_bbox(lo, hi, shape) -> "Grid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = tuple(int(m) for m in shape)
        spacing = tuple((hi - lo) / (np.asarray(shape) - 1))
        return Grid(tuple(lo), spacing, shape)


def _extend_quadratic(values: np.ndarray, margin: int = MARGIN) -> np.ndarray:
    """Pad an nd array by `margin` cells per side, extrapolating each axis
    quadratically (constant second difference)."""
    out = values.astype(float, copy=True)
    for axis in range(values.ndim):
        for _ in range(margin):
            first = 3 * out.take([0], axis) - 3 * out.take([1], axis) + out.take([2], axis)
            last = 3 * out.take([-1], axis) - 3 * out.take([-2], axis) + out.take([-3], axis)
            out = np.concatenate([first, out, last], axis=axis)
    return out


def _prefilter_axis(values: np.ndarray, axis: int) -> np.ndarray:
    """Cubic B-spline collocation along one axis.

    Input has m nodes along `axis`; output has m + 2 coefficients (one extra
    layer per side).  Interior rows enforce interpolation at the nodes,
    the two end rows a vanishing fourth difference of the coefficients, so
    polynomial data up to degree 3 is reproduced exactly.
    """
    arr = np.moveaxis(values, axis, 0)
    m = arr.shape[0]
    lead = arr.reshape(m, -1)
    neq = m + 2
    bw = 4  # end rows span 5 coefficients
    ab = np.zeros((2 * bw + 1, neq))  # diagonal-ordered form, bandwidths (bw, bw)

    def put(i, j, val):
        ab[bw + i - j, j] = val

    # rows 1..m: interpolation at node i-1 against coefficients i-1, i, i+1
    for off, val in ((-1, 1 / 6), (0, 4 / 6), (1, 1 / 6)):
        i = np.arange(1, m + 1)
        ab[bw - off, i + off] = val
    for j, val in enumerate((1.0, -4.0, 6.0, -4.0, 1.0)):
        put(0, j, val)
        put(neq - 1, neq - 1 - j, val)

    rhs = np.zeros((neq, lead.shape[1]))
    rhs[1 : m + 1] = lead
    coef = solve_banded((bw, bw), ab, rhs)
    out = coef.reshape((neq,) + arr.shape[1:])
    return np.moveaxis(out, 0, axis)


def _bspline_weights(t: np.ndarray, deriv: int) -> np.ndarray:
    """Cubic B-spline weights (and t-derivatives) for the 4-node stencil.

    t in [0, 1] is the fractional offset past the stencil's second node;
    returns shape t.shape + (4,).
    """
    t = np.asarray(t)
    w = np.empty(t.shape + (4,))
    if deriv == 0:
        w[..., 0] = (1 - t) ** 3 / 6.0
        w[..., 1] = (4.0 - 6.0 * t**2 + 3.0 * t**3) / 6.0
        w[..., 2] = (1.0 + 3.0 * t + 3.0 * t**2 - 3.0 * t**3) / 6.0
        w[..., 3] = t**3 / 6.0
    elif deriv == 1:
        w[..., 0] = -0.5 * (1 - t) ** 2
        w[..., 1] = 0.5 * (-4.0 * t + 3.0 * t**2)
        w[..., 2] = 0.5 * (1.0 + 2.0 * t - 3.0 * t**2)
        w[..., 3] = 0.5 * t**2
    elif deriv == 2:
        w[..., 0] = 1.0 - t
        w[..., 1] = 3.0 * t - 2.0
        w[..., 2] = 1.0 - 3.0 * t
        w[..., 3] = t
    else:  # pragma: no cover
        raise ValueError("deriv must be 0, 1, or 2")
    return w


class ScalarField:
    """C2 cubic-spline interpolant of samples on a Grid.

    The coefficient lattice has shape grid.shape + 2*MARGIN + 2 per axis
    (ghost cells plus one collocation layer); `coefficients()` exposes it as
    the dof array that sparse transform operators act on.
    """

    def __init__(self, grid: Grid, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != grid.shape:
            raise ValueError(f"samples shape {samples.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite values")
        self.grid = grid
        self.samples = samples
        coef = _extend_quadratic(samples, MARGIN)
        for axis in range(grid.ndim):
            coef = _prefilter_axis(coef, axis)
        self._coef = coef
        # coefficient k corresponds to position coef_origin + k*spacing
        self._origin = np.asarray(grid.origin) - (MARGIN + 1) * np.asarray(grid.spacing)
        self._spacing = np.asarray(grid.spacing)
        self._cshape = np.asarray(coef.shape)

    @property
    def coef_shape(self) -> tuple[int, ...]:
        return tuple(int(m) for m in self._cshape)

    def coefficients(self) -> np.ndarray:
        return self._coef

    def _stencil(self, points: np.ndarray):
        """Stencil base indices and fractional offsets for a batch of points."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        u = (p - self._origin) / self._spacing
        base = np.floor(u).astype(int) - 1
        base = np.clip(base, 0, self._cshape - 4)
        t = u - (base + 1)
        return base, t

    def _gather(self, base: np.ndarray) -> np.ndarray:
        """Gather 4**n coefficient neighborhoods: (N, 4, ...) array."""
        n = self.grid.ndim
        idx = [base[:, k][(...,) + (None,) * n] + np.arange(4).reshape(
            (1,) * (k + 1) + (4,) + (1,) * (n - 1 - k)) for k in range(n)]
        return self._coef[tuple(idx)]

    def stencil_entries(self, points: np.ndarray):
        """Interpolation stencil as (indices, weights) per point.

        Returns (idx, w) with shape (N, 4**n): idx are flat row-major indices
        into coefficients(), w the cubic B-spline weights, so that
        value(points) == sum(w * coefficients().ravel()[idx], axis=1).
        Used to assemble sparse transform operators that reproduce value().
        """
        base, t = self._stencil(points)
        n = self.grid.ndim
        ws = [_bspline_weights(t[:, k], 0) for k in range(n)]
        w = ws[0]
        for k in range(1, n):
            w = w[..., None] * ws[k][(slice(None),) + (None,) * k + (slice(None),)]
        w = w.reshape(len(base), -1)
        offs = np.stack(np.meshgrid(*([np.arange(4)] * n), indexing="ij"), axis=-1).reshape(-1, n)
        nodes = base[:, None, :] + offs[None, :, :]
        flat = np.zeros(nodes.shape[:2], dtype=np.int64)
        stride = 1
        for k in range(n - 1, -1, -1):
            flat += nodes[:, :, k] * stride
            stride *= int(self._cshape[k])
        return flat, w

    def _eval(self, points: np.ndarray, derivs: tuple[int, ...]) -> np.ndarray:
        base, t = self._stencil(points)
        c = self._gather(base)
        n = self.grid.ndim
        letters = "ijk"[:n]
        ws = []
        for k in range(n):
            w = _bspline_weights(t[:, k], derivs[k])
            if derivs[k] > 0:
                w = w / self._spacing[k] ** derivs[k]
            ws.append(w)
        spec = "n" + letters + "," + ",".join("n" + letter for letter in letters) + "->n"
        return np.einsum(spec, c, *ws)

    def value(self, points: np.ndarray) -> np.ndarray:
        return self._eval(points, (0,) * self.grid.ndim)

    def value_gradient(self, points: np.ndarray):
        """Value and gradient in one pass (single coefficient gather)."""
        base, t = self._stencil(points)
        c = self._gather(base)
        n = self.grid.ndim
        letters = "ijk"[:n]
        spec_rhs = ",".join("n" + letter for letter in letters)
        w0 = [_bspline_weights(t[:, k], 0) for k in range(n)]
        w1 = [_bspline_weights(t[:, k], 1) / self._spacing[k] for k in range(n)]
        val = np.einsum("n" + letters + "," + spec_rhs + "->n", c, *w0)
        grad = np.empty((len(t), n))
        for k in range(n):
            ws = [w1[j] if j == k else w0[j] for j in range(n)]
            grad[:, k] = np.einsum("n" + letters + "," + spec_rhs + "->n", c, *ws)
        return val, grad

    def value_gradient_hessian(self, points: np.ndarray):
        """Value, gradient, and Hessian in one pass."""
        base, t = self._stencil(points)
        c = self._gather(base)
        n = self.grid.ndim
        letters = "ijk"[:n]
        spec_rhs = ",".join("n" + letter for letter in letters)
        spec = "n" + letters + "," + spec_rhs + "->n"
        w = [[_bspline_weights(t[:, k], d) / self._spacing[k] ** d for k in range(n)]
             for d in range(3)]
        val = np.einsum(spec, c, *w[0])
        grad = np.empty((len(t), n))
        hess = np.empty((len(t), n, n))
        for k in range(n):
            ws = [w[1][j] if j == k else w[0][j] for j in range(n)]
            grad[:, k] = np.einsum(spec, c, *ws)
        for a in range(n):
            for b in range(a, n):
                ws = []
                for j in range(n):
                    d = (1 if j == a else 0) + (1 if j == b else 0)
                    ws.append(w[d][j])
                hess[:, a, b] = np.einsum(spec, c, *ws)
                hess[:, b, a] = hess[:, a, b]
        return val, grad, hess

    def gradient(self, points: np.ndarray) -> np.ndarray:
        n = self.grid.ndim
        cols = []
        for k in range(n):
            d = tuple(1 if j == k else 0 for j in range(n))
            cols.append(self._eval(points, d))
        return np.stack(cols, axis=-1)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        n = self.grid.ndim
        p = np.atleast_2d(points)
        H = np.empty((len(p), n, n))
        for a in range(n):
            for b in range(a, n):
                d = tuple((1 if j == a else 0) + (1 if j == b else 0) for j in range(n))
                H[:, a, b] = self._eval(p, d)
                H[:, b, a] = H[:, a, b]
        return H

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.value(points)


def coefficients_to_samples(field: ScalarField) -> np.ndarray:
    """Round-trip check helper: evaluate a field back on its own nodes."""
    return field.value(field.grid.nodes()).reshape(field.grid.shape)
