"""Boundary defining functions, radial speed profiles, and foliations.

The convention throughout: rho > 0 inside the manifold, rho = 0 on the
boundary, and |grad rho| > 0 on a collar around the zero level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import PreconditionError


class DomainSpec:
    """Domain described by a smooth defining function rho (positive inside)."""

    def __init__(self, rho, grad_rho=None, *, name="custom", collar=0.05,
                 center=None, diameter=None):
        self._rho = rho
        self._grad = grad_rho
        self.name = name
        self.collar = collar  # width of the collar where |grad rho| > 0 is promised
        self.center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        self.diameter = diameter

    def rho(self, points) -> np.ndarray:
        return self._rho(np.atleast_2d(points))

    def grad_rho(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        if self._grad is not None:
            return self._grad(p)
        h = 1e-6
        n = p.shape[1]
        out = np.empty_like(p)
        for k in range(n):
            dp = np.zeros(n)
            dp[k] = h
            out[:, k] = (self._rho(p + dp) - self._rho(p - dp)) / (2 * h)
        return out

    def inside(self, points, tol=0.0) -> np.ndarray:
        return self.rho(points) > tol

    def require_nondegenerate(self, points, tol=1e-10):
        g = self.grad_rho(points)
        bad = np.linalg.norm(g, axis=-1) <= tol
        if np.any(bad):
            where = np.atleast_2d(points)[bad][0]
            raise PreconditionError(f"grad rho vanishes near {where}")


class BallDomain(DomainSpec):
    """Ball of radius R: rho = R - |x - center|."""

    def __init__(self, radius: float, center=None, ndim: int = 2):
        self.radius = float(radius)
        ctr = np.zeros(ndim) if center is None else np.asarray(center, dtype=float)

        def rho(p):
            return self.radius - np.linalg.norm(p - ctr, axis=-1)

        def grad(p):
            d = p - ctr
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            r = np.where(r == 0, 1.0, r)
            return -d / r

        super().__init__(rho, grad, name=f"ball(R={radius})", center=ctr,
                         diameter=2 * radius)

    def boundary_point(self, angles) -> np.ndarray:
        """Boundary points from angle parameters (theta) or (theta, phi)."""
        a = np.atleast_2d(angles)
        if a.shape[1] == 1:
            p = np.stack([np.cos(a[:, 0]), np.sin(a[:, 0])], axis=-1)
        elif a.shape[1] == 2:
            st = np.sin(a[:, 1])
            p = np.stack([st * np.cos(a[:, 0]), st * np.sin(a[:, 0]),
                          np.cos(a[:, 1])], axis=-1)
        else:
            raise ValueError("angles must have 1 or 2 columns")
        return self.center + self.radius * p


@dataclass
class RadialSpeed:
    """Scalar radial profile c(r) on [0, R], closed form or sampled."""

    R: float
    fn: object = None            # callable c(r), vectorized
    dfn: object = None           # optional analytic derivative
    samples: np.ndarray = None   # 1-D samples on a uniform grid over [0, R]
    expression: str = None       # optional source expression (file round-trips)
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.fn is None and self.samples is None:
            raise ValueError("provide fn or samples")
        if self.samples is not None:
            r = np.linspace(0.0, self.R, len(self.samples))
            self._spline = CubicSpline(r, np.asarray(self.samples, dtype=float))
        rr = np.linspace(0.0, self.R, 256)
        if np.any(self.value(rr) <= 0):
            raise ValueError("radial speed must be positive on [0, R]")

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(r), dtype=float)
        return self._spline(np.clip(r, 0.0, self.R))

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.dfn is not None:
            return np.asarray(self.dfn(r), dtype=float)
        if self.fn is not None:
            h = 1e-6 * max(self.R, 1.0)
            return (self.value(r + h) - self.value(r - h)) / (2 * h)
        return self._spline(np.clip(r, 0.0, self.R), 1)

    def speed_fn_nd(self):
        """Lift to a speed callable on points; c(|x|) clipped at R."""
        def c(p):
            r = np.linalg.norm(np.atleast_2d(p), axis=-1)
            return self.value(np.minimum(r, self.R))
        return c


@dataclass
class FoliationSpec:
    """Foliation by level sets of rho_fol: M -> [0, inf), boundary at level 0.

    Levels increase inward; layer-stripping intervals (t_j', t_j'') cover
    [0, depth] with the stated fractional overlap and satisfy
    t_j'' in (t_{j+1}', t_{j+1}'').
    """

    rho_fol: object
    depth: float                      # T': coverage target, < sup rho_fol
    n_levels: int = 8                 # scan resolution for checks
    n_shells: int = 4                 # layer-stripping intervals
    overlap: float = 0.25
    grad_fol: object = None

    def levels(self) -> np.ndarray:
        return np.linspace(self.depth / self.n_levels, self.depth, self.n_levels)

    def shell_intervals(self) -> list[tuple[float, float]]:
        w = self.depth / self.n_shells
        out = []
        for j in range(1, self.n_shells + 1):
            lo = (j - 1) * w - self.overlap * w
            hi = j * w
            out.append((lo, hi))
        return out

    def value(self, points) -> np.ndarray:
        return self.rho_fol(np.atleast_2d(points))

    def gradient(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        if self.grad_fol is not None:
            return self.grad_fol(p)
        h = 1e-6
        n = p.shape[1]
        out = np.empty_like(p)
        for k in range(n):
            dp = np.zeros(n)
            dp[k] = h
            out[:, k] = (self.rho_fol(p + dp) - self.rho_fol(p - dp)) / (2 * h)
        return out


def radial_foliation(radius: float, depth: float, n_shells: int = 4,
                     overlap: float = 0.25, center=None, ndim: int = 2) -> FoliationSpec:
    """Foliation by concentric spheres: rho_fol = R - |x - center|."""
    ctr = np.zeros(ndim) if center is None else np.asarray(center, dtype=float)

    def rho(p):
        return radius - np.linalg.norm(np.atleast_2d(p) - ctr, axis=-1)

    def grad(p):
        d = np.atleast_2d(p) - ctr
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        r = np.where(r == 0, 1.0, r)
        return -d / r

    return FoliationSpec(rho, depth, n_shells=n_shells, overlap=overlap, grad_fol=grad)
