"""Boundary parameterizations with metric-orthonormal frames.

A chart maps boundary parameters (an angle, or two spherical angles) to
boundary points and carries, at each point, the inward unit normal and a
tangential frame, all orthonormal in the metric g.  Inward directions are
parameterized by their tangential projection in the unit ball of the
boundary tangent space, which is the lens-data convention used throughout.
"""

from __future__ import annotations

import numpy as np

from ..errors import PreconditionError
from ..geometry.domain import BallDomain, DomainSpec
from ..geometry.metric import MetricField

GRAZING_BAND = 1e-3  # |tangential| above 1 - band short-circuits to sigma = Id


class BoundaryChart:
    """Parameterization of the boundary of a domain.

    For balls the parameters are angles; for general star-shaped domains
    the level set {rho = 0} is sampled along rays from the center.
    """

    def __init__(self, metric: MetricField, domain: DomainSpec):
        self.metric = metric
        self.domain = domain
        self.ndim = metric.ndim
        self.n_params = self.ndim - 1

    # -- points ------------------------------------------------------------

    def point(self, params) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if isinstance(self.domain, BallDomain):
            return self.domain.boundary_point(params)
        return self._level_set_point(params)

    def _level_set_point(self, params) -> np.ndarray:
        ctr = self.domain.center
        if self.ndim == 2:
            dirs = np.stack([np.cos(params[:, 0]), np.sin(params[:, 0])], axis=-1)
        else:
            st = np.sin(params[:, 1])
            dirs = np.stack([st * np.cos(params[:, 0]), st * np.sin(params[:, 0]),
                             np.cos(params[:, 1])], axis=-1)
        lo = np.zeros(len(dirs))
        hi = np.full(len(dirs), float(np.min(np.asarray(self.metric.grid.upper) - ctr)) * 0.98)
        f_lo = self.domain.rho(ctr + lo[:, None] * dirs)
        if np.any(f_lo <= 0):
            raise PreconditionError("chart center must be inside the domain")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            f = self.domain.rho(ctr + mid[:, None] * dirs)
            lo = np.where(f > 0, mid, lo)
            hi = np.where(f > 0, hi, mid)
        return ctr + (0.5 * (lo + hi))[:, None] * dirs

    def param_of(self, points) -> np.ndarray:
        p = np.atleast_2d(points) - self.domain.center
        if self.ndim == 2:
            return np.arctan2(p[:, 1], p[:, 0])[:, None] % (2 * np.pi)
        theta = np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi)
        phi = np.arccos(np.clip(p[:, 2] / np.linalg.norm(p, axis=-1), -1, 1))
        return np.stack([theta, phi], axis=-1)

    # -- frames --------------------------------------------------------------

    def frames(self, points):
        """(inward normal, tangent frame) at boundary points, g-orthonormal.

        normal: (N, n); tangents: (N, n-1, n) rows g-orthonormal and
        g-orthogonal to the normal (checked to 1e-10 in tests).
        """
        p = np.atleast_2d(points)
        N, n = p.shape
        grad = self.domain.grad_rho(p)
        g = self.metric.metric_matrix(p)
        G = self.metric.cometric_matrix(p)
        nu = np.einsum("nij,nj->ni", G, grad)
        nu = nu / np.sqrt(np.einsum("nij,ni,nj->n", g, nu, nu))[:, None]

        if n == 2:
            # rotate grad rho: continuous orientation, g-orthogonal to nu exactly
            t = np.stack([-grad[:, 1], grad[:, 0]], axis=-1)
            t = t / np.sqrt(np.einsum("nij,ni,nj->n", g, t, t))[:, None]
            return nu, t[:, None, :]

        tangents = np.empty((N, n - 1, n))
        basis = np.eye(n)
        for i in range(N):
            acc = []
            for k in range(n):
                v = basis[k] - (basis[k] @ g[i] @ nu[i]) * nu[i]
                for u in acc:
                    v = v - (v @ g[i] @ u) * u
                norm = np.sqrt(v @ g[i] @ v)
                if norm > 1e-8:
                    acc.append(v / norm)
                if len(acc) == n - 1:
                    break
            tangents[i] = np.asarray(acc)
        return nu, tangents

    # -- direction parameterization ------------------------------------------

    def direction_from_tangential(self, points, tangential, inward=True):
        """Unit vector with the given tangential projection components.

        tangential: (N, n-1) with |b| < 1; the normal component is
        sqrt(1 - |b|^2), inward or outward.
        """
        b = np.atleast_2d(np.asarray(tangential, dtype=float))
        nu, tg = self.frames(points)
        bn2 = np.sum(b**2, axis=-1)
        if np.any(bn2 > 1.0):
            raise PreconditionError("tangential projection must lie in the unit ball")
        normal_comp = np.sqrt(np.maximum(1.0 - bn2, 0.0))
        sgn = 1.0 if inward else -1.0
        return (np.einsum("na,nai->ni", b, tg)
                + sgn * normal_comp[:, None] * nu)

    def tangential_of_velocity(self, points, velocity):
        """Tangential components of a (unit) velocity at boundary points."""
        p = np.atleast_2d(points)
        v = np.atleast_2d(velocity)
        g = self.metric.metric_matrix(p)
        _, tg = self.frames(p)
        return np.einsum("nij,nai,nj->na", g, tg, v)

    def launch_covectors(self, params, tangential):
        """Phase points for entries (params, tangential projections)."""
        pts = self.point(params)
        dirs = self.direction_from_tangential(pts, tangential, inward=True)
        xi = self.metric.unit_covector(pts, dirs)
        return pts, xi
