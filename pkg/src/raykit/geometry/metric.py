"""Riemannian metrics on gridded domains.

Two kinds are supported, mirroring the physical setups the toolkit handles:

* conformal -- sound speed c(x) > 0 against the Euclidean background, the
  metric being c^(-2) dx^2.  This is the travel-time model: rays are unit
  speed in the metric, arclength equals flow time.
* general -- a full SPD matrix field g_ij(x), used e.g. for pullbacks of
  conformal metrics under gauge diffeomorphisms.

All evaluators are batched: points come in as (N, n) arrays.  A conformal
metric may carry closed-form speed/gradient/hessian callables next to its
grid samples; when present they are used instead of the spline (exactness
for convergence-order studies), the grid remaining the canonical storage.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .grids import Grid, ScalarField, _extend_quadratic


def _sym_index_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


class MetricField:
    """Speed or matrix-valued metric sampled on a rectangular grid."""

    def __init__(self, grid: Grid, *, speed=None, matrix=None,
                 analytic_speed=None, analytic_grad=None, analytic_hess=None):
        self.grid = grid
        self.ndim = grid.ndim
        if (speed is None) == (matrix is None):
            raise ValueError("provide exactly one of speed samples or matrix samples")
        if speed is not None:
            self.kind = "conformal"
            speed = np.asarray(speed, dtype=float)
            if np.any(_extend_quadratic(speed) <= 0):
                raise ValueError("speed must stay positive on the extended grid")
            self._c = ScalarField(grid, speed)
            self._c2 = ScalarField(grid, speed**2)
            self._g = None
            self.condition_number = 1.0
        else:
            self.kind = "general"
            matrix = np.asarray(matrix, dtype=float)
            n = grid.ndim
            pairs = _sym_index_pairs(n)
            if matrix.shape != (len(pairs),) + grid.shape:
                raise ValueError(f"matrix samples must have shape {(len(pairs),) + grid.shape}")
            self._pairs = pairs
            self._g = [ScalarField(grid, comp) for comp in matrix]
            self._c = None
            self.condition_number = self._spd_check(matrix)
        self.analytic_speed = analytic_speed
        self.analytic_grad = analytic_grad
        self.analytic_hess = analytic_hess
        if analytic_speed is not None and self.kind != "conformal":
            raise ValueError("analytic speed only applies to conformal metrics")

    def _spd_check(self, matrix: np.ndarray) -> float:
        n = self.ndim
        full = np.zeros(self.grid.shape + (n, n))
        for (i, j), comp in zip(self._pairs, matrix):
            full[..., i, j] = comp
            full[..., j, i] = comp
        eig = np.linalg.eigvalsh(full.reshape(-1, n, n))
        if np.any(eig[:, 0] <= 0):
            raise ValueError("metric samples are not positive definite everywhere")
        return float((eig[:, -1] / eig[:, 0]).max())

    # -- builders ---------------------------------------------------------

    @staticmethod
    def from_speed(fn, lo, hi, shape, grad=None, hess=None,
                   keep_analytic=True) -> "MetricField":
        """Sample a speed callable on a fresh grid."""
        grid = Grid.from_bbox(lo, hi, shape)
        c = fn(grid.nodes()).reshape(grid.shape)
        return MetricField(grid, speed=c,
                           analytic_speed=fn if keep_analytic else None,
                           analytic_grad=grad if keep_analytic else None,
                           analytic_hess=hess if keep_analytic else None)

    @staticmethod
    def from_matrix_fn(fn, lo, hi, shape) -> "MetricField":
        """Sample a matrix callable g(points)->(N,n,n) on a fresh grid."""
        grid = Grid.from_bbox(lo, hi, shape)
        G = fn(grid.nodes())
        n = grid.ndim
        comps = np.stack([G[:, i, j].reshape(grid.shape)
                          for i, j in _sym_index_pairs(n)])
        return MetricField(grid, matrix=comps)

    # -- identification ---------------------------------------------------

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.kind, self.grid.origin, self.grid.spacing, self.grid.shape)).encode())
        if self.kind == "conformal":
            h.update(self._c.samples.tobytes())
        else:
            for comp in self._g:
                h.update(comp.samples.tobytes())
        return h.hexdigest()[:16]

    @property
    def speed_samples(self) -> np.ndarray:
        if self.kind != "conformal":
            raise ValueError("speed samples only exist for conformal metrics")
        return self._c.samples

    @property
    def matrix_samples(self) -> np.ndarray:
        if self.kind != "general":
            raise ValueError("matrix samples only exist for general metrics")
        return np.stack([f.samples for f in self._g])

    # -- conformal evaluators --------------------------------------------

    def speed(self, points) -> np.ndarray:
        if self.kind != "conformal":
            raise ValueError("speed() requires a conformal metric")
        if self.analytic_speed is not None:
            return self.analytic_speed(np.atleast_2d(points))
        return self._c.value(points)

    def _speed_grad(self, points):
        if self.analytic_speed is not None:
            p = np.atleast_2d(points)
            c = self.analytic_speed(p)
            dc = (self.analytic_grad(p) if self.analytic_grad is not None
                  else _fd_gradient(self.analytic_speed, p))
            return c, dc
        return self._c.value_gradient(points)

    def _speed_grad_hess(self, points):
        if self.analytic_speed is not None:
            p = np.atleast_2d(points)
            c = self.analytic_speed(p)
            dc = (self.analytic_grad(p) if self.analytic_grad is not None
                  else _fd_gradient(self.analytic_speed, p))
            d2c = (self.analytic_hess(p) if self.analytic_hess is not None
                   else _fd_hessian(self.analytic_speed, p))
            return c, dc, d2c
        return self._c.value_gradient_hessian(points)

    # -- matrix evaluators -------------------------------------------------

    def metric_matrix(self, points) -> np.ndarray:
        """g_ij, shape (N, n, n)."""
        p = np.atleast_2d(points)
        n = self.ndim
        if self.kind == "conformal":
            c = self.speed(p)
            out = np.zeros((len(p), n, n))
            idx = np.arange(n)
            out[:, idx, idx] = (1.0 / c**2)[:, None]
            return out
        out = np.empty((len(p), n, n))
        for (i, j), f in zip(self._pairs, self._g):
            v = f.value(p)
            out[:, i, j] = v
            out[:, j, i] = v
        return out

    def cometric_matrix(self, points) -> np.ndarray:
        """g^ij, shape (N, n, n)."""
        if self.kind == "conformal":
            p = np.atleast_2d(points)
            n = self.ndim
            c = self.speed(p)
            out = np.zeros((len(p), n, n))
            idx = np.arange(n)
            out[:, idx, idx] = (c**2)[:, None]
            return out
        return np.linalg.inv(self.metric_matrix(points))

    def _matrix_derivs(self, points, order=1):
        """g, dg (N,n,n,n last axis = derivative), optionally d2g."""
        p = np.atleast_2d(points)
        n = self.ndim
        g = np.empty((len(p), n, n))
        dg = np.empty((len(p), n, n, n))
        d2g = np.empty((len(p), n, n, n, n)) if order >= 2 else None
        for (i, j), f in zip(self._pairs, self._g):
            if order >= 2:
                v, gr, he = f.value_gradient_hessian(p)
                d2g[:, i, j] = he
                d2g[:, j, i] = he
            else:
                v, gr = f.value_gradient(p)
            g[:, i, j] = v
            g[:, j, i] = v
            dg[:, i, j] = gr
            dg[:, j, i] = gr
        return (g, dg) if order < 2 else (g, dg, d2g)

    # -- Hamiltonian machinery ---------------------------------------------

    def hamiltonian(self, points, xi) -> np.ndarray:
        """H(x, xi) = (1/2) g^ij xi_i xi_j; unit-speed rays satisfy 2H = 1."""
        p = np.atleast_2d(points)
        xi = np.atleast_2d(xi)
        if self.kind == "conformal":
            c = self.speed(p)
            return 0.5 * c**2 * np.sum(xi**2, axis=-1)
        G = self.cometric_matrix(p)
        return 0.5 * np.einsum("nij,ni,nj->n", G, xi, xi)

    def hamilton_rhs(self, points, xi):
        """(dx/dt, dxi/dt) of the Hamiltonian flow, batched."""
        p = np.atleast_2d(points)
        xi = np.atleast_2d(xi)
        if self.kind == "conformal":
            c, dc = self._speed_grad(p)
            xdot = (c**2)[:, None] * xi
            xidot = -(c * np.sum(xi**2, axis=-1))[:, None] * dc
            return xdot, xidot
        g, dg = self._matrix_derivs(p, order=1)
        G = np.linalg.inv(g)
        xdot = np.einsum("nij,nj->ni", G, xi)
        # dG/dx_k = -G dg/dx_k G
        dG = -np.einsum("nia,nabk,nbj->nijk", G, dg, G)
        xidot = -0.5 * np.einsum("nijk,ni,nj->nk", dG, xi, xi)
        return xdot, xidot

    def hamilton_rhs_jacobian(self, points, xi):
        """RHS and its phase-space Jacobian, for variational (Jacobi) flows.

        Returns (xdot, xidot, J) with J of shape (N, 2n, 2n) ordered as
        d(xdot, xidot)/d(x, xi).
        """
        p = np.atleast_2d(points)
        xi = np.atleast_2d(xi)
        n = self.ndim
        N = len(p)
        J = np.zeros((N, 2 * n, 2 * n))
        if self.kind == "conformal":
            c, dc, d2c = self._speed_grad_hess(p)
            xi2 = np.sum(xi**2, axis=-1)
            xdot = (c**2)[:, None] * xi
            xidot = -(c * xi2)[:, None] * dc
            # d xdot / dx = 2 c dc_j xi_i ; d xdot / dxi = c^2 I
            J[:, :n, :n] = 2.0 * c[:, None, None] * xi[:, :, None] * dc[:, None, :]
            J[:, :n, n:] = (c**2)[:, None, None] * np.eye(n)
            # d xidot / dx = -xi2 (dc x dc + c Hess c) ; d xidot / dxi = -2 c xi_j dc_i
            J[:, n:, :n] = -xi2[:, None, None] * (
                dc[:, :, None] * dc[:, None, :] + c[:, None, None] * d2c)
            J[:, n:, n:] = -2.0 * c[:, None, None] * dc[:, :, None] * xi[:, None, :]
            return xdot, xidot, J
        g, dg, d2g = self._matrix_derivs(p, order=2)
        G = np.linalg.inv(g)
        dG = -np.einsum("nia,nabk,nbj->nijk", G, dg, G)
        # d/dx_l of (-G dg_k G) = -dG_l dg_k G - G d2g_kl G - G dg_k dG_l
        d2G = (-np.einsum("nial,nabk,nbj->nijkl", dG, dg, G)
               - np.einsum("nia,nabkl,nbj->nijkl", G, d2g, G)
               - np.einsum("nia,nabk,nbjl->nijkl", G, dg, dG))
        xdot = np.einsum("nij,nj->ni", G, xi)
        xidot = -0.5 * np.einsum("nijk,ni,nj->nk", dG, xi, xi)
        J[:, :n, :n] = np.einsum("nijk,nj->nik", dG, xi)
        J[:, :n, n:] = G
        J[:, n:, :n] = -0.5 * np.einsum("nijkl,ni,nj->nkl", d2G, xi, xi)
        J[:, n:, n:] = -np.einsum("nijk,nj->nki", dG, xi)
        return xdot, xidot, J

    # -- geometry helpers ---------------------------------------------------

    def unit_covector(self, points, direction) -> np.ndarray:
        """Covector xi at x pointing along `direction` with 2H(x, xi) = 1."""
        p = np.atleast_2d(points)
        e = np.atleast_2d(direction).astype(float)
        norm = np.linalg.norm(e, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise ValueError("zero direction")
        e = e / norm
        if self.kind == "conformal":
            c = self.speed(p)
            return e / c[:, None]
        g = self.metric_matrix(p)
        v = e / np.sqrt(np.einsum("nij,ni,nj->n", g, e, e))[:, None]
        return np.einsum("nij,nj->ni", g, v)

    def velocity(self, points, xi) -> np.ndarray:
        """dx/dt = g^{-1} xi."""
        return self.hamilton_rhs(points, xi)[0]

    def christoffel(self, points) -> np.ndarray:
        """Gamma^k_ij, shape (N, n, n, n) indexed [k, i, j]."""
        p = np.atleast_2d(points)
        n = self.ndim
        if self.kind == "conformal":
            c, dc = self._speed_grad(p)
            phi = dc / c[:, None]  # grad log c
            eye = np.eye(n)
            out = -(phi[:, None, :, None] * eye[None, :, None, :]
                    + phi[:, None, None, :] * eye[None, :, :, None]
                    - phi[:, :, None, None] * eye[None, None, :, :])
            return out
        g, dg = self._matrix_derivs(p, order=1)
        G = np.linalg.inv(g)
        # Gamma^k_ij = 1/2 G^kl (dg_lj/dx_i + dg_il/dx_j - dg_ij/dx_l)
        return 0.5 * (np.einsum("nkl,nlji->nkij", G, dg)
                      + np.einsum("nkl,nilj->nkij", G, dg)
                      - np.einsum("nkl,nijl->nkij", G, dg))

    def sqrt_det(self, points) -> np.ndarray:
        """Riemannian volume weight (det g)^(1/2)."""
        p = np.atleast_2d(points)
        if self.kind == "conformal":
            return self.speed(p) ** (-self.ndim)
        return np.sqrt(np.linalg.det(self.metric_matrix(p)))


def _fd_gradient(fn, points, h=1e-5):
    p = np.atleast_2d(points)
    n = p.shape[1]
    out = np.empty_like(p)
    for k in range(n):
        dp = np.zeros(n)
        dp[k] = h
        out[:, k] = (8 * (fn(p + dp) - fn(p - dp)) - (fn(p + 2 * dp) - fn(p - 2 * dp))) / (12 * h)
    return out


def _fd_hessian(fn, points, h=1e-4):
    p = np.atleast_2d(points)
    n = p.shape[1]
    out = np.empty((len(p), n, n))
    for a in range(n):
        for b in range(a, n):
            da = np.zeros(n)
            db = np.zeros(n)
            da[a] = h
            db[b] = h
            if a == b:
                out[:, a, a] = (fn(p + da) - 2 * fn(p) + fn(p - da)) / h**2
            else:
                out[:, a, b] = (fn(p + da + db) - fn(p + da - db)
                                - fn(p - da + db) + fn(p - da - db)) / (4 * h**2)
                out[:, b, a] = out[:, a, b]
    return out
