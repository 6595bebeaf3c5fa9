"""Boundary-fixing diffeomorphisms and metric pullbacks.

The pullback (psi* g)_ij = Dpsi^T g(psi(x)) Dpsi sampled on the grid turns
a conformal metric into a general one whose lens data and boundary
distances must coincide with the original's: the gauge obstruction of the
rigidity problems, realized as a testable invariance.
"""

from __future__ import annotations

import numpy as np

from ..errors import PreconditionError
from ..geometry.domain import DomainSpec
from ..geometry.metric import MetricField, _sym_index_pairs


class GaugeDiffeo:
    """Smooth map psi fixing the boundary pointwise, with its Jacobian."""

    def __init__(self, psi, jacobian, *, support_center=None, support_radius=None,
                 name="custom"):
        self._psi = psi
        self._jac = jacobian
        self.support_center = support_center
        self.support_radius = support_radius
        self.name = name

    def __call__(self, points) -> np.ndarray:
        return self._psi(np.atleast_2d(points))

    def jacobian(self, points) -> np.ndarray:
        return self._jac(np.atleast_2d(points))

    def check_fixes_boundary(self, domain: DomainSpec, n_samples: int = 256,
                             collar: float = 0.02):
        """Verify psi = Id on the boundary collar (raises otherwise)."""
        ang = np.linspace(0, 2 * np.pi, n_samples, endpoint=False)
        shifts = np.linspace(0.0, collar, 4)
        ctr = domain.center
        ndim = len(ctr)
        if ndim != 2:
            raise NotImplementedError("collar check implemented for 2-D domains")
        for s in shifts:
            # points near the boundary, pulled inward by s along the radius
            bd = []
            for a in ang:
                d = np.array([np.cos(a), np.sin(a)])
                lo, hi = 0.0, 10.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if domain.rho((ctr + mid * d)[None])[0] > 0:
                        lo = mid
                    else:
                        hi = mid
                bd.append(ctr + (lo - s) * d)
            bd = np.asarray(bd)
            disp = np.linalg.norm(self(bd) - bd, axis=-1).max()
            if disp > 1e-12:
                raise PreconditionError(
                    f"diffeo moves the boundary collar by {disp:.3g}")


def radial_bump_diffeo(center, radius: float, amplitude: float) -> GaugeDiffeo:
    """psi(x) = x + A phi(|x - x0|/r0)(x - x0) with phi = (1 - s^2)^4.

    Compactly supported in the ball |x - x0| < r0, C^3 across its edge;
    the amplitude is validated to keep the Jacobian determinant positive.
    """
    x0 = np.asarray(center, dtype=float)
    r0 = float(radius)
    A = float(amplitude)
    # |d(psi - id)| <= A max(phi + s|phi'|) = A at s = 0 plus interior max
    s_scan = np.linspace(0, 1, 512)
    phi_s = (1 - s_scan**2) ** 4
    dphi_s = -8 * s_scan * (1 - s_scan**2) ** 3
    lip = float(np.max(phi_s + np.abs(dphi_s) * s_scan))
    if abs(A) * lip >= 1.0:
        raise PreconditionError("bump amplitude too large: Jacobian may degenerate")

    def psi(p):
        p = np.atleast_2d(p)
        d = p - x0
        s = np.linalg.norm(d, axis=-1) / r0
        phi = np.where(s < 1.0, (1 - np.minimum(s, 1.0) ** 2) ** 4, 0.0)
        return p + A * phi[:, None] * d

    def jac(p):
        p = np.atleast_2d(p)
        n = p.shape[1]
        d = p - x0
        r = np.linalg.norm(d, axis=-1)
        s = r / r0
        inside = s < 1.0
        phi = np.where(inside, (1 - np.minimum(s, 1.0) ** 2) ** 4, 0.0)
        dphi = np.where(inside, -8 * s * (1 - np.minimum(s, 1.0) ** 2) ** 3, 0.0)
        J = np.broadcast_to(np.eye(n), (len(p), n, n)).copy()
        J *= (1.0 + A * phi)[:, None, None]
        rs = np.where(r == 0, 1.0, r)
        coef = A * dphi / (r0 * rs)
        J += coef[:, None, None] * d[:, :, None] * d[:, None, :]
        return J

    return GaugeDiffeo(psi, jac, support_center=x0, support_radius=r0,
                       name=f"radial_bump(A={A}, r0={r0})")


def pullback_metric(metric: MetricField, psi: GaugeDiffeo) -> MetricField:
    """Sample (psi* g)_ij on the metric's grid; returns a general metric."""
    grid = metric.grid
    X = grid.nodes()
    J = psi.jacobian(X)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        where = X[np.argmin(det)]
        raise PreconditionError(f"Jacobian determinant nonpositive near {where}")
    g_at = metric.metric_matrix(psi(X))
    gt = np.einsum("nki,nkl,nlj->nij", J, g_at, J)
    comps = np.stack([gt[:, i, j].reshape(grid.shape)
                      for i, j in _sym_index_pairs(grid.ndim)])
    return MetricField(grid, matrix=comps)
