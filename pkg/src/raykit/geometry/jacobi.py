"""Conjugate-point detection via the variational (Jacobi) flow.

The flow derivative with respect to the initial covector is integrated
along a traced geodesic; a conjugate time is a zero of the determinant of
its position block.  Detection is a sign change between integrator samples
refined by bisection.
"""

from __future__ import annotations

import numpy as np

from ..errors import ChartIncompleteError, PreconditionError
from .domain import DomainSpec
from .flow import GeodesicPath, variational_rk4_step
from .metric import MetricField

REFINE_TOL = 1e-8


def jacobi_conjugate_scan(metric: MetricField, path: GeodesicPath,
                          domain: DomainSpec | None = None) -> float | None:
    """First conjugate time along `path`, or None.

    Integrates d(flow)/d(xi_0) along the same trajectory with the same
    step, scans det of the dX/dxi_0 block for a sign change, and refines
    the zero by bisection to 1e-8 in t.  The determinant vanishes at t=0
    by construction, so the scan starts once it has left zero.
    """
    if path.status == "left_chart":
        raise ChartIncompleteError("path left the chart; Jacobi scan undefined")
    if path.n_samples < 2:
        raise PreconditionError("path must have at least 2 samples")

    n = metric.ndim
    Z = np.concatenate([path.x[0], path.xi[0]])[None]
    M = np.zeros((1, 2 * n, n))
    M[0, n:, :] = np.eye(n)

    dets = [0.0]
    Zs = [Z.copy()]
    Ms = [M.copy()]
    for k in range(1, path.n_samples):
        h = path.t[k] - path.t[k - 1]
        Z, M = variational_rk4_step(metric, Z, M, h)
        dets.append(float(np.linalg.det(M[0, :n, :])))
        Zs.append(Z.copy())
        Ms.append(M.copy())
    dets = np.asarray(dets)

    # skip the launch transient where det ~ t^n is still tiny
    scale = np.abs(dets).max()
    if scale == 0.0:
        return None
    active = np.abs(dets) > 1e-9 * scale
    first_live = int(np.argmax(active))
    sign_ref = np.sign(dets[first_live]) if active.any() else 1.0

    for k in range(first_live, path.n_samples - 1):
        if np.sign(dets[k + 1]) not in (sign_ref, 0.0) or dets[k + 1] == 0.0:
            lo_t, hi_t = path.t[k], path.t[k + 1]
            Zk, Mk = Zs[k], Ms[k]

            def det_at(s):
                _, Mref = variational_rk4_step(metric, Zk, Mk, s)
                return float(np.linalg.det(Mref[0, :n, :]))

            lo_s, hi_s = 0.0, hi_t - lo_t
            f_lo = dets[k]
            while hi_s - lo_s > REFINE_TOL:
                mid = 0.5 * (lo_s + hi_s)
                f_mid = det_at(mid)
                if np.sign(f_mid) == np.sign(f_lo):
                    lo_s, f_lo = mid, f_mid
                else:
                    hi_s = mid
            return float(lo_t + 0.5 * (lo_s + hi_s))
    return None
