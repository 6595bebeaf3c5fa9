"""Strict convexity of boundaries and level sets; Herglotz-type checks.

The operative quantity is the second time derivative of a defining
function along unit-speed geodesics tangent to its zero level: strictly
convex (seen from the positive side) means that derivative is negative
with a margin.  For a radial sound speed this is equivalent to positivity
of d/dr (r / c(r)), and both checks are implemented so each can audit the
other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PreconditionError
from .domain import BallDomain, DomainSpec, FoliationSpec, RadialSpeed
from .metric import MetricField


@dataclass
class ConvexityReport:
    """Second fundamental form data at one boundary point."""

    point: np.ndarray
    form: np.ndarray            # d^2 rho/dt^2 on the unit tangent covector frame
    eigenvalues: np.ndarray
    strictly_convex: bool
    margin: float               # -max eigenvalue; positive when strictly convex
    frame: np.ndarray           # tangent frame vectors, rows

    @property
    def second_fundamental_form(self) -> np.ndarray:
        # sign convention: positive definite II <=> strictly convex boundary
        return -self.form


def _domain_hessian(domain: DomainSpec, p: np.ndarray) -> np.ndarray:
    h = 1e-5
    n = len(p)
    H = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            da = np.zeros(n)
            db = np.zeros(n)
            da[a] = h
            db[b] = h
            if a == b:
                H[a, a] = float(domain.rho(np.vstack([p + da, p, p - da])) @ [1.0, -2.0, 1.0]) / h**2
            else:
                vals = domain.rho(np.vstack([p + da + db, p + da - db, p - da + db, p - da - db]))
                H[a, b] = float(vals @ [1.0, -1.0, -1.0, 1.0]) / (4 * h**2)
                H[b, a] = H[a, b]
    return H


def _ball_hessian(domain: BallDomain, p: np.ndarray) -> np.ndarray:
    d = p - domain.center
    r = np.linalg.norm(d)
    dhat = d / r
    return -(np.eye(len(p)) - np.outer(dhat, dhat)) / r


def _rho_second_derivative(metric: MetricField, domain: DomainSpec,
                           p: np.ndarray, xi: np.ndarray) -> float:
    """d^2/dt^2 rho(x(t)) at t=0 along the Hamiltonian flow from (p, xi)."""
    x = p[None]
    xd, xid, J = metric.hamilton_rhs_jacobian(x, xi[None])
    n = metric.ndim
    xdd = J[0, :n, :n] @ xd[0] + J[0, :n, n:] @ xid[0]
    grad = domain.grad_rho(x)[0]
    hess = (_ball_hessian(domain, p) if isinstance(domain, BallDomain)
            else _domain_hessian(domain, p))
    return float(xd[0] @ hess @ xd[0] + grad @ xdd)


def second_fundamental_form(metric: MetricField, domain: DomainSpec,
                            p) -> ConvexityReport:
    """Evaluate the boundary form at p and decide strict convexity.

    The form is d^2 rho/dt^2 along unit-speed geodesics with launch
    covectors in a g-orthonormal frame of the boundary tangent space;
    strictly convex means negative definite (margin reported).  On the
    flat unit disk the form is -1 times the identity.
    """
    p = np.asarray(p, dtype=float)
    grad = domain.grad_rho(p[None])[0]
    if np.linalg.norm(grad) <= 1e-12:
        raise PreconditionError(f"grad rho vanishes at {p}")

    n = metric.ndim
    G = metric.cometric_matrix(p[None])[0]   # g^{ij}
    gmat = metric.metric_matrix(p[None])[0]
    normal_vec = G @ grad
    normal_vec = normal_vec / np.sqrt(normal_vec @ gmat @ normal_vec)

    frame = []
    for k in range(n):
        v = np.zeros(n)
        v[k] = 1.0
        v = v - (v @ gmat @ normal_vec) * normal_vec
        for u in frame:
            v = v - (v @ gmat @ u) * u
        norm = np.sqrt(v @ gmat @ v)
        if norm > 1e-8:
            frame.append(v / norm)
    if len(frame) != n - 1:
        raise PreconditionError("failed to build a boundary tangent frame")
    frame = np.asarray(frame)

    betas = frame @ gmat  # covectors dual to the unit tangent vectors
    m = n - 1
    Q = np.empty((m, m))
    for a in range(m):
        Q[a, a] = _rho_second_derivative(metric, domain, p, betas[a])
    for a in range(m):
        for b in range(a + 1, m):
            qp = _rho_second_derivative(metric, domain, p, betas[a] + betas[b])
            qm = _rho_second_derivative(metric, domain, p, betas[a] - betas[b])
            Q[a, b] = 0.25 * (qp - qm)
            Q[b, a] = Q[a, b]
    eig = np.linalg.eigvalsh(Q)
    margin = float(-eig[-1])
    return ConvexityReport(point=p, form=Q, eigenvalues=eig,
                           strictly_convex=bool(eig[-1] < 0), margin=margin,
                           frame=frame)


@dataclass
class HerglotzReport:
    r: np.ndarray
    margin: np.ndarray            # d/dr (r / c)
    satisfied: bool
    flagged: np.ndarray = None    # rows too close to zero to call
    cross_check_radii: np.ndarray = None
    cross_check_agrees: bool = None


def check_herglotz(speed: RadialSpeed, n_scan: int = 400,
                   cross_check: bool = True, grid_shape: int = 121) -> HerglotzReport:
    """Scan d/dr (r / c(r)) over (0, R] and verdict its positivity.

    When cross_check is set, the equivalent statement -- Euclidean spheres
    are strictly convex in the metric c^-2 dx^2 -- is evaluated directly
    with second_fundamental_form on a few sampled spheres, and agreement
    of the two verdicts is reported.
    """
    R = speed.R
    r = np.linspace(R / n_scan, R, n_scan)
    c = speed.value(r)
    dc = speed.derivative(r)
    m = (c - r * dc) / c**2
    # derivative-noise floor for sampled profiles: flag margins inside it
    if speed.fn is None:
        dr = R / max(len(speed.samples) - 1, 1)
        floor = 10.0 * dr**2 * np.max(np.abs(c)) / max(R, 1e-12)
    else:
        floor = 1e-10
    flagged = np.abs(m) < floor
    satisfied = bool(np.all(m > 0))

    report = HerglotzReport(r=r, margin=m, satisfied=satisfied, flagged=flagged)

    if cross_check:
        box = 1.15 * R
        metric = MetricField.from_speed(speed.speed_fn_nd(), [-box, -box],
                                        [box, box], (grid_shape, grid_shape),
                                        keep_analytic=False)
        radii = np.linspace(0.2 * R, R, 8)
        agree = True
        for rr in radii:
            rep = second_fundamental_form(metric, BallDomain(rr), [rr, 0.0])
            mm = float(np.interp(rr, r, m))
            if abs(mm) >= floor and rep.strictly_convex != (mm > 0):
                agree = False
        report.cross_check_radii = radii
        report.cross_check_agrees = agree
    return report


@dataclass
class FoliationLevelReport:
    level: float
    n_samples: int
    min_margin: float
    grad_ok: bool
    convex: bool
    skipped: bool = False


@dataclass
class FoliationReport:
    levels: list
    passed: bool
    first_failure: float | None


def _sample_level_set(fol: FoliationSpec, level: float, center: np.ndarray,
                      s_max: float, n_dirs: int, ndim: int) -> np.ndarray:
    """Star-shaped sampling of {rho_fol = level} from `center`."""
    if ndim == 2:
        ang = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        ang = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        pol = np.linspace(0.3, np.pi - 0.3, max(n_dirs // 4, 3))
        A, P = np.meshgrid(ang, pol, indexing="ij")
        dirs = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A),
                         np.cos(P)], axis=-1).reshape(-1, 3)
    pts = []
    for d in dirs:
        lo, hi = 0.0, s_max
        f_lo = float(fol.value((center + lo * d)[None])[0]) - level
        f_hi = float(fol.value((center + hi * d)[None])[0]) - level
        if f_lo * f_hi > 0:
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            f_mid = float(fol.value((center + mid * d)[None])[0]) - level
            if np.sign(f_mid) == np.sign(f_lo):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        pts.append(center + 0.5 * (lo + hi) * d)
    return np.asarray(pts)


def check_foliation(metric: MetricField, fol: FoliationSpec, domain: DomainSpec,
                    n_dirs: int = 24, center=None) -> FoliationReport:
    """Verify strict convexity of each sampled foliation level surface.

    Each level set Sigma_t is sampled star-shaped from the domain center,
    d rho_fol is required nonzero there, and convexity is checked viewed
    from the outer region (smaller foliation values) via
    second_fundamental_form on the sub-level defining function.
    """
    ctr = np.asarray(center if center is not None else domain.center, dtype=float)
    s_max = float(np.min(np.asarray(metric.grid.upper) - ctr)) * 0.98
    reports = []
    first_fail = None
    for level in fol.levels():
        pts = _sample_level_set(fol, float(level), ctr, s_max, n_dirs, metric.ndim)
        if len(pts) == 0:
            reports.append(FoliationLevelReport(float(level), 0, np.nan, True, True,
                                                skipped=True))
            continue
        grads = fol.gradient(pts)
        grad_ok = bool(np.all(np.linalg.norm(grads, axis=-1) > 1e-10))
        sub = DomainSpec(lambda p, lv=float(level): fol.value(p) - lv,
                         lambda p: fol.gradient(p), name=f"level {level:.4g}")
        margins = []
        convex = True
        for p in pts:
            rep = second_fundamental_form(metric, sub, p)
            margins.append(rep.margin)
            convex = convex and rep.strictly_convex
        ok = grad_ok and convex
        reports.append(FoliationLevelReport(float(level), len(pts),
                                            float(np.min(margins)), grad_ok, convex))
        if not ok and first_fail is None:
            first_fail = float(level)
    return FoliationReport(levels=reports, passed=first_fail is None,
                           first_failure=first_fail)
