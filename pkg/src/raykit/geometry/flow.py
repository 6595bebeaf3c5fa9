"""Hamiltonian geodesic flow with boundary-event detection.

The integrator is classical fixed-step RK4 on the cotangent bundle; the
first crossing of the boundary defining function rho is localized by
bisection of a one-step dense re-evaluation, so exit times and exit phase
points carry the full integrator accuracy.  Everything is batched over a
leading ray axis; a single-ray wrapper returns a fully sampled
GeodesicPath.

Status values: "exited", "trapped_capped" (ran to t_max, the numerical
stand-in for infinite travel time), "left_chart" (escaped the gridded
chart), "diverged".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrationDivergedError, PreconditionError
from .domain import DomainSpec
from .metric import MetricField

STATUS_RUNNING = 0
STATUS_EXITED = 1
STATUS_TRAPPED = 2
STATUS_LEFT_CHART = 3
STATUS_DIVERGED = 4
STATUS_NAMES = {
    STATUS_RUNNING: "running",
    STATUS_EXITED: "exited",
    STATUS_TRAPPED: "trapped_capped",
    STATUS_LEFT_CHART: "left_chart",
    STATUS_DIVERGED: "diverged",
}

NORMALIZATION_TOL = 1e-10


@dataclass
class PhasePoint:
    """Position + covector, normalized to 2H = 1 at construction."""

    x: np.ndarray
    xi: np.ndarray

    @staticmethod
    def launch(metric: MetricField, x, direction) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        xi = metric.unit_covector(x[None], np.asarray(direction, dtype=float)[None])[0]
        return PhasePoint(x, xi)

    def check_normalized(self, metric: MetricField):
        h2 = 2.0 * metric.hamiltonian(self.x[None], self.xi[None])[0]
        if abs(h2 - 1.0) > NORMALIZATION_TOL:
            raise PreconditionError(f"phase point not unit-normalized: 2H = {h2!r}")


@dataclass
class GeodesicPath:
    """Sampled bicharacteristic (t_k, x_k, xi_k) with exit metadata."""

    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    status: str
    step: float
    tau: float | None = None
    energy_drift: float = 0.0

    @property
    def exit_x(self) -> np.ndarray:
        return self.x[-1]

    @property
    def exit_xi(self) -> np.ndarray:
        return self.xi[-1]

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def velocities(self, metric: MetricField) -> np.ndarray:
        return metric.velocity(self.x, self.xi)


@dataclass
class BatchTrace:
    """Result of tracing many rays together."""

    status: np.ndarray            # (N,) int codes
    tau: np.ndarray               # (N,) exit times (nan unless exited)
    final_z: np.ndarray           # (N, 2n) state at termination
    t_end: np.ndarray             # (N,) termination time
    frame_t: np.ndarray | None = None      # (K,)
    frame_z: np.ndarray | None = None      # (K, N, 2n)
    frame_alive: np.ndarray | None = None  # (K, N) frame strictly before exit

    def status_name(self, i: int) -> str:
        return STATUS_NAMES[int(self.status[i])]

    def exited(self) -> np.ndarray:
        return self.status == STATUS_EXITED


def _rhs(metric: MetricField, Z: np.ndarray) -> np.ndarray:
    n = metric.ndim
    xd, xid = metric.hamilton_rhs(Z[:, :n], Z[:, n:])
    return np.concatenate([xd, xid], axis=1)


def _rk4_step(metric: MetricField, Z: np.ndarray, h) -> np.ndarray:
    """One RK4 step; h may be scalar or per-ray (N,)."""
    h = np.asarray(h)
    if h.ndim == 1:
        h = h[:, None]
    k1 = _rhs(metric, Z)
    k2 = _rhs(metric, Z + 0.5 * h * k1)
    k3 = _rhs(metric, Z + 0.5 * h * k2)
    k4 = _rhs(metric, Z + h * k3)
    return Z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _refine_crossing(metric, domain, Z_pre, h, iters=52):
    """Bisection for the rho = 0 crossing inside one step of size h.

    Z_pre are pre-step states known to cross within (0, h].  Returns
    (s, Z_exit).  Handles launches sitting exactly on the boundary by
    first locating a positive-rho bracket inside the step.
    """
    n = metric.ndim
    N = len(Z_pre)
    lo = np.zeros(N)
    hi = np.full(N, float(h))
    rho_lo = domain.rho(Z_pre[:, :n])
    # degenerate bracket (launch on the boundary): find an interior sample
    degen = rho_lo <= 1e-14
    if np.any(degen):
        s_grid = np.linspace(0.0, h, 9)[1:-1]
        best = np.zeros(degen.sum())
        Zd = Z_pre[degen]
        for s in s_grid:
            r = domain.rho(_rk4_step(metric, Zd, s)[:, :n])
            best = np.where(r > 0, s, best)
        lo[degen] = best
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        Zm = _rk4_step(metric, Z_pre, mid)
        r = domain.rho(Zm[:, :n])
        inside = r > 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    s = 0.5 * (lo + hi)
    return s, _rk4_step(metric, Z_pre, s)


def trace_batch(metric: MetricField, domain: DomainSpec, x0, xi0, *,
                step: float, t_max: float, record_stride: int = 0) -> BatchTrace:
    """Integrate a batch of rays until boundary exit, t_max, or chart loss.

    With record_stride = s > 0, phase states are snapshotted every s steps
    (including t = 0); frame_alive marks frames strictly before the ray's
    termination, so recorded nodes plus the exact exit state form each
    ray's quadrature skeleton.
    """
    if step <= 0:
        raise PreconditionError("step must be positive")
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
    N, n = x0.shape
    Z = np.concatenate([x0, xi0], axis=1).copy()
    status = np.full(N, STATUS_RUNNING, dtype=np.int8)
    tau = np.full(N, np.nan)
    t_end = np.full(N, np.nan)
    final_z = Z.copy()

    frames = []
    frame_alive = []
    frame_t = []

    n_steps = int(np.ceil(t_max / step - 1e-12))
    rho_prev = domain.rho(Z[:, :n])
    rho_prev = np.where(np.abs(rho_prev) < 1e-9, np.maximum(rho_prev, 0.0), rho_prev)

    t = 0.0
    for k in range(n_steps):
        alive = status == STATUS_RUNNING
        if not np.any(alive):
            break
        if record_stride and k % record_stride == 0:
            frames.append(Z.copy())
            frame_alive.append(alive.copy())
            frame_t.append(t)
        h = min(step, t_max - t)
        Za = Z[alive]
        Za_new = _rk4_step(metric, Za, h)

        bad = ~np.all(np.isfinite(Za_new), axis=1)
        rho_new = domain.rho(np.where(np.isfinite(Za_new[:, :n]), Za_new[:, :n], 0.0))
        crossed = (rho_new < 0.0) & (rho_prev[alive] >= 0.0) & ~bad
        left = ~metric.grid.contains(Za_new[:, :n]) & ~crossed & ~bad

        idx_alive = np.flatnonzero(alive)
        if np.any(crossed):
            ic = idx_alive[crossed]
            s, Zx = _refine_crossing(metric, domain, Za[crossed], h)
            status[ic] = STATUS_EXITED
            tau[ic] = t + s
            t_end[ic] = t + s
            final_z[ic] = Zx
        if np.any(bad):
            ib = idx_alive[bad]
            status[ib] = STATUS_DIVERGED
            t_end[ib] = t + h
            final_z[ib] = Za[bad]
        if np.any(left):
            il = idx_alive[left]
            status[il] = STATUS_LEFT_CHART
            t_end[il] = t + h
            final_z[il] = Za_new[left]

        Z[idx_alive] = np.where(np.isfinite(Za_new), Za_new, Za)
        rho_prev[idx_alive] = rho_new
        t += h

    still = status == STATUS_RUNNING
    if np.any(still):
        status[still] = STATUS_TRAPPED
        t_end[still] = t
        final_z[still] = Z[still]

    result = BatchTrace(status=status, tau=tau, final_z=final_z, t_end=t_end)
    if record_stride:
        result.frame_t = np.asarray(frame_t)
        result.frame_z = np.stack(frames) if frames else np.zeros((0, N, 2 * n))
        result.frame_alive = (np.stack(frame_alive) if frame_alive
                              else np.zeros((0, N), dtype=bool))
    return result


def hamiltonian_flow(metric: MetricField, z0: PhasePoint, domain: DomainSpec,
                     t_max: float, step: float) -> GeodesicPath:
    """Trace a single unit-speed geodesic, returning all samples.

    The returned path samples every integrator step and, for exited rays,
    appends the refined boundary crossing as the final sample, so
    tau == t[-1] and rho(x(tau)) vanishes to the event tolerance.
    """
    z0.check_normalized(metric)
    n = metric.ndim
    res = trace_batch(metric, domain, z0.x[None], z0.xi[None],
                      step=step, t_max=t_max, record_stride=1)
    if res.status[0] == STATUS_DIVERGED:
        raise IntegrationDivergedError(float(res.t_end[0]))

    alive = res.frame_alive[:, 0]
    ts = res.frame_t[alive]
    zs = res.frame_z[alive, 0]
    status = STATUS_NAMES[int(res.status[0])]
    tau = None
    # append the termination state (exact exit for exited rays)
    t_fin = float(res.t_end[0])
    if len(ts) == 0 or t_fin > ts[-1] + 1e-15:
        ts = np.append(ts, t_fin)
        zs = np.vstack([zs, res.final_z[0][None]])
    if status == "exited":
        tau = t_fin

    H = metric.hamiltonian(zs[:, :n], zs[:, n:])
    drift = float(np.abs(H - H[0]).max())
    return GeodesicPath(t=ts, x=zs[:, :n], xi=zs[:, n:], status=status,
                        step=step, tau=tau, energy_drift=drift)


def default_t_max(metric: MetricField, domain: DomainSpec, factor: float = 50.0) -> float:
    """Trapping cap: factor x (domain diameter) / (min speed on the grid)."""
    diam = domain.diameter
    if diam is None:
        lo = np.asarray(metric.grid.origin)
        hi = np.asarray(metric.grid.upper)
        diam = float(np.linalg.norm(hi - lo))
    if metric.kind == "conformal":
        cmin = float(metric.speed_samples.min())
    else:
        eig = np.linalg.eigvalsh(metric.metric_matrix(metric.grid.nodes()))
        cmin = float(np.sqrt(1.0 / eig[:, -1]).min())
    return factor * diam / cmin


def _variational_rhs(metric: MetricField, Z: np.ndarray, M: np.ndarray):
    n = metric.ndim
    xd, xid, J = metric.hamilton_rhs_jacobian(Z[:, :n], Z[:, n:])
    return np.concatenate([xd, xid], axis=1), J @ M


def variational_rk4_step(metric: MetricField, Z: np.ndarray, M: np.ndarray, h):
    """One RK4 step of the flow + its linearization; h scalar or (N,)."""
    h = np.asarray(h, dtype=float)
    hz = h[:, None] if h.ndim == 1 else h
    hm = h[:, None, None] if h.ndim == 1 else h
    k1z, k1m = _variational_rhs(metric, Z, M)
    k2z, k2m = _variational_rhs(metric, Z + 0.5 * hz * k1z, M + 0.5 * hm * k1m)
    k3z, k3m = _variational_rhs(metric, Z + 0.5 * hz * k2z, M + 0.5 * hm * k2m)
    k4z, k4m = _variational_rhs(metric, Z + hz * k3z, M + hm * k3m)
    Zn = Z + (hz / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
    Mn = M + (hm / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
    return Zn, Mn


def trace_variational(metric: MetricField, domain: DomainSpec, x0, xi0, M0, *,
                      step: float, t_max: float, record_stride: int = 0):
    """Jointly integrate rays and the linearized (variational) flow.

    M0 has shape (N, 2n, k); dM/dt = J(z) M with J the phase-space Jacobian
    of the Hamiltonian field.  Returns (BatchTrace, M_final, M_frames) where
    M_frames is stacked per recorded frame when record_stride > 0.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
    M = np.asarray(M0, dtype=float).copy()
    N, n = x0.shape
    Z = np.concatenate([x0, xi0], axis=1)
    k_cols = M.shape[2]

    status = np.full(N, STATUS_RUNNING, dtype=np.int8)
    tau = np.full(N, np.nan)
    t_end = np.full(N, np.nan)
    final_z = Z.copy()
    final_M = M.copy()

    frames_z, frames_M, frames_alive, frame_t = [], [], [], []

    def aug_rhs(Za, Ma):
        return _variational_rhs(metric, Za, Ma)

    n_steps = int(np.ceil(t_max / step - 1e-12))
    rho_prev = domain.rho(Z[:, :n])
    rho_prev = np.where(np.abs(rho_prev) < 1e-9, np.maximum(rho_prev, 0.0), rho_prev)
    t = 0.0
    for k in range(n_steps):
        alive = status == STATUS_RUNNING
        if not np.any(alive):
            break
        if record_stride and k % record_stride == 0:
            frames_z.append(Z.copy())
            frames_M.append(M.copy())
            frames_alive.append(alive.copy())
            frame_t.append(t)
        h = min(step, t_max - t)
        Za, Ma = Z[alive], M[alive]
        Za_new, Ma_new = variational_rk4_step(metric, Za, Ma, h)

        bad = ~(np.all(np.isfinite(Za_new), axis=1) & np.all(np.isfinite(Ma_new), axis=(1, 2)))
        rho_new = domain.rho(np.where(np.isfinite(Za_new[:, :n]), Za_new[:, :n], 0.0))
        crossed = (rho_new < 0.0) & (rho_prev[alive] >= 0.0) & ~bad
        left = ~metric.grid.contains(Za_new[:, :n]) & ~crossed & ~bad
        idx_alive = np.flatnonzero(alive)

        if np.any(crossed):
            ic = idx_alive[crossed]
            s, Zx = _refine_crossing(metric, domain, Za[crossed], h)
            status[ic] = STATUS_EXITED
            tau[ic] = t + s
            t_end[ic] = t + s
            final_z[ic] = Zx
            # variational state advanced by the partial step to the crossing
            _, final_M[ic] = variational_rk4_step(metric, Za[crossed], Ma[crossed], s)
        if np.any(bad):
            ib = idx_alive[bad]
            status[ib] = STATUS_DIVERGED
            t_end[ib] = t + h
        if np.any(left):
            il = idx_alive[left]
            status[il] = STATUS_LEFT_CHART
            t_end[il] = t + h
            final_z[il] = Za_new[left]
            final_M[il] = Ma_new[left]

        ok = np.isfinite(Za_new).all(axis=1)
        Z[idx_alive[ok]] = Za_new[ok]
        M[idx_alive[ok]] = Ma_new[ok]
        rho_prev[idx_alive] = rho_new
        t += h

    still = status == STATUS_RUNNING
    if np.any(still):
        status[still] = STATUS_TRAPPED
        t_end[still] = t
        final_z[still] = Z[still]
        final_M[still] = M[still]

    res = BatchTrace(status=status, tau=tau, final_z=final_z, t_end=t_end)
    if record_stride:
        res.frame_t = np.asarray(frame_t)
        res.frame_z = np.stack(frames_z) if frames_z else np.zeros((0, N, 2 * n))
        res.frame_alive = (np.stack(frames_alive) if frames_alive
                           else np.zeros((0, N), dtype=bool))
        Mf = np.stack(frames_M) if frames_M else np.zeros((0, N, 2 * n, k_cols))
        return res, final_M, Mf
    return res, final_M, None
