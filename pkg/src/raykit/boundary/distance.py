"""Boundary distance: shooting solver and a grid-graph first-arrival oracle.

Shooting minimizes the exit mismatch over launch directions (multi-start
plus bisection refinement on the signed exit-angle defect); the graph
method runs Dijkstra over a dense lattice with wide stencils and serves as
an independent cross-check accurate to well under a percent on smooth
speeds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from ..errors import ConnectionNotFoundError, IllConditionedEstimateWarning, PreconditionError
from ..geometry.domain import DomainSpec
from ..geometry.flow import STATUS_EXITED, default_t_max, trace_batch
from ..geometry.metric import MetricField
from .chart import BoundaryChart


@dataclass
class DistanceResult:
    length: float
    n_branches: int
    residual: float
    method: str

    def __float__(self):
        return float(self.length)


def _wrap(d):
    return (np.asarray(d) + np.pi) % (2 * np.pi) - np.pi


def boundary_distance(metric: MetricField, domain: DomainSpec, p, q,
                      method: str = "shooting", *, step: float = 2e-3,
                      n_starts: int = 32, grid_shape: int = 256,
                      tol: float = 1e-9) -> DistanceResult:
    """First-arrival distance between boundary points p and q.

    shooting: multi-start over inward directions at p, refined until the
    exit hits q; the reported length is the minimum over found branches
    (their count is reported).  graph: Dijkstra oracle on a dense lattice.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for pt in (p, q):
        if abs(float(domain.rho(pt[None])[0])) > 1e-6:
            raise PreconditionError("p and q must lie on the boundary")
    if method == "graph":
        return _graph_distance(metric, domain, p, q, grid_shape)
    if method != "shooting":
        raise ValueError("method must be 'shooting' or 'graph'")
    if metric.ndim == 2:
        return _shoot_2d(metric, domain, p, q, step, n_starts, tol)
    return _shoot_nd(metric, domain, p, q, step, n_starts, tol)


def _shoot_2d(metric, domain, p, q, step, n_starts, tol):
    chart = BoundaryChart(metric, domain)
    t_max = default_t_max(metric, domain, factor=10.0)
    theta_q = float(chart.param_of(q[None])[0, 0])

    def trace_b(bs):
        pts = np.repeat(p[None], len(bs), axis=0)
        dirs = chart.direction_from_tangential(pts, bs[:, None], inward=True)
        xi = metric.unit_covector(pts, dirs)
        res = trace_batch(metric, domain, pts, xi, step=step, t_max=t_max)
        ok = res.status == STATUS_EXITED
        mis = np.full(len(bs), np.nan)
        if np.any(ok):
            th = chart.param_of(res.final_z[ok, :2])[:, 0]
            mis[ok] = _wrap(th - theta_q)
        return mis, res.tau, res.final_z[:, :2]

    bs = np.linspace(-0.995, 0.995, n_starts)
    mis, tau, exits = trace_b(bs)
    finite = np.isfinite(mis)
    best_res = float(np.nanmin(np.abs(mis))) if finite.any() else np.inf

    brackets = []
    for i in range(len(bs) - 1):
        if finite[i] and finite[i + 1] and mis[i] * mis[i + 1] <= 0 \
                and abs(mis[i] - mis[i + 1]) < np.pi:
            brackets.append((bs[i], bs[i + 1], mis[i]))
    if not brackets:
        raise ConnectionNotFoundError(best_res)

    lo = np.array([b[0] for b in brackets])
    hi = np.array([b[1] for b in brackets])
    flo = np.array([b[2] for b in brackets])
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        fm, _, _ = trace_b(mid)
        fm = np.where(np.isfinite(fm), fm, 1e9)
        swap = np.sign(fm) == np.sign(flo)
        lo = np.where(swap, mid, lo)
        flo = np.where(swap, fm, flo)
        hi = np.where(swap, hi, mid)
    b_star = 0.5 * (lo + hi)
    mis_f, tau_f, exit_f = trace_b(b_star)
    good = np.isfinite(mis_f) & (np.linalg.norm(exit_f - q, axis=-1) < 1e-5 * max(1.0, np.linalg.norm(p - q)))
    if not np.any(good):
        raise ConnectionNotFoundError(float(np.nanmin(np.abs(mis_f))))
    lengths = tau_f[good]
    # dedupe branches by launch parameter
    bu = b_star[good]
    order = np.argsort(bu)
    keep = np.ones(len(bu), dtype=bool)
    keep[1:] = np.diff(bu[order]) > 1e-6
    lengths = lengths[order][keep]
    return DistanceResult(length=float(np.min(lengths)), n_branches=int(keep.sum()),
                          residual=float(np.nanmax(np.abs(mis_f[good]))), method="shooting")


def _shoot_nd(metric, domain, p, q, step, n_starts, tol):
    chart = BoundaryChart(metric, domain)
    t_max = default_t_max(metric, domain, factor=10.0)

    def exits_for(B):
        pts = np.repeat(p[None], len(B), axis=0)
        dirs = chart.direction_from_tangential(pts, B, inward=True)
        xi = metric.unit_covector(pts, dirs)
        res = trace_batch(metric, domain, pts, xi, step=step, t_max=t_max)
        ok = res.status == STATUS_EXITED
        ex = np.full((len(B), metric.ndim), np.nan)
        ex[ok] = res.final_z[ok, : metric.ndim]
        return ex, res.tau

    m = int(np.ceil(np.sqrt(n_starts)))
    g1 = np.linspace(-0.9, 0.9, m)
    B1, B2 = np.meshgrid(g1, g1, indexing="ij")
    B = np.stack([B1.ravel(), B2.ravel()], axis=-1)
    B = B[np.sum(B**2, axis=-1) < 0.98]
    ex, tau = exits_for(B)
    mis = np.linalg.norm(ex - q, axis=-1)
    order = np.argsort(np.where(np.isfinite(mis), mis, np.inf))
    found = []
    best_res = float(np.nanmin(mis))
    for idx in order[:4]:
        b = B[idx].copy()
        for _ in range(40):
            eps = 1e-6
            probe = np.vstack([b, b + [eps, 0], b + [0, eps]])
            exs, taus = exits_for(probe)
            r = exs[0] - q
            if not np.all(np.isfinite(exs)):
                break
            J = np.stack([(exs[1] - exs[0]) / eps, (exs[2] - exs[0]) / eps], axis=1)
            try:
                db = np.linalg.lstsq(J, -r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            nb = b + np.clip(db, -0.2, 0.2)
            if np.sum(nb**2) >= 0.999:
                nb = nb / np.linalg.norm(nb) * 0.995
            b = nb
            if np.linalg.norm(r) < tol:
                break
        exs, taus = exits_for(b[None])
        res = float(np.linalg.norm(exs[0] - q))
        best_res = min(best_res, res)
        if res < 1e-5:
            found.append((float(taus[0]), tuple(np.round(b, 5))))
    if not found:
        raise ConnectionNotFoundError(best_res)
    uniq = {}
    for length, key in found:
        uniq.setdefault(key, length)
    lengths = np.array(list(uniq.values()))
    return DistanceResult(float(lengths.min()), len(uniq), best_res, "shooting")


_OFFSETS_2D = np.array([(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2),
                        (2, -1), (1, -2), (3, 1), (1, 3), (3, -1), (1, -3),
                        (3, 2), (2, 3), (3, -2), (2, -3)])
_OFFSETS_3D = np.array([(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1),
                        (0, 1, 1), (1, -1, 0), (1, 0, -1), (0, 1, -1),
                        (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1),
                        (2, 1, 0), (2, 0, 1), (1, 2, 0), (0, 2, 1), (1, 0, 2),
                        (0, 1, 2), (2, -1, 0), (2, 0, -1), (1, -2, 0),
                        (0, 2, -1), (1, 0, -2), (0, 1, -2), (2, 1, 1),
                        (1, 2, 1), (1, 1, 2), (2, -1, -1), (1, -2, -1),
                        (1, -1, -2), (2, 1, -1), (2, -1, 1), (1, 2, -1),
                        (1, -2, 1), (1, 1, -2), (1, -1, 2)])


def _graph_distance(metric, domain, p, q, grid_shape):
    n = metric.ndim
    lo = np.asarray(metric.grid.origin)
    hi = np.asarray(metric.grid.upper)
    shape = (grid_shape,) * n if np.isscalar(grid_shape) else tuple(grid_shape)
    axes = [np.linspace(lo[k], hi[k], shape[k]) for k in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    inside = domain.rho(nodes) > 0
    slowness = 1.0 / _speed_like(metric, nodes)

    idx = -np.ones(len(nodes), dtype=np.int64)
    idx[inside] = np.arange(inside.sum())
    n_in = int(inside.sum())
    spacing = np.array([ax[1] - ax[0] for ax in axes])

    offsets = _OFFSETS_2D if n == 2 else _OFFSETS_3D
    rows, cols, vals = [], [], []
    grid_idx = np.stack(np.meshgrid(*[np.arange(m) for m in shape], indexing="ij"),
                        axis=-1).reshape(-1, n)
    for off in offsets:
        nb = grid_idx + off
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        src = np.flatnonzero(ok)
        dst = np.ravel_multi_index(nb[ok].T, shape)
        both = inside[src] & inside[dst]
        src, dst = src[both], dst[both]
        mid_in = domain.rho(0.5 * (nodes[src] + nodes[dst])) > 0
        src, dst = src[mid_in], dst[mid_in]
        seg = np.linalg.norm(off * spacing)
        w = seg * 0.5 * (slowness[src] + slowness[dst])
        rows.append(idx[src])
        cols.append(idx[dst])
        vals.append(w)

    # virtual terminals for p and q
    pq_rows, pq_cols, pq_vals = [], [], []
    for term, pt in ((n_in, p), (n_in + 1, q)):
        d = np.linalg.norm(nodes - pt, axis=-1)
        near = inside & (d < 3.5 * spacing.max())
        src = np.flatnonzero(near)
        sl_pt = 1.0 / _speed_like(metric, pt[None])[0]
        w = d[near] * 0.5 * (slowness[near] + sl_pt)
        pq_rows.append(np.full(len(src), term))
        pq_cols.append(idx[src])
        pq_vals.append(w)

    rows = np.concatenate(rows + pq_rows)
    cols = np.concatenate(cols + pq_cols)
    vals = np.concatenate(vals + pq_vals)
    Nn = n_in + 2
    Gr = sparse.csr_matrix((vals, (rows, cols)), shape=(Nn, Nn))
    dist = dijkstra(Gr, directed=False, indices=n_in)
    return DistanceResult(length=float(dist[n_in + 1]), n_branches=1,
                          residual=0.0, method="graph")


def _speed_like(metric, points):
    if metric.kind == "conformal":
        return metric.speed(points)
    # direction-averaged speed proxy for general metrics
    eig = np.linalg.eigvalsh(metric.cometric_matrix(points))
    return np.sqrt(eig.mean(axis=-1))


def boundary_speed_from_distance(samples) -> dict:
    """Boundary speed from near-diagonal distance samples.

    `samples` are (separation, distance) pairs at separations h, h/2, h/4
    along a boundary tangent; the speed estimate is the Richardson limit of
    separation / distance.  A nonmonotone tail is flagged with a warning
    and the finest-ratio fallback is returned.
    """
    samples = sorted(((float(s), float(d)) for s, d in samples), reverse=True)
    if len(samples) < 3:
        raise PreconditionError("need samples at three separations")
    ratios = np.array([s / d for s, d in samples[:3]])
    d01 = ratios[1] - ratios[0]
    d12 = ratios[2] - ratios[1]
    out = {"ratios": ratios, "estimate": float(ratios[2]), "order": np.nan,
           "error_bound": float(abs(d12)), "flagged": False}
    if d12 == 0.0:
        out["error_bound"] = 0.0
        return out
    if d01 * d12 <= 0 or abs(d12) >= abs(d01):
        warnings.warn("nonmonotone extrapolation; returning finest ratio",
                      IllConditionedEstimateWarning)
        out["flagged"] = True
        return out
    qq = np.log2(abs(d01) / abs(d12))
    extr = ratios[2] + d12 / (2**qq - 1.0)
    out.update(estimate=float(extr), order=float(qq),
               error_bound=float(abs(extr - ratios[2])))
    return out
