"""Scattering relation and lens-data tables.

A lens record maps an entry (boundary parameter, tangential projection of
the inward direction) to the exit pair and the travel time.  Tangential
entries map to themselves with zero length, trapping is capped at t_max
and reported as such, and per-row failures are stored as row status rather
than aborting the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ChartIncompleteError, PreconditionError
from ..geometry.domain import DomainSpec
from ..geometry.flow import STATUS_EXITED, STATUS_LEFT_CHART, STATUS_NAMES, default_t_max, trace_batch
from ..geometry.metric import MetricField
from .chart import GRAZING_BAND, BoundaryChart


@dataclass
class LensRecord:
    entry_param: np.ndarray
    entry_tangential: np.ndarray
    exit_param: np.ndarray
    exit_tangential: np.ndarray
    length: float
    status: str


@dataclass
class LensData:
    """Structure-of-arrays lens table in deterministic sampling order."""

    entry_param: np.ndarray       # (N, n-1)
    entry_tangential: np.ndarray  # (N, n-1)
    exit_param: np.ndarray
    exit_tangential: np.ndarray
    length: np.ndarray            # (N,)
    status: np.ndarray            # (N,) of str
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.length)

    def row(self, i: int) -> LensRecord:
        return LensRecord(self.entry_param[i], self.entry_tangential[i],
                          self.exit_param[i], self.exit_tangential[i],
                          float(self.length[i]), str(self.status[i]))

    def __iter__(self):
        return (self.row(i) for i in range(len(self)))

    def exited_mask(self) -> np.ndarray:
        return self.status == "exited"


def _fill_exit(metric, chart, x_exit, xi_exit):
    v = metric.velocity(x_exit, xi_exit)
    q_param = chart.param_of(x_exit)
    b_exit = chart.tangential_of_velocity(x_exit, v)
    return q_param, b_exit


def scattering_relation(metric: MetricField, domain: DomainSpec, chart: BoundaryChart,
                        entry_param, entry_tangential, *, step=2e-3,
                        t_max=None) -> LensRecord:
    """Flow one entry to its exit and fill the lens record.

    Entries in the grazing band |b| > 1 - 1e-3 short-circuit to the
    identity with zero length.
    """
    ep = np.atleast_1d(np.asarray(entry_param, dtype=float))
    b = np.atleast_1d(np.asarray(entry_tangential, dtype=float))
    bnorm = np.linalg.norm(b)
    if bnorm > 1.0 + 1e-12:
        raise PreconditionError("entry direction must be inward or tangential")
    if bnorm >= 1.0 - GRAZING_BAND:
        return LensRecord(ep, b, ep.copy(), b.copy(), 0.0, "grazing")
    if t_max is None:
        t_max = default_t_max(metric, domain)
    x0, xi0 = chart.launch_covectors(ep[None], b[None])
    res = trace_batch(metric, domain, x0, xi0, step=step, t_max=t_max)
    code = int(res.status[0])
    if code == STATUS_LEFT_CHART:
        raise ChartIncompleteError("geodesic left the gridded chart")
    if code != STATUS_EXITED:
        return LensRecord(ep, b, np.full_like(ep, np.nan),
                          np.full_like(b, np.nan), float(res.t_end[0]),
                          STATUS_NAMES[code])
    n = metric.ndim
    q_param, b_exit = _fill_exit(metric, chart, res.final_z[:, :n], res.final_z[:, n:])
    return LensRecord(ep, b, q_param[0], b_exit[0], float(res.tau[0]), "exited")


def direction_grid(n_dirs: int, ndim: int) -> np.ndarray:
    """Deterministic tangential-projection sampling in the unit ball.

    2D: midpoints of a uniform partition of (-1, 1).  3D: product of that
    grid with itself, restricted to the open unit disk.
    """
    b1 = (2.0 * (np.arange(n_dirs) + 0.5) / n_dirs) - 1.0
    if ndim == 2:
        return b1[:, None]
    B1, B2 = np.meshgrid(b1, b1, indexing="ij")
    b = np.stack([B1.ravel(), B2.ravel()], axis=-1)
    return b[np.sum(b**2, axis=-1) < 1.0]


def boundary_param_grid(n_points: int, ndim: int) -> np.ndarray:
    th = 2 * np.pi * np.arange(n_points) / n_points
    if ndim == 2:
        return th[:, None]
    ph = np.pi * (np.arange(n_points) + 0.5) / n_points
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    return np.stack([TH.ravel(), PH.ravel()], axis=-1)


def lens_dataset(metric: MetricField, domain: DomainSpec, chart: BoundaryChart,
                 n_points: int, n_dirs: int, *, step=2e-3, t_max=None,
                 noise_sigma=0.0, seed=0, params=None, tangentials=None) -> LensData:
    """Product-sampled lens-data table, rows in deterministic order.

    Either pass explicit `params`/`tangentials` 1-axis grids or counts.
    Rows are the product ordering (boundary-major).  Optional Gaussian
    noise (seeded) is added to lengths and exit parameters, and recorded
    in the metadata; per-row errors become row statuses.
    """
    if n_points < 1 or n_dirs < 1:
        raise PreconditionError("sampling counts must be >= 1")
    if t_max is None:
        t_max = default_t_max(metric, domain)
    P = boundary_param_grid(n_points, metric.ndim) if params is None else np.atleast_2d(params)
    B = direction_grid(n_dirs, metric.ndim) if tangentials is None else np.atleast_2d(tangentials)
    nP, nB = len(P), len(B)
    N = nP * nB
    m = metric.ndim - 1
    ep = np.repeat(P, nB, axis=0)
    eb = np.tile(B, (nP, 1))

    exit_param = np.full((N, m), np.nan)
    exit_tang = np.full((N, m), np.nan)
    length = np.full(N, np.nan)
    status = np.full(N, "error", dtype=object)

    bnorm = np.linalg.norm(eb, axis=-1)
    grazing = bnorm >= 1.0 - GRAZING_BAND
    if np.any(grazing):
        exit_param[grazing] = ep[grazing]
        exit_tang[grazing] = eb[grazing]
        length[grazing] = 0.0
        status[grazing] = "grazing"

    todo = ~grazing
    if np.any(todo):
        x0, xi0 = chart.launch_covectors(ep[todo], eb[todo])
        res = trace_batch(metric, domain, x0, xi0, step=step, t_max=t_max)
        idx = np.flatnonzero(todo)
        n = metric.ndim
        exited = res.status == STATUS_EXITED
        if np.any(exited):
            ie = idx[exited]
            qp, qb = _fill_exit(metric, chart, res.final_z[exited, :n],
                                res.final_z[exited, n:])
            exit_param[ie] = qp
            exit_tang[ie] = qb
            length[ie] = res.tau[exited]
            status[ie] = "exited"
        for code in (2, 3, 4):  # trapped_capped, left_chart, diverged
            mcode = res.status == code
            if np.any(mcode):
                im = idx[mcode]
                status[im] = STATUS_NAMES[code]
                length[im] = res.t_end[mcode]

    meta = {
        "metric_hash": metric.content_hash(),
        "kind": metric.kind,
        "step": step,
        "t_max": t_max,
        "n_points": nP,
        "n_dirs": nB,
        "noise_sigma": noise_sigma,
        "seed": seed,
        "event_tol": 1e-10,
    }
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        ok = status == "exited"
        length[ok] = length[ok] + noise_sigma * rng.standard_normal(ok.sum())
        exit_param[ok] += noise_sigma * rng.standard_normal((ok.sum(), m))
        exit_tang[ok] += noise_sigma * rng.standard_normal((ok.sum(), m))

    return LensData(entry_param=ep, entry_tangential=eb, exit_param=exit_param,
                    exit_tangential=exit_tang, length=length,
                    status=np.asarray(status, dtype=object), metadata=meta)


def lens_mismatch(a: LensData, b: LensData) -> dict:
    """Row-wise comparison of two tables over the same sampling."""
    if len(a) != len(b):
        raise ValueError("tables must share the sampling")
    both = (a.status == "exited") & (b.status == "exited")
    out = {
        "n_compared": int(both.sum()),
        "max_length_diff": float(np.abs(a.length[both] - b.length[both]).max(initial=0.0)),
        "max_exit_param_diff": float(np.abs(_wrap_angle(a.exit_param[both] - b.exit_param[both])).max(initial=0.0)),
        "max_exit_tangential_diff": float(np.abs(a.exit_tangential[both] - b.exit_tangential[both]).max(initial=0.0)),
        "status_mismatches": int(np.sum(a.status != b.status)),
    }
    return out


def _wrap_angle(d):
    return (np.asarray(d) + np.pi) % (2 * np.pi) - np.pi
