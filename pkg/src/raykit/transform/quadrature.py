"""Composite quadrature weights on ray sample skeletons.

Ray nodes are uniformly spaced at the recording step except for a short
trailing interval ending at the refined exit time.  The rule is composite
Simpson (with a 3/8 block when the uniform count is odd) plus an exact
cubic-interpolant integral over the trailing partial interval, giving a
globally 4th-order scheme expressed as per-node weights.
"""

from __future__ import annotations

import numpy as np


def composite_weights(ts: np.ndarray) -> np.ndarray:
    """Per-node weights w with integral ~= w @ f(ts), 4th order."""
    ts = np.asarray(ts, dtype=float)
    K = len(ts)
    if K < 2:
        return np.zeros(K)
    if K == 2:
        return 0.5 * (ts[1] - ts[0]) * np.ones(2)
    h = ts[1] - ts[0]
    w = np.zeros(K)
    last = ts[-1] - ts[-2]
    uniform_last = abs(last - h) <= 1e-9 * max(h, 1.0)
    m = K - 1 if uniform_last else K - 2  # uniform intervals in ts[0..m]
    _uniform_block(w, h, m)
    if not uniform_last:
        _tail_block(w, ts, K)
    return w


def _uniform_block(w, h, m):
    """Simpson weights over nodes 0..m (m intervals of width h)."""
    if m == 0:
        return
    if m == 1:
        w[0] += 0.5 * h
        w[1] += 0.5 * h
        return
    if m == 2:
        w[0:3] += h / 3.0 * np.array([1.0, 4.0, 1.0])
        return
    if m % 2 == 0:
        pat = np.ones(m + 1)
        pat[1:-1:2] = 4.0
        pat[2:-1:2] = 2.0
        w[: m + 1] += h / 3.0 * pat
    else:
        m0 = m - 3
        if m0 > 0:
            pat = np.ones(m0 + 1)
            pat[1:-1:2] = 4.0
            pat[2:-1:2] = 2.0
            w[: m0 + 1] += h / 3.0 * pat
        w[m0 : m0 + 4] += 3.0 * h / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])


def _tail_block(w, ts, K):
    """Exact integral of the cubic through the last 4 nodes over the tail."""
    i0 = max(K - 4, 0)
    nodes = ts[i0:K]
    a, b = ts[K - 2], ts[K - 1]
    t0 = nodes[0]
    V = np.vander(nodes - t0, increasing=True)  # row i: (t_i - t0)^j
    powers = np.arange(len(nodes)) + 1.0
    moments = ((b - t0) ** powers - (a - t0) ** powers) / powers
    w[i0:K] += np.linalg.solve(V.T, moments)
