"""Stock speeds and domains used across tests and experiments.

Most of these are polynomial in the coordinates, which the cubic-spline
grid representation reproduces exactly; the Gaussian profiles are not, and
exercise genuine interpolation error.
"""

from __future__ import annotations

import numpy as np

from .domain import BallDomain, RadialSpeed
from .metric import MetricField


def _as2d(p):
    return np.atleast_2d(p)


def flat_speed(c0: float = 1.0):
    fn = lambda p: np.full(len(_as2d(p)), float(c0))
    grad = lambda p: np.zeros_like(_as2d(p))
    hess = lambda p: np.zeros(_as2d(p).shape + (_as2d(p).shape[1],))
    return fn, grad, hess


def herglotz_speed(a: float = 0.2):
    """c = 1 + a (1 - |x|^2); satisfies the Herglotz condition for a > -1/2."""
    def fn(p):
        p = _as2d(p)
        return 1.0 + a * (1.0 - np.sum(p**2, axis=-1))

    def grad(p):
        p = _as2d(p)
        return -2.0 * a * p

    def hess(p):
        p = _as2d(p)
        n = p.shape[1]
        return np.broadcast_to(-2.0 * a * np.eye(n), (len(p), n, n)).copy()

    return fn, grad, hess


def hyperbolic_speed():
    """c(x, y) = y on the upper half-plane chart; curvature -1."""
    def fn(p):
        return _as2d(p)[:, 1].copy()

    def grad(p):
        p = _as2d(p)
        out = np.zeros_like(p)
        out[:, 1] = 1.0
        return out

    def hess(p):
        p = _as2d(p)
        return np.zeros((len(p), p.shape[1], p.shape[1]))

    return fn, grad, hess


def sphere_chart_speed():
    """c = (1 + |x|^2)/2: stereographic chart of the unit round sphere."""
    def fn(p):
        p = _as2d(p)
        return 0.5 * (1.0 + np.sum(p**2, axis=-1))

    def grad(p):
        return _as2d(p).copy()

    def hess(p):
        p = _as2d(p)
        n = p.shape[1]
        return np.broadcast_to(np.eye(n), (len(p), n, n)).copy()

    return fn, grad, hess


def low_velocity_zone_speed(depth: float = 0.5, r0: float = 0.5, width2: float = 0.01):
    """c = 1 - depth * exp(-(r - r0)^2 / width2): breaks the Herglotz
    condition near r0 and traps rays in the slow channel."""
    def fn(p):
        r = np.linalg.norm(_as2d(p), axis=-1)
        return 1.0 - depth * np.exp(-((r - r0) ** 2) / width2)

    def grad(p):
        p = _as2d(p)
        r = np.linalg.norm(p, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        dc_dr = depth * np.exp(-((r - r0) ** 2) / width2) * 2 * (r - r0) / width2
        return (dc_dr / rs)[:, None] * p

    return fn, grad, None


def linear_gradient_speed(a: float = 0.1, axis: int = 0):
    def fn(p):
        return 1.0 + a * _as2d(p)[:, axis]

    def grad(p):
        p = _as2d(p)
        out = np.zeros_like(p)
        out[:, axis] = a
        return out

    def hess(p):
        p = _as2d(p)
        return np.zeros((len(p), p.shape[1], p.shape[1]))

    return fn, grad, hess


def disk_setup(speed="flat", shape=(161, 161), radius=1.0, box=1.2, ndim=2, **kw):
    """MetricField + BallDomain for a standard disk/ball experiment."""
    makers = {
        "flat": flat_speed,
        "herglotz": herglotz_speed,
        "sphere": sphere_chart_speed,
        "lvz": low_velocity_zone_speed,
        "linear": linear_gradient_speed,
    }
    fn, grad, hess = makers[speed](**kw)
    lo = [-box] * ndim
    hi = [box] * ndim
    if np.isscalar(shape):
        shape = (int(shape),) * ndim
    elif len(shape) != ndim:
        shape = (shape[0],) * ndim
    metric = MetricField.from_speed(fn, lo, hi, shape, grad=grad, hess=hess)
    domain = BallDomain(radius, ndim=ndim)
    return metric, domain


def herglotz_radial(a: float = 0.2, R: float = 1.0) -> RadialSpeed:
    return RadialSpeed(R, fn=lambda r: 1.0 + a * (1.0 - r**2),
                       dfn=lambda r: -2.0 * a * r)


def lvz_radial(depth: float = 0.5, r0: float = 0.5, width2: float = 0.01,
               R: float = 1.0) -> RadialSpeed:
    return RadialSpeed(
        R,
        fn=lambda r: 1.0 - depth * np.exp(-((r - r0) ** 2) / width2),
        dfn=lambda r: depth * np.exp(-((r - r0) ** 2) / width2) * 2 * (r - r0) / width2)
