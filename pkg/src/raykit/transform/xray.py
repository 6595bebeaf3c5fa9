"""Geodesic X-ray transforms of functions and tensors along traced paths."""

from __future__ import annotations

import numpy as np

from ..errors import TransformUndefinedError
from ..geometry.flow import GeodesicPath
from ..geometry.metric import MetricField
from .quadrature import composite_weights
from .tensor_grid import TensorGrid


def xray(metric: MetricField, f: TensorGrid, path: GeodesicPath) -> float:
    """Integral of f (contracted with the velocity to its order) along path.

    Order 0 integrates f(gamma), order 1 f_i gamma-dot^i, order 2
    f_ij gamma-dot^i gamma-dot^j, with composite 4th-order quadrature on
    the stored samples.
    """
    if path.status != "exited":
        raise TransformUndefinedError(
            f"transform undefined on a path with status {path.status!r}")
    v = metric.velocity(path.x, path.xi)
    integrand = f.contract(path.x, v)
    return float(composite_weights(path.t) @ integrand)


def xray_weighted(metric: MetricField, weight, f: TensorGrid,
                  path: GeodesicPath) -> float:
    """X-ray transform with a phase-space weight w(x, v) on an order-0 field."""
    if f.order != 0:
        raise ValueError("weighted transform defined for order-0 fields")
    if path.status != "exited":
        raise TransformUndefinedError(
            f"transform undefined on a path with status {path.status!r}")
    v = metric.velocity(path.x, path.xi)
    integrand = weight(path.x, v) * f.contract(path.x, v)
    return float(composite_weights(path.t) @ integrand)
