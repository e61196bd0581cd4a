"""Distances to the model surfaces used as test sets and grains."""
from __future__ import annotations

import numpy as np


def log_curve_distance(a, b, iters: int = 40) -> np.ndarray:
    """Euclidean distance from (a, b) to the curve {(e^v, v)} = {(u, log u)}.

    Works in the parameter v, where the squared distance is convex whenever
    a < 2*sqrt(2); two Newton starts cover the remaining points.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    best = np.full(np.broadcast_shapes(a.shape, b.shape), np.inf)
    starts = (np.broadcast_to(b, best.shape), np.log(np.maximum(np.broadcast_to(a, best.shape), 1e-3)))
    for v in starts:
        v = np.clip(v.astype(float), -30.0, 30.0)
        for _ in range(iters):
            e = np.exp(v)
            grad = (e - a) * e + (v - b)
            curv = 2 * e * e - a * e + 1
            step = np.where(curv > 0, grad / np.where(curv > 0, curv, 1.0), np.sign(grad) * 0.1)
            v = np.clip(v - np.clip(step, -2.0, 2.0), -30.0, 30.0)
        dist = np.hypot(np.exp(v) - a, v - b)
        best = np.minimum(best, dist)
    return best


def surface_m_distance(points) -> np.ndarray:
    """Distance in R^3 from (x1, x2, t) to M = {(u, log u, t)}; t plays no role."""
    points = np.asarray(points, float)
    return log_curve_distance(points[..., 0], points[..., 1])


def hyperplane_distance(points, normal, offset: float) -> np.ndarray:
    normal = np.asarray(normal, float)
    return np.abs(np.asarray(points, float) @ normal - offset) / np.linalg.norm(normal)
