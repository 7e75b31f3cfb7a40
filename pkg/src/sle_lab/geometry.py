"""Planar geometry helpers for curves stored as complex arrays."""

from __future__ import annotations

import numpy as np


def point_min_distance(a: np.ndarray, b: np.ndarray, chunk: int = 1024) -> float:
    """Minimum distance between two point clouds (complex arrays)."""
    a = np.asarray(a)
    b = np.asarray(b)
    best = np.inf
    for lo in range(0, len(a), chunk):
        d = np.abs(a[lo : lo + chunk, None] - b[None, :])
        m = d.min()
        if m < best:
            best = float(m)
    return best


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u.real * v.imag - u.imag * v.real


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points ``p`` to segments ``[a, b]`` (all broadcastable)."""
    ab = b - a
    denom = np.abs(ab) ** 2
    t = np.where(denom > 0, ((p - a) * np.conj(ab)).real / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(p - (a + t * ab))


def min_self_distance(points: np.ndarray) -> float:
    """Minimum distance between non-adjacent segments of a polyline.

    Properly crossing segment pairs give distance 0.
    """
    pts = np.asarray(points, dtype=complex)
    n = len(pts) - 1
    if n < 3:
        return np.inf
    best = np.inf
    p_all = pts[:-1]
    q_all = pts[1:]
    for i in range(n - 2):
        p1, p2 = pts[i], pts[i + 1]
        a = p_all[i + 2 :]
        b = q_all[i + 2 :]
        d1 = _cross(b - a, p1 - a)
        d2 = _cross(b - a, p2 - a)
        d3 = _cross(p2 - p1, a - p1)
        d4 = _cross(p2 - p1, b - p1)
        crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
        if crossing.any():
            return 0.0
        d = np.minimum(
            np.minimum(_point_segment_distance(p1, a, b), _point_segment_distance(p2, a, b)),
            np.minimum(
                _point_segment_distance(a, p1, p2), _point_segment_distance(b, p1, p2)
            ),
        )
        m = d.min()
        if m < best:
            best = float(m)
    return best


def is_simple(points: np.ndarray, tol: float) -> bool:
    """Whether the polyline keeps non-adjacent segments at least ``tol`` apart."""
    return min_self_distance(points) >= tol


def encloses(curve: np.ndarray, z: complex) -> bool:
    """Even-odd membership of ``z`` in the region bounded by the closed curve.

    The polygon is the polyline plus the straight closing edge from its last
    vertex back to the first; for a crosscut with both endpoints on the real
    axis this closes the curve along the axis.
    """
    pts = np.asarray(curve, dtype=complex)
    x1 = pts.real
    y1 = pts.imag
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    zx, zy = z.real, z.imag
    straddle = (y1 > zy) != (y2 > zy)
    if not straddle.any():
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = x1 + (zy - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (zx < x_at)
    return bool(np.count_nonzero(hits) % 2 == 1)
