"""Deterministic chordal Loewner engine.

Hulls are grown by composing elementary vertical-slit maps, one per time
step; each step is the exact solution of the half-plane Loewner flow for a
constant driving value.  The forward elementary map over a step of capacity
duration ``delta`` with driving value ``xi`` is

    g(w) = xi + sqrt((w - xi)^2 + 4*delta),

with the square-root branch chosen in the closed upper half-plane; its
inverse is ``h(v) = xi + sqrt((v - xi)^2 - 4*delta)`` with the same branch
rule.  A chain built from a sampled driving function uses the right-endpoint
value of each step, which makes the discrete trace pass exactly through the
slit tips and makes the welding (zipper) of a traced curve reproduce the
chain's steps.

Derivatives up to third order are propagated analytically through every
step (order-3 chain rule); finite differences across a long composition
would lose too much precision for the downstream identity checks.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CurveNotSimple, NotACrosscutStart, PointSwallowed

# Squared-distance tolerance between a real point and the driving value at
# which contact counts as swallowing (distinguishes contact from pass-through).
TOL_SWALLOW = 1e-12
# Default capacity-time step for experiments; calibrated against the
# analytic constant-driving case and the driving round trip.
DEFAULT_T_STEP = 1e-4
# Pointwise tolerance for the polyline reproduction round trip.
TOL_ZIP = 1e-6
# Minimum distance between non-adjacent segments for a "simple" polyline.
TOL_SELF = 1e-6


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DrivingSample:
    """A real driving function sampled on a uniform capacity-time grid.

    ``values[k]`` is the driving value at time ``k * t_step``; the sample
    spans ``duration() = (len(values) - 1) * t_step``.
    """

    values: np.ndarray
    t_step: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if not self.t_step > 0:
            raise ValueError("t_step must be positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    def duration(self) -> float:
        return self.n_steps * self.t_step

    @staticmethod
    def constant(level: float, duration: float, t_step: float) -> "DrivingSample":
        n = max(1, round(duration / t_step))
        return DrivingSample(np.full(n + 1, float(level)), t_step)

    def to_csv(self, path: str | Path) -> None:
        lines = ["t,xi"]
        for k, v in enumerate(self.values):
            lines.append(f"{_fmt(k * self.t_step)},{_fmt(v)}")
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path: str | Path) -> "DrivingSample":
        rows = Path(path).read_text().strip().splitlines()[1:]
        t = np.array([float(r.split(",")[0]) for r in rows])
        xi = np.array([float(r.split(",")[1]) for r in rows])
        if len(t) < 2:
            raise ValueError("need at least two samples to infer t_step")
        return DrivingSample(xi, float(t[1] - t[0]))

    def to_json_dict(self) -> dict:
        return {"t_step": self.t_step, "values": [float(v) for v in self.values]}

    @staticmethod
    def from_json_dict(d: dict) -> "DrivingSample":
        return DrivingSample(np.asarray(d["values"], dtype=float), float(d["t_step"]))


@dataclass(frozen=True)
class ConformalChain:
    """A composition of elementary slit maps.

    Step ``i`` has driving value ``xi[i]`` and capacity duration
    ``delta[i]``; the composed map realizes the hull of total half-plane
    capacity ``2 * total_time``.  Immutable; safe to share across workers.
    """

    xi: np.ndarray
    delta: np.ndarray
    total_time: float
    sample: DrivingSample | None = field(default=None, repr=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        if xi.shape != delta.shape or xi.ndim != 1:
            raise ValueError("xi and delta must be 1-d arrays of equal length")
        if np.any(delta < 0):
            raise ValueError("step durations must be nonnegative")
        xi.setflags(write=False)
        delta.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "delta", delta)

    @property
    def n_steps(self) -> int:
        return len(self.xi)

    def hcap(self) -> float:
        return 2.0 * self.total_time

    def time_of(self, upto: int) -> float:
        """Capacity time spanned by the first ``upto`` steps."""
        if self.sample is not None:
            return upto * self.sample.t_step
        return float(np.sum(self.delta[:upto]))


@dataclass(frozen=True)
class Jet3:
    """Value and first three derivatives of a composed map at one point."""

    f: complex
    f1: complex
    f2: complex
    f3: complex


@dataclass(frozen=True)
class TracePolyline:
    """Sampled curve traced by a chain: ``points[k]`` at time ``k * t_step``."""

    points: np.ndarray
    t_step: float

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex)
        if points.ndim != 1 or points.size == 0:
            raise ValueError("points must be a non-empty 1-d array")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def duration(self) -> float:
        return (len(self.points) - 1) * self.t_step

    def to_csv(self, path: str | Path) -> None:
        lines = ["t,re,im"]
        for k, p in enumerate(self.points):
            lines.append(f"{_fmt(k * self.t_step)},{_fmt(p.real)},{_fmt(p.imag)}")
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path: str | Path) -> "TracePolyline":
        rows = Path(path).read_text().strip().splitlines()[1:]
        parts = [r.split(",") for r in rows]
        t = np.array([float(p[0]) for p in parts])
        z = np.array([complex(float(p[1]), float(p[2])) for p in parts])
        if len(t) < 2:
            raise ValueError("need at least two samples to infer t_step")
        return TracePolyline(z, float(t[1] - t[0]))

    def to_json_dict(self) -> dict:
        return {
            "t_step": self.t_step,
            "values": [[float(p.real), float(p.imag)] for p in self.points],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "TracePolyline":
        pts = np.array([complex(re, im) for re, im in d["values"]])
        return TracePolyline(pts, float(d["t_step"]))


@dataclass(frozen=True)
class HullExtents:
    """Real footprint [a, b] of a hull and its image interval [c, d]."""

    a: float
    b: float
    c: float
    d: float


# ---------------------------------------------------------------------------
# square-root branch selection
# ---------------------------------------------------------------------------


def _half_plane_sqrt(u: complex, hint: float) -> complex:
    # Branch with image in the closed upper half-plane.  On the nonnegative
    # real axis both roots are real; `hint` (the sign of Re(w - xi)) picks
    # the one that continues the map from the complex side.
    if u.imag != 0.0:
        r = cmath.sqrt(u)
        return r if r.imag >= 0.0 else -r
    if u.real >= 0.0:
        r = math.sqrt(u.real)
        return complex(r if hint >= 0.0 else -r, 0.0)
    return complex(0.0, math.sqrt(-u.real))


def advance_points(
    points: np.ndarray, xi: float | np.ndarray, delta: float
) -> np.ndarray:
    """Apply one forward elementary map to an array of points in closed H.

    ``xi`` may also be an array holding one driving value per point.
    """
    pts = np.array(points, dtype=complex)
    if np.ndim(xi) == 0:
        _kernels.advance_inplace(pts, float(xi), float(delta))
    else:
        _kernels.advance_var_inplace(
            pts, np.ascontiguousarray(xi, dtype=float), float(delta)
        )
    return pts


def _retreat_points(points: np.ndarray, xi: float, delta: float) -> np.ndarray:
    """Apply one inverse elementary map to an array of points in closed H."""
    pts = np.array(points, dtype=complex)
    _kernels.retreat_inplace(pts, float(xi), float(delta))
    return pts


# ---------------------------------------------------------------------------
# chain construction and evaluation
# ---------------------------------------------------------------------------


def build_chain(d: DrivingSample) -> ConformalChain:
    """Compose one elementary slit map per sample step.

    Step ``k`` covers ``[k*t_step, (k+1)*t_step]`` and uses the driving
    value at the right endpoint, so the traced curve passes through the
    tip of every slit.
    """
    n = d.n_steps
    return ConformalChain(
        xi=np.array(d.values[1:], dtype=float),
        delta=np.full(n, d.t_step),
        total_time=n * d.t_step,
        sample=d,
    )


def jet_along_steps(
    xi: np.ndarray,
    delta: np.ndarray,
    x: float,
    record_at: np.ndarray | None = None,
    order: int = 3,
) -> np.ndarray:
    """Propagate a real-point jet through the steps ``(xi, delta)``.

    Returns an array of shape ``(len(record_at), 4)`` holding
    ``(f, f', f'', f''')`` after the first ``record_at[i]`` steps
    (``record_at`` must be nondecreasing).  With ``order=1`` only the value
    and first derivative are propagated and the higher entries are zero.

    Raises PointSwallowed if the point touches the driving value (squared
    distance below TOL_SWALLOW) or if the driving value steps across it.
    """
    n = len(xi)
    if record_at is None:
        record_at = np.array([n])
    record = np.ascontiguousarray(record_at, dtype=np.int64)
    out = np.empty((len(record), 4))
    status = _kernels.jet_pass(
        np.ascontiguousarray(xi, dtype=float),
        np.ascontiguousarray(delta, dtype=float),
        float(x),
        record,
        order,
        out,
    )
    if status:
        raise PointSwallowed(f"real point swallowed at step {status - 1}")
    return out


def forward_map(c: ConformalChain, z: complex, upto: int | None = None) -> Jet3:
    """Value and first three derivatives of the composed map at ``z``.

    ``z`` must lie in the closed upper half-plane; real points must be
    outside the hull footprint.  ``upto`` restricts the composition to the
    first ``upto`` steps (default: all).

    Raises PointSwallowed when the point lies in (or within tolerance of)
    the hull of some step.
    """
    if upto is None:
        upto = c.n_steps
    if not 0 <= upto <= c.n_steps:
        raise ValueError("upto out of range")
    z = complex(z)
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half-plane")
    if z.imag == 0.0:
        vals = jet_along_steps(c.xi[:upto], c.delta[:upto], z.real)
        f, f1, f2, f3 = vals[0]
        return Jet3(f, f1, f2, f3)

    f, f1, f2, f3 = z, 1.0 + 0.0j, 0.0j, 0.0j
    for m in range(upto):
        xm = c.xi[m]
        dm = c.delta[m]
        dv = f - xm
        u = dv * dv + 4.0 * dm
        if u.imag == 0.0 and dv.real == 0.0 and u.real >= -TOL_SWALLOW:
            # directly above the driving value, at or below the slit tip
            raise PointSwallowed(f"point on the slit at step {m}")
        root = _half_plane_sqrt(u, dv.real)
        g1 = dv / root
        r3 = root * root * root
        g2 = 4.0 * dm / r3
        g3 = -12.0 * dm * dv / (r3 * root * root)
        f3 = g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3
        f2 = g2 * f1 * f1 + g1 * f2
        f1 = g1 * f1
        f = xm + root
    return Jet3(f, f1, f2, f3)


def map_points(
    c: ConformalChain, points: np.ndarray, upto: int | None = None
) -> np.ndarray:
    """Composed-map values (no derivatives) for an array of points."""
    if upto is None:
        upto = c.n_steps
    pts = np.array(points, dtype=complex)
    for m in range(upto):
        _kernels.advance_inplace(pts, c.xi[m], c.delta[m])
    return pts


def inverse_point(c: ConformalChain, w: complex, upto: int | None = None) -> complex:
    """Preimage of ``w`` under the composed map (total on closed H)."""
    if upto is None:
        upto = c.n_steps
    w = complex(w)
    if w.imag < 0:
        raise ValueError("w must lie in the closed upper half-plane")
    v = w
    for m in range(upto - 1, -1, -1):
        xm = c.xi[m]
        dv = v - xm
        u = dv * dv - 4.0 * c.delta[m]
        v = xm + _half_plane_sqrt(u, dv.real)
    return v


def inverse_points(
    c: ConformalChain, points: np.ndarray, upto: int | None = None
) -> np.ndarray:
    """Preimages of an array of points under the composed map."""
    if upto is None:
        upto = c.n_steps
    pts = np.array(points, dtype=complex)
    for m in range(upto - 1, -1, -1):
        _kernels.retreat_inplace(pts, c.xi[m], c.delta[m])
    return pts


def trace_block(c: ConformalChain, k0: int, k1: int) -> np.ndarray:
    """Trace points for time indices ``k0 < k <= k1`` (backward inverse pass)."""
    if c.sample is None:
        raise ValueError("chain was not built from a driving sample")
    values = c.sample.values
    w = values[k0 + 1 : k1 + 1].astype(complex)
    _kernels.trace_tips(c.xi, c.delta, w, k0)
    return w


def trace_points_at(c: ConformalChain, indices: np.ndarray) -> np.ndarray:
    """Trace points at selected step counts (sorted, all >= 1).

    Works for any chain: the tip after ``k`` steps is the preimage of the
    k-th step's own driving value, so no uniform sample is needed.
    """
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    if len(idx) == 0:
        return np.empty(0, dtype=complex)
    if idx[0] < 1 or np.any(np.diff(idx) < 0) or idx[-1] > c.n_steps:
        raise ValueError("indices must be sorted within [1, n_steps]")
    seeds = c.xi[idx - 1].astype(complex)
    _kernels.trace_tips_at(c.xi, c.delta, seeds, idx)
    return seeds


def trace(c: ConformalChain, upto: int | None = None) -> TracePolyline:
    """The curve traced by the chain: preimages of the driving values.

    ``points[k]`` is the tip of the hull after ``k`` steps; ``points[0]``
    is the (real) starting point.
    """
    if c.sample is None:
        raise ValueError("chain was not built from a driving sample")
    if upto is None:
        upto = c.n_steps
    pts = np.empty(upto + 1, dtype=complex)
    pts[0] = c.sample.values[0]
    block = 2000
    for k0 in range(0, upto, block):
        k1 = min(k0 + block, upto)
        pts[k0 + 1 : k1 + 1] = trace_block(c, k0, k1)
    return TracePolyline(pts, c.sample.t_step)


def evolve_real_point(c: ConformalChain, x: float, upto: int | None = None) -> np.ndarray:
    """Orbit of a real point under the discrete flow: value after k steps.

    Returns an array of length ``upto + 1`` with entry 0 equal to ``x``.
    Raises PointSwallowed if the point is absorbed along the way.
    """
    if upto is None:
        upto = c.n_steps
    out = np.empty(upto + 1)
    status = _kernels.real_orbit(c.xi[:upto], c.delta[:upto], float(x), out)
    if status:
        raise PointSwallowed(f"real point swallowed at step {status - 1}")
    return out


# ---------------------------------------------------------------------------
# welding (forward zipper)
# ---------------------------------------------------------------------------


def zip_polyline(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Absorb a simple curve one vertex per step with vertical slit maps.

    Returns the step arrays ``(xi, delta)``: at step ``m`` the remaining
    curve is pushed through the elementary map whose slit tip sits exactly
    on the image of vertex ``m``.  Raises CurveNotSimple when a vertex maps
    into the already-absorbed hull (nonpositive imaginary part).
    """
    pts = np.array(points, dtype=complex)
    n = len(pts) - 1
    xi = np.empty(n)
    delta = np.empty(n)
    bad = _kernels.zip_curve(pts, xi, delta)
    if bad:
        raise CurveNotSimple(f"vertex {bad} maps into the current hull")
    return xi, delta


def recover_chain(p: TracePolyline) -> ConformalChain:
    """Slit-map chain whose trace reproduces the polyline vertices."""
    if abs(p.points[0].imag) > 1e-9:
        raise NotACrosscutStart("polyline must start on the real axis")
    xi, delta = zip_polyline(p.points)
    return ConformalChain(xi=xi, delta=delta, total_time=float(np.sum(delta)))


def recover_driving(p: TracePolyline) -> DrivingSample:
    """Driving function of a simple polyline, in capacity parameterization.

    The zipper produces one (xi, delta) record per vertex; the driving
    value at the accumulated capacity time of each vertex is resampled to
    a uniform grid with the polyline's own t_step by linear interpolation.
    """
    if abs(p.points[0].imag) > 1e-9:
        raise NotACrosscutStart("polyline must start on the real axis")
    xi, delta = zip_polyline(p.points)
    v = np.concatenate(([0.0], np.cumsum(delta)))
    knots = np.concatenate(([p.points[0].real], xi))
    total = v[-1]
    n_out = max(1, round(total / p.t_step))
    grid = np.arange(n_out + 1) * p.t_step
    return DrivingSample(np.interp(grid, v, knots), p.t_step)


# ---------------------------------------------------------------------------
# capacity and footprint utilities
# ---------------------------------------------------------------------------


def is_swallowed(c: ConformalChain, x: float, upto: int | None = None) -> bool:
    """Whether the real point ``x`` is absorbed by the chain's hull."""
    try:
        evolve_real_point(c, x, upto)
    except PointSwallowed:
        return True
    return False


def hull_extents(c: ConformalChain, upto: int | None = None) -> HullExtents:
    """Real footprint [a, b] of the hull and its image interval [c, d].

    Found by bisecting the swallowing predicate on the real line; the
    image endpoints are evaluated just outside the footprint.
    """
    if upto is None:
        upto = c.n_steps
    if upto == 0:
        raise ValueError("empty chain has no footprint")
    t = c.time_of(upto)
    reach = 4.0 * math.sqrt(2.0 * t) + 1e-9
    inside = float(c.xi[0])
    lo = float(np.min(c.xi[:upto])) - reach
    hi = float(np.max(c.xi[:upto])) + reach

    def bisect(outside: float, inner: float) -> float:
        a, b = outside, inner
        for _ in range(80):
            mid = 0.5 * (a + b)
            if is_swallowed(c, mid, upto):
                b = mid
            else:
                a = mid
        return 0.5 * (a + b)

    a = bisect(lo, inside)
    b = bisect(hi, inside)
    eps = 1e-9 * (1.0 + abs(a) + abs(b))
    ca = jet_along_steps(c.xi[:upto], c.delta[:upto], a - eps, order=1)[0, 0]
    db = jet_along_steps(c.xi[:upto], c.delta[:upto], b + eps, order=1)[0, 0]
    return HullExtents(a=a, b=b, c=float(ca), d=float(db))


def hcap_small_hull_distortion_check(
    c: ConformalChain, small: ConformalChain, x0: float
) -> tuple[float, float]:
    """Compare hcap of the image of a small hull with the derivative rule.

    Returns ``(lhs, rhs)`` where lhs is the capacity of the image of
    ``small`` under ``c``'s map (via welding of the mapped trace) and
    rhs is ``f'(x0)^2 * hcap(small)``; the two converge as the small hull
    shrinks toward ``x0``.
    """
    if small.sample is None:
        raise ValueError("small chain must carry its driving sample")
    if c.n_steps == 0:
        tip_curve = trace(small).points
        image = tip_curve
        deriv = 1.0
    else:
        tip_curve = trace(small).points
        image = map_points(c, tip_curve)
        deriv = float(forward_map(c, x0).f1)
    image = np.asarray(image, dtype=complex)
    base = complex(image[0]).real
    poly = TracePolyline(np.concatenate(([base], image[1:])), small.sample.t_step)
    chain_img = recover_chain(poly)
    return chain_img.hcap(), deriv * deriv * small.hcap()
