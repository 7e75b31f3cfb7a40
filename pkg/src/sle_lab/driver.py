"""Stochastic inputs: radial (Bessel-type) paths, driver pairs, hulls, RNG.

A driver pair is built from one absorbed radial path: the gap between the
driving function ``xi`` and the tracked boundary point ``p`` is enforced
algebraically to be exactly ``sqrt(kappa)`` times the radial path, so the
identity ``xi - p = (-1)^j * Y`` holds at every sample index rather than
only up to integration error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import KappaOutOfRange, NeverAbsorbed, NeverExits, StepTooLarge
from .loewner import (
    ConformalChain,
    DrivingSample,
    TracePolyline,
    build_chain,
    recover_chain,
)

# dt guard: one-step moves must stay small relative to the starting gap
DT_GUARD_FACTOR = 100.0


def validate_kappa(kappa: float, for_reversibility: bool = False) -> float:
    if not kappa > 0:
        raise KappaOutOfRange(f"kappa must be positive, got {kappa}")
    if for_reversibility and kappa > 4:
        raise KappaOutOfRange(f"reversibility experiments need kappa <= 4, got {kappa}")
    return float(kappa)


def replica_rng(seed: int, replica: int, *key: int) -> np.random.Generator:
    """Independent stream keyed by (seed, replica) plus optional subkeys."""
    entropy = [int(seed), int(replica), *(int(k) for k in key)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


# ---------------------------------------------------------------------------
# hulls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HalfDisk:
    """Half-disk hull: {z in H : |z - center| < radius}."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def contains(self, z: complex) -> bool:
        return abs(z - self.center) < self.radius


@dataclass(frozen=True)
class HullPair:
    """Two disjoint half-disk hulls, one around each marked point."""

    h1: HalfDisk
    h2: HalfDisk

    def __post_init__(self):
        if not self.h1.center + self.h1.radius < self.h2.center - self.h2.radius:
            raise ValueError("hull closures must be disjoint")


def exit_index(points: np.ndarray, hull: HalfDisk) -> int:
    """First index at which the curve leaves the half-disk.

    Raises NeverExits when the path ends strictly inside.
    """
    d = np.abs(np.asarray(points) - hull.center)
    outside = d >= hull.radius
    if not outside.any():
        raise NeverExits("path ends inside the hull")
    return int(np.argmax(outside))


def exit_time(trace: TracePolyline, hull: HalfDisk) -> int:
    """Exit index of a trace that starts at the hull's center."""
    if abs(trace.points[0] - hull.center) >= hull.radius:
        raise ValueError("trace does not start inside the hull")
    return exit_index(trace.points, hull)


def halfdisk_capacity(radius: float, center: float = 0.0, n: int = 4096) -> float:
    """Half-plane capacity of a half-disk, via welding of a semicircle."""
    theta = np.linspace(np.pi, 0.0, n + 2)[:-1]
    pts = center + radius * np.exp(1j * theta)
    poly = TracePolyline(pts, t_step=1.0)
    return recover_chain(poly).hcap()


# ---------------------------------------------------------------------------
# radial paths and driver pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BesselPath:
    """Euler path of the radial process, truncated at absorption.

    ``x[k] > 0`` strictly before ``absorbed_at``; when absorbed the final
    entry is 0.  ``absorbed_at`` is None when the step budget ran out first.
    """

    dt: float
    x: np.ndarray
    absorbed_at: int | None

    @property
    def n_steps(self) -> int:
        return len(self.x) - 1


def simulate_bessel(
    kappa: float,
    x1: float,
    x2: float,
    dt: float,
    rng: np.random.Generator,
    max_steps: int,
    require_absorption: bool = False,
) -> BesselPath:
    """Euler-Maruyama path of dX = dB + (1 - 4/kappa)/X dt from (x2-x1)/sqrt(kappa).

    The path is truncated at the first step whose candidate value is <= 0
    (replaced by 0).  Raises StepTooLarge when dt exceeds the guard
    ``(x2-x1)^2 / 100`` and NeverAbsorbed when ``require_absorption`` is set
    and the budget runs out first.
    """
    validate_kappa(kappa)
    if not x1 < x2:
        raise ValueError("need x1 < x2")
    if dt > (x2 - x1) ** 2 / DT_GUARD_FACTOR:
        raise StepTooLarge(f"dt={dt} too large for gap {x2 - x1}")
    a = 1.0 - 4.0 / kappa
    sdt = math.sqrt(dt)
    x0 = (x2 - x1) / math.sqrt(kappa)

    if a == 0.0:
        # driftless case: vectorized in chunks
        vals = [np.array([x0])]
        level = x0
        done = 0
        while done < max_steps:
            m = min(8192, max_steps - done)
            w = level + sdt * np.cumsum(rng.standard_normal(m))
            hit = w <= 0.0
            if hit.any():
                k = int(np.argmax(hit))
                w = w[: k + 1].copy()
                w[-1] = 0.0
                vals.append(w)
                x = np.concatenate(vals)
                return BesselPath(dt, x, absorbed_at=len(x) - 1)
            vals.append(w)
            level = float(w[-1])
            done += m
        if require_absorption:
            raise NeverAbsorbed(f"no absorption within {max_steps} steps")
        return BesselPath(dt, np.concatenate(vals), absorbed_at=None)

    out = np.empty(max_steps + 1)
    v = x0
    k = 0
    while k < max_steps:
        m = min(8192, max_steps - k)
        g = rng.standard_normal(m)
        used, absorbed = _kernels.bessel_steps(v, a, dt, g, out[k:])
        k += used
        if absorbed:
            return BesselPath(dt, out[: k + 1].copy(), absorbed_at=k)
        v = float(out[k])
    if require_absorption:
        raise NeverAbsorbed(f"no absorption within {max_steps} steps")
    return BesselPath(dt, out.copy(), absorbed_at=None)


@dataclass(frozen=True)
class DriverPair:
    """Realized (xi, p) path for one side of the two-sided construction.

    Side ``j=1`` grows from ``x1`` toward ``x2`` (xi < p throughout); side
    ``j=2`` grows from ``x2`` toward ``x1`` (xi > p).  The exact identity
    ``xi[k] - p[k] = (-1)^j * sqrt(kappa) * x[k]`` holds at every index.
    """

    dt: float
    xi: np.ndarray
    p: np.ndarray
    j: int
    x1: float
    x2: float

    @property
    def n_steps(self) -> int:
        return len(self.xi) - 1

    def sample(self) -> DrivingSample:
        return DrivingSample(self.xi, self.dt)

    def to_csv(self, path) -> None:
        from .loewner import _fmt

        lines = ["t,xi,p"]
        for k in range(len(self.xi)):
            lines.append(f"{_fmt(k * self.dt)},{_fmt(self.xi[k])},{_fmt(self.p[k])}")
        from pathlib import Path as _P

        _P(path).write_text("\n".join(lines) + "\n")


def build_driver(
    path: BesselPath, j: int, kappa: float, x1: float, x2: float
) -> DriverPair:
    """Driver pair from an absorbed radial path.

    ``p`` advances by the exact one-step slit-map displacement of the
    tracked point, ``sqrt(y^2 + 4 dt) - y`` per step (the solution of
    dp = 2 dt / (p - xi) over one constant-driving step); the plain Euler
    increment ``2 dt / y`` blows up as the gap closes and scatters the
    final curve segments.  ``xi`` is then defined pointwise as
    ``p + (-1)^j * sqrt(kappa) * x`` so the gap identity is exact, and the
    chain built from ``xi`` keeps the tracked point on the slit-flow orbit
    of ``x_k``: the traced curve closes onto ``x_k`` at absorption.
    """
    if j not in (1, 2):
        raise ValueError("side index j must be 1 or 2")
    validate_kappa(kappa)
    y = math.sqrt(kappa) * path.x
    n = len(y) - 1
    sgn = -1.0 if j == 1 else 1.0
    xk = x2 if j == 1 else x1
    incr = np.zeros(n + 1)
    if n > 0:
        steps = np.sqrt(y[1 : n + 1] ** 2 + 4.0 * path.dt) - y[1 : n + 1]
        incr[1:] = np.concatenate(([0.0], np.cumsum(steps[:-1])))
    p = xk - sgn * incr
    xi = p + sgn * y
    return DriverPair(dt=path.dt, xi=xi, p=p, j=j, x1=x1, x2=x2)


def brownian_driver(
    kappa: float, dt: float, n_steps: int, rng: np.random.Generator, x0: float = 0.0
) -> DrivingSample:
    """Standard driver sqrt(kappa) * B sampled on a uniform grid."""
    validate_kappa(kappa)
    vals = np.empty(n_steps + 1)
    vals[0] = x0
    vals[1:] = x0 + math.sqrt(kappa * dt) * np.cumsum(rng.standard_normal(n_steps))
    return DrivingSample(vals, dt)


def completed_pair_chain(
    kappa: float,
    x1: float,
    x2: float,
    dt: float,
    rng: np.random.Generator,
    max_steps: int,
    j: int,
    refine_q: float = 0.04,
    gap_floor: float = 1e-15,
    max_refine_steps: int = 80000,
):
    """Chain of one driver-pair side run all the way to absorption.

    Uniform steps resolve the bulk of the curve; once the gap drops below
    a switch level the remaining endgame is re-simulated with capacity
    steps proportional to the squared gap (driving increments then stay a
    fixed fraction of the gap), which closes the curve onto the far point
    geometrically instead of scattering the final segments.  The last step
    places the slit exactly on the tracked point's orbit, so the traced
    curve terminates at the far point up to the resolved scale.

    Returns ``(chain, start, absorbed)`` where ``start`` is the curve's
    base point; ``absorbed`` is False when the uniform budget ran out with
    the gap still above the switch level.
    """
    if j not in (1, 2):
        raise ValueError("side index j must be 1 or 2")
    validate_kappa(kappa)
    path = simulate_bessel(kappa, x1, x2, dt, rng, max_steps)
    sk = math.sqrt(kappa)
    sgn = -1.0 if j == 1 else 1.0
    xk = x2 if j == 1 else x1
    start = x1 if j == 1 else x2
    y = sk * path.x
    y_switch = 8.0 * math.sqrt(kappa * dt)

    below = np.nonzero(y <= y_switch)[0]
    if len(below) == 0 or below[0] == 0:
        s_star = None if len(below) == 0 else int(below[0])
    else:
        s_star = int(below[0])
    if s_star is None:
        # never came near absorption within the budget
        pair = build_driver(path, j, kappa, x1, x2)
        chain = build_chain(pair.sample())
        return chain, start, False

    s_star = max(1, s_star)
    n_uni = s_star
    inc = np.sqrt(y[1 : n_uni + 1] ** 2 + 4.0 * dt) - y[1 : n_uni + 1]
    p = xk - sgn * np.concatenate(([0.0], np.cumsum(inc[:-1])))  # p_1..p_n
    xi_uni = p + sgn * y[1 : n_uni + 1]
    w = xk - sgn * float(np.sum(inc))  # orbit of xk after the uniform steps

    a = 1.0 - 4.0 / kappa
    x = float(path.x[n_uni])
    xi_ref = []
    dt_ref = []
    floor = max(gap_floor, 1e-16 * (abs(w) + abs(x2 - x1)))
    for _ in range(max_refine_steps):
        if sk * x <= floor:
            break
        dtk = min(dt, refine_q * x * x)
        x_new = x + math.sqrt(dtk) * rng.standard_normal() + a * dtk / x
        if x_new <= 0.0:
            x_new = 0.5 * floor / sk
        y_new = sk * x_new
        xi_k = w + sgn * y_new
        xi_ref.append(xi_k)
        dt_ref.append(dtk)
        w = xi_k - sgn * math.sqrt(y_new * y_new + 4.0 * dtk)
        x = x_new
    if sk * x > floor:
        raise NeverAbsorbed("endgame refinement did not reach the gap floor")
    # closing step: slit exactly on the tracked orbit
    dtk = min(dt, refine_q * max(x, floor / sk) ** 2)
    xi_ref.append(w)
    dt_ref.append(dtk)

    xi_all = np.concatenate((xi_uni, xi_ref))
    dl_all = np.concatenate((np.full(n_uni, dt), dt_ref))
    chain = ConformalChain(
        xi=xi_all, delta=dl_all, total_time=float(np.sum(dl_all))
    )
    return chain, start, True
