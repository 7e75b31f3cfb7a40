"""Two disjoint chains growing in the same half-plane.

Everything here is built from one primitive: push the traced curve of one
chain through the composed map of the other, weld the image polyline back
into a slit-map chain, and read capacities, drivings, and derivative jets
off that image chain.  The derivative jets of the image maps at the two
driving points are the coefficients every downstream weight formula
consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CurveNotSimple, DomainCollision, NonPositiveGap, PointSwallowed
from .geometry import point_min_distance
from .loewner import (
    ConformalChain,
    DrivingSample,
    TracePolyline,
    advance_points,
    build_chain,
    forward_map,
    jet_along_steps,
    map_points,
    trace,
    zip_polyline,
)

# Configurations whose traces come closer than this are rejected as outside
# the disjoint-growth domain; the continuum domain is open, numerics need a
# quantitative margin.
TOL_COLLIDE = 1e-3
# Gap values at or below this signal numerical breakdown near collision.
TOL_GAP = 1e-12


@dataclass(frozen=True)
class TwoChainConfig:
    """Two realized chains with their traces, frozen at times (t1, t2).

    ``t1`` and ``t2`` are step indices into the respective chains; the
    traces must extend at least that far.
    """

    chain1: ConformalChain
    chain2: ConformalChain
    trace1: TracePolyline
    trace2: TracePolyline
    t1: int
    t2: int

    def __post_init__(self):
        if not (0 <= self.t1 < len(self.trace1.points)):
            raise ValueError("t1 outside trace1")
        if not (0 <= self.t2 < len(self.trace2.points)):
            raise ValueError("t2 outside trace2")

    def driving_value(self, j: int, idx: int | None = None) -> float:
        chain = self.chain1 if j == 1 else self.chain2
        if idx is None:
            idx = self.t1 if j == 1 else self.t2
        return float(chain.sample.values[idx])

    def check_disjoint(self, tol: float = TOL_COLLIDE) -> float:
        """Minimum distance between the two frozen traces; raises on contact."""
        d = point_min_distance(
            self.trace1.points[: self.t1 + 1], self.trace2.points[: self.t2 + 1]
        )
        if d < tol:
            raise DomainCollision(f"traces come within {d:.3g} < {tol:.3g}")
        return d


def two_chain_config(
    sample1: DrivingSample,
    sample2: DrivingSample,
    t1: int,
    t2: int,
    tol_collide: float | None = TOL_COLLIDE,
) -> TwoChainConfig:
    """Build chains and traces from two driving samples and freeze times."""
    c1 = build_chain(sample1)
    c2 = build_chain(sample2)
    cfg = TwoChainConfig(c1, c2, trace(c1), trace(c2), t1, t2)
    if tol_collide is not None:
        cfg.check_disjoint(tol_collide)
    return cfg


@dataclass(frozen=True)
class ImageChain:
    """One chain seen through the other side's map at a frozen time.

    ``chain`` is the welded slit-map chain of the image hull; ``v[k]`` is
    its accumulated capacity time after absorbing image vertex ``k`` (the
    time change between the original and image parameterizations), and
    ``eta`` is the image driving function resampled on a uniform grid of
    the image capacity time.  ``eta_knots[k]`` is the exact image driving
    value at ``v[k]``.
    """

    base: int
    at: int
    chain: ConformalChain
    v: np.ndarray
    eta: DrivingSample
    eta_knots: np.ndarray


def image_chain(cfg: TwoChainConfig, j: int) -> ImageChain:
    """Image of side ``j``'s hull under the other side's frozen map."""
    if j not in (1, 2):
        raise ValueError("side index j must be 1 or 2")
    k = 3 - j
    t_j = cfg.t1 if j == 1 else cfg.t2
    t_k = cfg.t2 if j == 1 else cfg.t1
    chain_k = cfg.chain2 if j == 1 else cfg.chain1
    trace_j = cfg.trace1 if j == 1 else cfg.trace2
    pts = trace_j.points[: t_j + 1]
    try:
        mapped = map_points(chain_k, pts, upto=t_k)
        xi, delta = zip_polyline(mapped)
    except (CurveNotSimple, PointSwallowed) as exc:
        raise DomainCollision(f"image of side {j} hit side {k}'s hull: {exc}") from exc
    v = np.concatenate(([0.0], np.cumsum(delta)))
    knots = np.concatenate(([mapped[0].real], xi))
    t_step = trace_j.t_step
    n_out = max(1, round(v[-1] / t_step)) if v[-1] > 0 else 1
    grid = np.arange(n_out + 1) * t_step
    eta = DrivingSample(np.interp(grid, v, knots), t_step)
    img = ConformalChain(xi=xi, delta=delta, total_time=float(v[-1]))
    return ImageChain(base=j, at=t_k, chain=img, v=v, eta=eta, eta_knots=knots)


@dataclass(frozen=True)
class EnsembleCoefficients:
    """Jets of the two image maps at the two driving points.

    ``jets[j-1, h]`` is the h-th z-derivative (h=0 is the value) of side
    j's opposite-image map at side j's driving point; ``gap`` is the
    difference of the two image points and is strictly positive on valid
    configurations.
    """

    jets: np.ndarray
    gap: float

    def __post_init__(self):
        jets = np.asarray(self.jets, dtype=float)
        if jets.shape != (2, 4):
            raise ValueError("jets must have shape (2, 4)")
        jets.setflags(write=False)
        object.__setattr__(self, "jets", jets)
        if not self.gap > 0:
            raise NonPositiveGap(f"gap {self.gap} <= 0")
        if not (jets[0, 1] > 0 and jets[1, 1] > 0):
            raise NonPositiveGap("first derivatives must be positive")

    def a(self, j: int, h: int) -> float:
        return float(self.jets[j - 1, h])


def coefficients(cfg: TwoChainConfig, tol_gap: float = TOL_GAP) -> EnsembleCoefficients:
    """Image-map jets of both sides at the frozen configuration times."""
    img2 = image_chain(cfg, 2)  # side 2 seen through side 1's map
    img1 = image_chain(cfg, 1)  # side 1 seen through side 2's map
    try:
        row1 = jet_along_steps(
            img2.chain.xi, img2.chain.delta, cfg.driving_value(1)
        )[0]
        row2 = jet_along_steps(
            img1.chain.xi, img1.chain.delta, cfg.driving_value(2)
        )[0]
    except PointSwallowed as exc:
        raise DomainCollision(f"driving point inside image hull: {exc}") from exc
    gap = row2[0] - row1[0]
    if not gap > tol_gap:
        raise NonPositiveGap(f"image-point gap {gap} <= {tol_gap}")
    return EnsembleCoefficients(jets=np.stack([row1, row2]), gap=float(gap))


def coefficient_lattice(
    cfg: TwoChainConfig,
    idx1: np.ndarray,
    idx2: np.ndarray,
    order: int = 1,
    limit1: np.ndarray | None = None,
    limit2: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Image-map jets on a lattice of time indices.

    Returns ``(A1, A2)``, each of shape ``(len(idx1), len(idx2), 4)``:
    ``A1[r, c]`` are the jets of side 1's opposite-image map frozen at
    ``idx1[r]`` steps, after ``idx2[c]`` image steps, evaluated at side 1's
    driving value; ``A2`` the mirror quantity.  ``order=1`` propagates only
    the value and first derivative (enough for the kernel grid).

    ``limit1[r]`` (optional) caps the opposite index reached from
    ``idx1[r]`` — entries beyond it stay NaN; ``limit2`` mirrors this for
    the second pass.  This lets a caller restrict the lattice to a
    staircase region inside which the two chains are known to be disjoint.

    The passes are incremental: as the frozen side advances, the other
    side's curve is pushed through only the new elementary maps, and one
    welding per node yields all opposite-time prefixes at once.
    """
    idx1 = np.asarray(idx1, dtype=int)
    idx2 = np.asarray(idx2, dtype=int)
    for idx, bound, name in (
        (idx1, cfg.t1, "idx1"),
        (idx2, cfg.t2, "idx2"),
    ):
        if len(idx) == 0 or idx[0] < 0 or np.any(np.diff(idx) <= 0) or idx[-1] > bound:
            raise ValueError(f"{name} must be strictly increasing within the config range")

    a1 = _lattice_pass(
        cfg.chain1, cfg.trace2, cfg.chain1.sample.values, idx1, idx2, order, limit1
    )
    a2 = _lattice_pass(
        cfg.chain2, cfg.trace1, cfg.chain2.sample.values, idx2, idx1, order, limit2
    )
    return a1, a2.transpose(1, 0, 2)


def _lattice_pass(
    chain_frozen: ConformalChain,
    trace_other: TracePolyline,
    frozen_values: np.ndarray,
    idx_frozen: np.ndarray,
    idx_other: np.ndarray,
    order: int,
    limits: np.ndarray | None,
) -> np.ndarray:
    out = np.full((len(idx_frozen), len(idx_other), 4), np.nan)
    pts = trace_other.points[: idx_other[-1] + 1].astype(complex)
    pos = 0
    try:
        for r, s in enumerate(idx_frozen):
            while pos < s:
                pts = advance_points(pts, chain_frozen.xi[pos], chain_frozen.delta[pos])
                pos += 1
            lim = int(idx_other[-1]) if limits is None else int(limits[r])
            cols = int(np.searchsorted(idx_other, lim, side="right"))
            if cols == 0:
                continue
            if lim > 0:
                xi_z, delta_z = zip_polyline(pts[: lim + 1])
            else:
                xi_z = np.empty(0)
                delta_z = np.empty(0)
            out[r, :cols] = jet_along_steps(
                xi_z,
                delta_z,
                float(frozen_values[s]),
                record_at=idx_other[:cols],
                order=order,
            )
    except (CurveNotSimple, PointSwallowed) as exc:
        raise DomainCollision(str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# differential identity checks
# ---------------------------------------------------------------------------


def check_lemma_derivatives(
    cfg: TwoChainConfig, dt_probe: float, j: int = 1
) -> dict[str, float]:
    """Finite-difference check of the two base-time derivative identities.

    The image map of the opposite side is rebuilt with the base time
    advanced by ``dt_probe`` (a whole number of steps), evaluated at the
    frozen driving point, and the one-sided differences are compared with
    the second- and third-derivative expressions they should equal.
    Returns the relative residuals (first order in ``dt_probe``).
    """
    k = 3 - j
    chain_j = cfg.chain1 if j == 1 else cfg.chain2
    t_j = cfg.t1 if j == 1 else cfg.t2
    dt = chain_j.sample.t_step
    probe = max(1, round(dt_probe / dt))
    dt_probe = probe * dt
    trace_len = len((cfg.trace1 if j == 1 else cfg.trace2).points)
    if t_j + probe >= trace_len:
        raise ValueError("probe extends past the available trace")

    base = coefficients(cfg)
    f, f1, f2, f3 = base.jets[j - 1]
    w = cfg.driving_value(j)

    cfg_plus = TwoChainConfig(
        cfg.chain1,
        cfg.chain2,
        cfg.trace1,
        cfg.trace2,
        cfg.t1 + probe if j == 1 else cfg.t1,
        cfg.t2 + probe if j == 2 else cfg.t2,
    )
    img_plus = image_chain(cfg_plus, k)
    plus = jet_along_steps(img_plus.chain.xi, img_plus.chain.delta, w)[0]

    fd0 = (plus[0] - f) / dt_probe
    target0 = -3.0 * f2
    res0 = abs(fd0 - target0) / max(abs(target0), 1e-30)

    fd1 = (plus[1] - f1) / dt_probe
    target1 = 0.5 * f2 * f2 / f1 - (4.0 / 3.0) * f3
    res1 = abs(fd1 - target1) / max(abs(target1), 1e-30)
    return {
        "value_residual": float(res0),
        "derivative_residual": float(res1),
        "dt_probe": dt_probe,
    }


def check_flow_identities(
    cfg: TwoChainConfig, z: complex, dt_probe: float, j: int = 1
) -> dict[str, float]:
    """Relative residuals of the four image-flow derivative identities.

    Forward differences in side ``j``'s own time of the image map (and of
    its log-derivative, second-derivative ratio, and that ratio's
    z-derivative) at an interior point ``z`` are compared against the
    closed-form right-hand sides built from the frozen coefficients.
    """
    chain_j = cfg.chain1 if j == 1 else cfg.chain2
    t_j = cfg.t1 if j == 1 else cfg.t2
    dt = chain_j.sample.t_step
    probe = max(1, round(dt_probe / dt))
    dt_probe = probe * dt
    trace_len = len((cfg.trace1 if j == 1 else cfg.trace2).points)
    if t_j + probe >= trace_len:
        raise ValueError("probe extends past the available trace")

    cfg_ext = TwoChainConfig(
        cfg.chain1,
        cfg.chain2,
        cfg.trace1,
        cfg.trace2,
        cfg.t1 + probe if j == 1 else cfg.t1,
        cfg.t2 + probe if j == 2 else cfg.t2,
    )
    img = image_chain(cfg_ext, j)
    j0 = forward_map(img.chain, z, upto=t_j)
    j1 = forward_map(img.chain, z, upto=t_j + probe)

    co = coefficients(cfg)
    a0 = co.a(j, 0)
    a1 = co.a(j, 1)

    def rel(fd: complex, rhs: complex) -> float:
        return float(abs(fd - rhs) / max(abs(rhs), 1e-30))

    denom = j0.f - a0
    fd_value = (j1.f - j0.f) / dt_probe
    rhs_value = 2.0 * a1 * a1 / denom

    import cmath

    fd_logder = cmath.log(j1.f1 / j0.f1) / dt_probe
    rhs_logder = -2.0 * a1 * a1 / denom**2

    fd_ratio = (j1.f2 / j1.f1 - j0.f2 / j0.f1) / dt_probe
    rhs_ratio = 4.0 * a1 * a1 * j0.f1 / denom**3

    dz_ratio0 = j0.f3 / j0.f1 - (j0.f2 / j0.f1) ** 2
    dz_ratio1 = j1.f3 / j1.f1 - (j1.f2 / j1.f1) ** 2
    fd_dzratio = (dz_ratio1 - dz_ratio0) / dt_probe
    rhs_dzratio = (
        4.0 * a1 * a1 * j0.f2 / denom**3 - 12.0 * a1 * a1 * j0.f1**2 / denom**4
    )

    return {
        "flow_value": rel(fd_value, rhs_value),
        "flow_logderiv": rel(fd_logder, rhs_logder),
        "flow_ratio": rel(fd_ratio, rhs_ratio),
        "flow_ratio_dz": rel(fd_dzratio, rhs_dzratio),
        "dt_probe": dt_probe,
    }


def commutation_residual(cfg: TwoChainConfig, points: np.ndarray) -> float:
    """Max deviation between the two evaluation orders of the joint map."""
    img2 = image_chain(cfg, 2)
    img1 = image_chain(cfg, 1)
    via1 = map_points(img2.chain, map_points(cfg.chain1, points, upto=cfg.t1))
    via2 = map_points(img1.chain, map_points(cfg.chain2, points, upto=cfg.t2))
    return float(np.max(np.abs(via1 - via2)))


def write_coefficient_grid(
    path: str | Path,
    t1_times: np.ndarray,
    t2_times: np.ndarray,
    a1: np.ndarray,
    a2: np.ndarray,
) -> None:
    """CSV dump of a coefficient lattice (one row per (t1, t2) node)."""
    from .loewner import _fmt

    lines = ["t1,t2,A10,A11,A12,A13,A20,A21,A22,A23,E"]
    for r, t1 in enumerate(t1_times):
        for c, t2 in enumerate(t2_times):
            row = [_fmt(t1), _fmt(t2)]
            row += [_fmt(v) for v in a1[r, c]]
            row += [_fmt(v) for v in a2[r, c]]
            row.append(_fmt(a2[r, c, 0] - a1[r, c, 0]))
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
