"""Two-time weight evaluation on realized chain pairs.

The kernel N is the product of the two image-map derivatives over the
squared image-point gap; the weight M combines a kernel ratio raised to a
kappa-dependent exponent with an exponential of the double integral of
2 N^2.  Both are normalized to 1 whenever either time is zero.  The patched
weight extends M continuously past the region where the two hulls may
collide by an alternating product over a staircase of exit-time rectangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .ensemble import EnsembleCoefficients, TwoChainConfig, coefficient_lattice
from .errors import KappaOutOfRange, NonPositiveGap, OutsideDomain


@dataclass(frozen=True)
class SleConstants:
    """kappa with the two derived exponents used by the weight."""

    kappa: float
    alpha: float
    lam: float


def constants(kappa: float) -> SleConstants:
    """Exponents alpha = (6-k)/(2k) and lambda = (8-3k)(6-k)/(2k)."""
    if not kappa > 0:
        raise KappaOutOfRange(f"kappa must be positive, got {kappa}")
    alpha = (6.0 - kappa) / (2.0 * kappa)
    lam = (8.0 - 3.0 * kappa) * (6.0 - kappa) / (2.0 * kappa)
    return SleConstants(kappa=float(kappa), alpha=alpha, lam=lam)


def kernel_value(c: EnsembleCoefficients) -> float:
    """Derivative product over squared gap; strictly positive."""
    n = c.a(1, 1) * c.a(2, 1) / (c.gap * c.gap)
    if not n > 0:
        raise NonPositiveGap(f"kernel value {n} <= 0")
    return float(n)


@dataclass(frozen=True)
class MartingaleGrid:
    """Kernel values and their cumulative double integral on a node lattice.

    ``n_vals[i, j]`` is the kernel at ``(t1_nodes[i], t2_nodes[j])``;
    ``integral[i, j]`` approximates the double integral of ``2 N^2`` over
    ``[0, t1_nodes[i]] x [0, t2_nodes[j]]`` by the trapezoid rule.  Node 0
    of each axis must be time 0 so the boundary rows are available.
    """

    t1_nodes: np.ndarray
    t2_nodes: np.ndarray
    n_vals: np.ndarray
    integral: np.ndarray

    def node_index(self, axis: int, t: float) -> int:
        nodes = self.t1_nodes if axis == 1 else self.t2_nodes
        i = int(np.searchsorted(nodes, t))
        for cand in (i - 1, i, i + 1):
            if 0 <= cand < len(nodes) and abs(nodes[cand] - t) <= 1e-12 * max(1.0, abs(t)):
                return cand
        raise OutsideDomain(f"time {t} is not a lattice node on axis {axis}")


def build_grid(
    t1_nodes: np.ndarray,
    t2_nodes: np.ndarray,
    a1: np.ndarray,
    a2: np.ndarray,
) -> MartingaleGrid:
    """Kernel grid from the two coefficient lattices of coefficient_lattice.

    Lattice entries left NaN by a staircase limit stay NaN in the kernel
    and contribute nothing to the cumulative integral; that is sound
    because the staircase region is down-closed, so the integral queried
    at any defined node never reaches an undefined cell.
    """
    t1_nodes = np.asarray(t1_nodes, dtype=float)
    t2_nodes = np.asarray(t2_nodes, dtype=float)
    if t1_nodes[0] != 0.0 or t2_nodes[0] != 0.0:
        raise ValueError("lattices must start at time 0")
    mask = np.isfinite(a1[:, :, 0]) & np.isfinite(a2[:, :, 0])
    gap = a2[:, :, 0] - a1[:, :, 0]
    if not np.all(gap[mask] > 0):
        raise NonPositiveGap("image-point gap must be positive on the lattice")
    with np.errstate(invalid="ignore"):
        n_vals = a1[:, :, 1] * a2[:, :, 1] / (gap * gap)
    if not np.all(n_vals[mask] > 0):
        raise NonPositiveGap("kernel must be positive on the lattice")
    f = np.where(mask, 2.0 * n_vals * n_vals, 0.0)
    inner = cumulative_trapezoid(f, t2_nodes, axis=1, initial=0.0)
    integral = cumulative_trapezoid(inner, t1_nodes, axis=0, initial=0.0)
    return MartingaleGrid(t1_nodes, t2_nodes, n_vals, integral)


def grid_from_config(
    cfg: TwoChainConfig, idx1: np.ndarray, idx2: np.ndarray
) -> MartingaleGrid:
    """Convenience: coefficient lattice plus kernel grid in one call."""
    a1, a2 = coefficient_lattice(cfg, idx1, idx2, order=1)
    dt1 = cfg.chain1.sample.t_step
    dt2 = cfg.chain2.sample.t_step
    return build_grid(np.asarray(idx1) * dt1, np.asarray(idx2) * dt2, a1, a2)


def weight_value(
    grid: MartingaleGrid, consts: SleConstants, t1: float, t2: float
) -> float:
    """The two-time weight at a lattice node; exactly 1 on the axes."""
    if t1 <= 0.0 or t2 <= 0.0:
        return 1.0
    if consts.alpha == 0.0 and consts.lam == 0.0:
        return 1.0
    i = grid.node_index(1, t1)
    j = grid.node_index(2, t2)
    n = grid.n_vals
    if not np.isfinite(n[i, j]):
        raise OutsideDomain(f"kernel undefined at ({t1}, {t2})")
    ratio = n[i, j] * n[0, 0] / (n[i, 0] * n[0, j])
    return float(ratio**consts.alpha * math.exp(-consts.lam * grid.integral[i, j]))


def weight_matrix(grid: MartingaleGrid, consts: SleConstants) -> np.ndarray:
    """Weight at every lattice node (rows follow t1_nodes)."""
    n = grid.n_vals
    ratio = n * n[0, 0] / np.outer(n[:, 0], n[0, :])
    m = ratio**consts.alpha * np.exp(-consts.lam * grid.integral)
    m[0, :] = 1.0
    m[:, 0] = 1.0
    return m


def integral_identity(
    cfg: TwoChainConfig, stride: int = 1
) -> tuple[float, float]:
    """Both sides of the jet-vs-quadrature identity at the config times.

    Returns ``(lhs, rhs)`` where lhs is built from the second and third
    derivative ratios of side 1's image map at (t1, t2) and rhs is the
    trapezoid value of the kernel-squared integral over the second time.
    The two are computed along independent routes (jets vs welded grids).
    """
    idx2 = np.unique(np.concatenate((np.arange(0, cfg.t2, stride), [cfg.t2])))
    a1, a2 = coefficient_lattice(cfg, np.array([cfg.t1]), idx2, order=3)
    c1 = a1[0, -1, 1]
    c2 = a1[0, -1, 2]
    c3 = a1[0, -1, 3]
    lhs = 0.25 * (c2 / c1) ** 2 - (c3 / c1) / 6.0
    gap = a2[0, :, 0] - a1[0, :, 0]
    if not np.all(gap > 0):
        raise NonPositiveGap("gap must stay positive along the integration column")
    n_vals = a1[0, :, 1] * a2[0, :, 1] / (gap * gap)
    dt2 = cfg.chain2.sample.t_step
    rhs = float(np.trapezoid(2.0 * n_vals * n_vals, idx2 * dt2))
    return float(lhs), rhs


# ---------------------------------------------------------------------------
# patched weight past hull collision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RectangleOrder:
    """Maximal stopping-time rectangles sorted into a staircase.

    ``selected`` are the indices (into the input pairs) whose rectangles
    already cover the union of all rectangles, dominated pairs and exact
    duplicates removed with a minimal-index preference; ``t1_sorted`` /
    ``t2_sorted`` carry the selected corner coordinates with the sentinel
    entries ``t1[0]=0, t1[-1]=inf`` and ``t2[0]=inf, t2[-1]=0`` appended.
    """

    pairs: np.ndarray
    selected: tuple[int, ...]
    t1_sorted: np.ndarray
    t2_sorted: np.ndarray

    @property
    def size(self) -> int:
        return len(self.selected)


def rectangle_order(pairs: np.ndarray) -> RectangleOrder:
    """Select the maximal rectangles and order them by increasing first time."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(pairs) == 0 or not np.all(pairs > 0):
        raise ValueError("need at least one pair of positive stopping values")
    order = sorted(range(len(pairs)), key=lambda m: (-pairs[m, 0], -pairs[m, 1], m))
    selected: list[int] = []
    best_t2 = -np.inf
    for m in order:
        if pairs[m, 1] > best_t2:
            selected.append(m)
            best_t2 = pairs[m, 1]
    selected.sort(key=lambda m: pairs[m, 0])
    t1 = np.concatenate(([0.0], pairs[selected, 0], [np.inf]))
    t2 = np.concatenate(([np.inf], pairs[selected, 1], [0.0]))
    return RectangleOrder(
        pairs=pairs, selected=tuple(selected), t1_sorted=t1, t2_sorted=t2
    )


def patched_weight(
    order: RectangleOrder,
    m_eval: Callable[[float, float], float],
    t1: float,
    t2: float,
) -> float:
    """Evaluate the patched weight at ``(t1, t2)`` in ``[0, inf]^2``.

    Inside the staircase region the plain weight is returned; beyond it the
    alternating product over the staircase corners is used.  ``m_eval``
    must return 1 whenever either argument is 0 and is only ever called
    with both arguments inside the covered region.
    """
    t1s = order.t1_sorted
    t2s = order.t2_sorted
    ns = order.size
    k1 = int(np.searchsorted(t1s, t1, side="left"))
    k1 = max(1, min(k1, ns + 1))
    if not (t1s[k1 - 1] <= t1 <= t1s[k1]):
        raise OutsideDomain(f"t1={t1} has no bracketing staircase cell")
    k2 = None
    for cand in range(ns, -1, -1):
        if t2s[cand + 1] <= t2 <= t2s[cand]:
            k2 = cand
            break
    if k2 is None:
        raise OutsideDomain(f"t2={t2} has no bracketing staircase cell")
    if k1 <= k2:
        return m_eval(t1, t2)
    num = m_eval(t1s[k2], t2)
    for k in range(k2 + 1, k1):
        num *= m_eval(t1s[k], t2s[k])
    num *= m_eval(t1, t2s[k1])
    den = 1.0
    for k in range(k2, k1):
        den *= m_eval(t1s[k], t2s[k + 1])
    return num / den


def write_weight_grid(
    path: str | Path,
    grid: MartingaleGrid,
    consts: SleConstants,
) -> None:
    """CSV dump (t1, t2, N, M) plus a JSON sidecar with the run constants."""
    from .loewner import _fmt

    m = weight_matrix(grid, consts)
    lines = ["t1,t2,N,M"]
    for i, t1 in enumerate(grid.t1_nodes):
        for j, t2 in enumerate(grid.t2_nodes):
            lines.append(
                ",".join(
                    (_fmt(t1), _fmt(t2), _fmt(grid.n_vals[i, j]), _fmt(m[i, j]))
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")
