"""Monte Carlo experiments over the two-sided growth construction.

Every experiment is a mean (or two-sample comparison) over independent
replicas; each replica draws from its own RNG stream keyed by
``(seed, replica, role)`` so runs are reproducible bit-for-bit regardless
of worker count.  Replicas that cannot be evaluated (chains touched, a
path ended too early, a step guard fired) are rejected and counted; gates
are plain 3-standard-error tests, or a two-sample KS test for continuous
observables.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .driver import (
    HalfDisk,
    HullPair,
    build_driver,
    completed_pair_chain,
    exit_index,
    replica_rng,
    simulate_bessel,
    validate_kappa,
)
from .ensemble import TOL_COLLIDE, TwoChainConfig
from .errors import (
    CurveNotSimple,
    DomainCollision,
    InsufficientSamples,
    NeverAbsorbed,
    NeverExits,
    NonPositiveGap,
    OutsideDomain,
    PointSwallowed,
    StepTooLarge,
)
from .geometry import encloses
from .loewner import (
    DrivingSample,
    build_chain,
    evolve_real_point,
    inverse_points,
    trace,
    trace_block,
    trace_points_at,
)
from .martingale import (
    SleConstants,
    build_grid,
    constants,
    patched_weight,
    rectangle_order,
    weight_value,
)
from .ensemble import coefficient_lattice

REJECT_KEYS = ("accepted", "collision", "never_exits", "guard")


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs shared by the Monte Carlo experiments."""

    kappa: float
    n_samples: int
    seed: int
    x1: float = 0.0
    x2: float = 1.0
    hulls: HullPair | None = None
    dt: float = 1e-4
    t2_bar_rule: str = "exit_min_q"  # "exit", "exit_min_q", or "zero"
    q: float = 0.02
    observables: tuple[str, ...] = ()
    horizon_factor: float = 4.0
    lattice_nodes: int = 9
    tol_collide: float = TOL_COLLIDE
    workers: int = 1

    def resolved_hulls(self) -> HullPair:
        if self.hulls is not None:
            return self.hulls
        r = 0.3 * (self.x2 - self.x1)
        return HullPair(HalfDisk(self.x1, r), HalfDisk(self.x2, r))

    def resolved_observables(self) -> tuple[str, ...]:
        if self.observables:
            return self.observables
        span = self.x2 - self.x1
        mid = 0.5 * (self.x1 + self.x2)
        pts = (
            complex(mid, 0.3 * span),
            complex(self.x1 + 0.15 * span, 0.45 * span),
            complex(self.x1 + 0.85 * span, 0.45 * span),
        )
        names = tuple(f"enclosed@{p.real:g}{p.imag:+g}j" for p in pts)
        return names + ("max_im", "min_re", "max_re")


def config_dict(cfg: ExperimentConfig) -> dict:
    hulls = cfg.resolved_hulls()
    return {
        "kappa": cfg.kappa,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "x1": cfg.x1,
        "x2": cfg.x2,
        "hulls": {
            "h1": {"center": hulls.h1.center, "radius": hulls.h1.radius},
            "h2": {"center": hulls.h2.center, "radius": hulls.h2.radius},
        },
        "dt": cfg.dt,
        "t2_bar_rule": cfg.t2_bar_rule,
        "q": cfg.q,
        "observables": list(cfg.resolved_observables()),
        "horizon_factor": cfg.horizon_factor,
        "lattice_nodes": cfg.lattice_nodes,
        "tol_collide": cfg.tol_collide,
        "workers": cfg.workers,
    }


@dataclass(frozen=True)
class McReport:
    """One experiment's verdict: estimate, spread, gate decision, rejects."""

    experiment: str
    estimate: float
    std_error: float
    n: int
    z_score: float
    passed: bool
    rejects: dict
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "experiment": self.experiment,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n": self.n,
            "z_score": self.z_score,
            "pass": self.passed,
            "rejects": dict(self.rejects),
            "metadata": self.metadata,
        }


def _classify(exc: Exception) -> str:
    if isinstance(exc, (DomainCollision, PointSwallowed, NonPositiveGap, CurveNotSimple)):
        return "collision"
    if isinstance(exc, (NeverExits, NeverAbsorbed)):
        return "never_exits"
    if isinstance(exc, (StepTooLarge, OutsideDomain)):
        return "guard"
    raise exc


def _map_replicas(n: int, fn: Callable[[int], object], workers: int) -> list:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunk = max(1, n // (workers * 8))
            return list(ex.map(fn, range(n), chunksize=chunk))
    return [fn(i) for i in range(n)]


def _reduce_counts(statuses: Sequence[str], n_total: int) -> dict:
    counts = {k: 0 for k in REJECT_KEYS}
    for s in statuses:
        counts[s] += 1
    if sum(counts.values()) != n_total:
        raise RuntimeError("replica accounting mismatch")
    rejected = n_total - counts["accepted"]
    if rejected > 0.2 * n_total:
        raise InsufficientSamples(
            f"{rejected}/{n_total} replicas rejected: {counts}"
        )
    return counts


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if len(values) > 1:
        se = float(np.std(values, ddof=1) / math.sqrt(len(values)))
    else:
        se = 0.0
    return mean, se


def _z_against(mean: float, target: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if mean == target else math.inf
    return (mean - target) / se


def _budget_steps(radius: float, dt: float) -> int:
    # a curve confined to a half-disk of radius r has capacity at most r^2,
    # so it must exit within r^2 / (2 dt) steps
    return math.ceil(radius * radius / (2.0 * dt)) + 4


def _side_pair(cfg: ExperimentConfig, rng, j: int, max_steps: int):
    path = simulate_bessel(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, rng, max_steps)
    return build_driver(path, j, cfg.kappa, cfg.x1, cfg.x2)


def _axis_nodes(stop_idx: int, target: int) -> np.ndarray:
    if stop_idx <= 0:
        return np.array([0])
    k = min(target, stop_idx + 1)
    return np.unique(np.round(np.linspace(0, stop_idx, k)).astype(int))


def _stopped_side2(cfg: ExperimentConfig, rng) -> tuple:
    """Simulate side 2 and apply the configured stopping rule.

    Returns ``(chain2, trace2, i2)`` where ``i2`` is the stopped index.
    """
    h2 = cfg.resolved_hulls().h2
    q_idx = max(0, round(cfg.q / cfg.dt))
    cap = _budget_steps(h2.radius, cfg.dt)
    if cfg.t2_bar_rule == "zero":
        n2 = 1
    elif cfg.t2_bar_rule == "exit":
        n2 = cap
    elif cfg.t2_bar_rule == "exit_min_q":
        n2 = min(cap, max(q_idx, 1))
    else:
        raise ValueError(f"unknown t2_bar_rule {cfg.t2_bar_rule!r}")
    pair2 = _side_pair(cfg, rng, 2, n2)
    chain2 = build_chain(pair2.sample())
    tr2 = trace(chain2)
    if cfg.t2_bar_rule == "zero":
        return chain2, tr2, 0
    try:
        e2 = exit_index(tr2.points, h2)
    except NeverExits:
        e2 = None
    if cfg.t2_bar_rule == "exit":
        if e2 is None:
            raise NeverExits("side 2 absorbed before exiting its hull")
        return chain2, tr2, e2
    if e2 is not None:
        return chain2, tr2, min(e2, q_idx)
    if pair2.n_steps >= q_idx:
        return chain2, tr2, q_idx
    raise NeverExits("side 2 absorbed before the fixed stopping time")


def _stopped_side1(cfg: ExperimentConfig, rng) -> tuple:
    h1 = cfg.resolved_hulls().h1
    pair1 = _side_pair(cfg, rng, 1, _budget_steps(h1.radius, cfg.dt))
    chain1 = build_chain(pair1.sample())
    tr1 = trace(chain1)
    i1 = exit_index(tr1.points, h1)
    return chain1, tr1, i1


# ---------------------------------------------------------------------------
# martingale mean check
# ---------------------------------------------------------------------------


def _weight_at_stop(
    cfg: ExperimentConfig, consts: SleConstants, chain1, tr1, i1, chain2, tr2, i2
) -> float:
    pair_cfg = TwoChainConfig(chain1, chain2, tr1, tr2, i1, i2)
    pair_cfg.check_disjoint(cfg.tol_collide)
    if consts.alpha == 0.0 and consts.lam == 0.0:
        return 1.0
    idx1 = _axis_nodes(i1, cfg.lattice_nodes)
    idx2 = _axis_nodes(i2, cfg.lattice_nodes)
    a1, a2 = coefficient_lattice(pair_cfg, idx1, idx2, order=1)
    grid = build_grid(idx1 * cfg.dt, idx2 * cfg.dt, a1, a2)
    return weight_value(grid, consts, i1 * cfg.dt, i2 * cfg.dt)


def _martingale_replica(cfg: ExperimentConfig, consts: SleConstants, idx: int):
    try:
        chain1, tr1, i1 = _stopped_side1(cfg, replica_rng(cfg.seed, idx, 1))
        chain2, tr2, i2 = _stopped_side2(cfg, replica_rng(cfg.seed, idx, 2))
        w = _weight_at_stop(cfg, consts, chain1, tr1, i1, chain2, tr2, i2)
        return ("accepted", w)
    except Exception as exc:  # noqa: BLE001 - classified below
        return (_classify(exc), math.nan)


def run_martingale_check(cfg: ExperimentConfig) -> McReport:
    """Mean of the stopped two-time weight against its initial value 1."""
    consts = constants(cfg.kappa)
    out = _map_replicas(
        cfg.n_samples, partial(_martingale_replica, cfg, consts), cfg.workers
    )
    counts = _reduce_counts([s for s, _ in out], cfg.n_samples)
    vals = np.array([v for s, v in out if s == "accepted"])
    mean, se = _mean_se(vals)
    z = _z_against(mean, 1.0, se)
    return McReport(
        experiment="martingale",
        estimate=mean,
        std_error=se,
        n=len(vals),
        z_score=z,
        passed=abs(z) <= 3.0,
        rejects=counts,
        metadata={"config": config_dict(cfg), "target": 1.0},
    )


# ---------------------------------------------------------------------------
# patched-weight mean check
# ---------------------------------------------------------------------------


def default_hull_pair_list(cfg: ExperimentConfig) -> list[HullPair]:
    """Two per-side-nested pairs whose exit rectangles overlap crosswise."""
    base = cfg.resolved_hulls()
    r1, r2 = base.h1.radius, base.h2.radius
    return [
        HullPair(HalfDisk(cfg.x1, r1), HalfDisk(cfg.x2, 0.5 * r2)),
        HullPair(HalfDisk(cfg.x1, 0.5 * r1), HalfDisk(cfg.x2, r2)),
    ]


def _staircase_limits(
    ro, idx1: np.ndarray, idx2: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node opposite-axis caps implied by the staircase region."""
    t1s = ro.t1_sorted
    t2s = ro.t2_sorted

    def bound2(t1: float) -> float:
        k = int(np.searchsorted(t1s, t1, side="left"))
        k = max(1, min(k, ro.size))
        if t1 > t1s[ro.size]:
            return 0.0
        return t2s[k]

    def bound1(t2: float) -> float:
        for k in range(ro.size, 0, -1):
            if t2s[k] >= t2:
                return t1s[k]
        return 0.0

    lim1 = np.array([round(bound2(t * dt) / dt) for t in idx1], dtype=int)
    lim2 = np.array([round(bound1(t * dt) / dt) for t in idx2], dtype=int)
    lim1 = np.minimum(lim1, idx2[-1])
    lim2 = np.minimum(lim2, idx1[-1])
    return lim1, lim2


def _mstar_replica(
    cfg: ExperimentConfig, consts: SleConstants, pairs: tuple[HullPair, ...], idx: int
):
    try:
        dt = cfg.dt
        rng1 = replica_rng(cfg.seed, idx, 1)
        rng2 = replica_rng(cfg.seed, idx, 2)
        q_idx = max(1, round(cfg.q / dt))

        b1 = max(_budget_steps(p.h1.radius, dt) for p in pairs)
        pair1 = _side_pair(cfg, rng1, 1, b1)
        chain1 = build_chain(pair1.sample())
        tr1 = trace(chain1)
        exits1 = [exit_index(tr1.points, p.h1) for p in pairs]

        b2 = max(_budget_steps(p.h2.radius, dt) for p in pairs)
        pair2 = _side_pair(cfg, rng2, 2, b2)
        chain2 = build_chain(pair2.sample())
        tr2 = trace(chain2)
        exits2 = [exit_index(tr2.points, p.h2) for p in pairs]

        t1_stop = max(exits1)
        t2_bar = min(max(exits2), q_idx)

        ro = rectangle_order(
            np.column_stack((np.array(exits1) * dt, np.array(exits2) * dt))
        )
        hi1 = max(t1_stop, max(exits1))
        hi2 = max(t2_bar, max(exits2))
        idx1 = np.unique(
            np.concatenate((_axis_nodes(hi1, cfg.lattice_nodes), exits1, [t1_stop]))
        )
        idx2 = np.unique(
            np.concatenate((_axis_nodes(hi2, cfg.lattice_nodes), exits2, [t2_bar]))
        )
        pair_cfg = TwoChainConfig(chain1, chain2, tr1, tr2, int(idx1[-1]), int(idx2[-1]))
        lim1, lim2 = _staircase_limits(ro, idx1, idx2, dt)
        a1, a2 = coefficient_lattice(pair_cfg, idx1, idx2, order=1, limit1=lim1, limit2=lim2)
        grid = build_grid(idx1 * dt, idx2 * dt, a1, a2)

        def m_eval(t1: float, t2: float) -> float:
            return weight_value(grid, consts, t1, t2)

        w = patched_weight(ro, m_eval, t1_stop * dt, t2_bar * dt)
        return ("accepted", w)
    except Exception as exc:  # noqa: BLE001
        return (_classify(exc), math.nan)


def run_mstar_check(
    cfg: ExperimentConfig, pairs: Sequence[HullPair] | None = None
) -> McReport:
    """Mean of the stopped patched weight against 1, across hull pairs."""
    consts = constants(cfg.kappa)
    if pairs is None:
        pairs = default_hull_pair_list(cfg)
    out = _map_replicas(
        cfg.n_samples,
        partial(_mstar_replica, cfg, consts, tuple(pairs)),
        cfg.workers,
    )
    counts = _reduce_counts([s for s, _ in out], cfg.n_samples)
    vals = np.array([v for s, v in out if s == "accepted"])
    mean, se = _mean_se(vals)
    z = _z_against(mean, 1.0, se)
    return McReport(
        experiment="mstar",
        estimate=mean,
        std_error=se,
        n=len(vals),
        z_score=z,
        passed=abs(z) <= 3.0,
        rejects=counts,
        metadata={
            "config": config_dict(cfg),
            "target": 1.0,
            "hull_pairs": [
                {
                    "h1": {"center": p.h1.center, "radius": p.h1.radius},
                    "h2": {"center": p.h2.center, "radius": p.h2.radius},
                }
                for p in pairs
            ],
        },
    )


# ---------------------------------------------------------------------------
# reweighting vs direct slit-domain simulation
# ---------------------------------------------------------------------------


def _observable_exit_left(points: np.ndarray, exit_idx: int, cfg: ExperimentConfig) -> float:
    return 1.0 if points[exit_idx].real < cfg.resolved_hulls().h1.center else 0.0


def _girsanov_a_replica(cfg: ExperimentConfig, consts: SleConstants, idx: int):
    try:
        chain1, tr1, i1 = _stopped_side1(cfg, replica_rng(cfg.seed, idx, 1))
        chain2, tr2, i2 = _stopped_side2(cfg, replica_rng(cfg.seed, idx, 2))
        w = _weight_at_stop(cfg, consts, chain1, tr1, i1, chain2, tr2, i2)
        g = _observable_exit_left(tr1.points, i1, cfg)
        return ("accepted", (w, g))
    except Exception as exc:  # noqa: BLE001
        return (_classify(exc), (math.nan, math.nan))


def _girsanov_b_replica(cfg: ExperimentConfig, idx: int):
    try:
        dt = cfg.dt
        h1 = cfg.resolved_hulls().h1
        chain2, tr2, i2 = _stopped_side2(cfg, replica_rng(cfg.seed, idx, 3))
        x1_img = float(evolve_real_point(chain2, cfg.x1, upto=i2)[-1])
        x2_img = float(chain2.sample.values[i2])
        rng = replica_rng(cfg.seed, idx, 4)
        budget = 6 * _budget_steps(h1.radius, dt)
        path = simulate_bessel(cfg.kappa, x1_img, x2_img, dt, rng, budget)
        pair = build_driver(path, 1, cfg.kappa, x1_img, x2_img)
        chain_img = build_chain(pair.sample())
        # trace in the image domain, pull back, stop on leaving the hull
        n = chain_img.n_steps
        done = 0
        exit_pt = None
        while done < n and exit_pt is None:
            hi = min(done + 256, n)
            seg = inverse_points(chain2, trace_block(chain_img, done, hi), upto=i2)
            outside = np.abs(seg - h1.center) >= h1.radius
            if outside.any():
                exit_pt = seg[int(np.argmax(outside))]
            done = hi
        if exit_pt is None:
            raise NeverExits("slit-domain curve never left the hull")
        g = 1.0 if exit_pt.real < h1.center else 0.0
        return ("accepted", g)
    except Exception as exc:  # noqa: BLE001
        return (_classify(exc), math.nan)


def run_girsanov_check(cfg: ExperimentConfig) -> McReport:
    """Weighted mean of a trace observable vs direct slit-domain growth.

    Arm A reweights independent two-sided samples by the stopped weight;
    arm B grows side 1 directly in the domain slit by the stopped side-2
    curve (started from the image of x1 with force point at the image tip)
    and maps it back.  The two means must agree within pooled errors.
    """
    consts = constants(cfg.kappa)
    out_a = _map_replicas(
        cfg.n_samples, partial(_girsanov_a_replica, cfg, consts), cfg.workers
    )
    counts_a = _reduce_counts([s for s, _ in out_a], cfg.n_samples)
    wg = np.array([v for s, v in out_a if s == "accepted"])
    w = wg[:, 0]
    g = wg[:, 1]
    w_sum = float(np.sum(w))
    est_a = float(np.sum(w * g) / w_sum)
    se_a = float(math.sqrt(np.sum((w * (g - est_a)) ** 2)) / w_sum)

    out_b = _map_replicas(cfg.n_samples, partial(_girsanov_b_replica, cfg), cfg.workers)
    counts_b = _reduce_counts([s for s, _ in out_b], cfg.n_samples)
    gb = np.array([v for s, v in out_b if s == "accepted"])
    est_b, se_b = _mean_se(gb)

    diff = est_a - est_b
    pooled = math.hypot(se_a, se_b)
    z = _z_against(diff, 0.0, pooled)
    counts = {k: counts_a[k] + counts_b[k] for k in REJECT_KEYS}
    return McReport(
        experiment="girsanov",
        estimate=diff,
        std_error=pooled,
        n=len(w) + len(gb),
        z_score=z,
        passed=abs(z) <= 3.0,
        rejects=counts,
        metadata={
            "config": config_dict(cfg),
            "weighted_mean": est_a,
            "weighted_se": se_a,
            "direct_mean": est_b,
            "direct_se": se_b,
            "mean_weight": float(np.mean(w)),
        },
    )


# ---------------------------------------------------------------------------
# reversibility of the trace set
# ---------------------------------------------------------------------------


def _trace_if_confined(
    chain, hull: HalfDisk, start: float, max_points: int = 8000
) -> np.ndarray:
    """Trace of a completed curve, rejected if it leaves ``hull``.

    Completion within the hull is a property of the curve as a set (its
    capacity and its reach), so conditioning on it treats both growth
    directions identically.  Long curves are sampled at a uniform stride
    capped at ``max_points`` vertices (endgame steps are always kept); a
    curve that leaves the hull raises OutsideDomain (a guard reject).
    """
    n = chain.n_steps
    stride = max(1, math.ceil(n / max_points))
    idx = np.arange(1, n + 1, stride, dtype=np.int64)
    if stride > 1:
        # keep the fine endgame steps where the curve closes
        tail = np.arange(max(1, n - 2000), n + 1, dtype=np.int64)
        idx = np.unique(np.concatenate((idx, tail)))
    elif idx[-1] != n:
        idx = np.append(idx, n)
    seg = trace_points_at(chain, idx)
    if (np.abs(seg - hull.center) >= hull.radius).any():
        raise OutsideDomain("curve escaped the observation window")
    return np.concatenate(([start + 0j], seg))


def _curve_observables(points: np.ndarray, names: tuple[str, ...]) -> tuple[float, ...]:
    vals = []
    for name in names:
        if name.startswith("enclosed@"):
            z = complex(name.split("@", 1)[1])
            vals.append(1.0 if encloses(points, z) else 0.0)
        elif name == "max_im":
            vals.append(float(np.max(points.imag)))
        elif name == "min_re":
            vals.append(float(np.min(points.real)))
        elif name == "max_re":
            vals.append(float(np.max(points.real)))
        else:
            raise ValueError(f"unknown observable {name!r}")
    return tuple(vals)


def _reversibility_replica(cfg: ExperimentConfig, names: tuple[str, ...], side: int, idx: int):
    try:
        rng = replica_rng(cfg.seed, idx, side)
        span = cfg.x2 - cfg.x1
        mid = 0.5 * (cfg.x1 + cfg.x2)
        radius = cfg.horizon_factor * span
        budget = math.ceil(radius * radius / (2.0 * cfg.dt) * 1.05) + 8
        chain, start, absorbed = completed_pair_chain(
            cfg.kappa, cfg.x1, cfg.x2, cfg.dt, rng, budget, side
        )
        if not absorbed:
            # unabsorbed within the capacity budget means the curve already
            # left the observation window (capacity monotonicity)
            raise OutsideDomain("curve escaped the observation window")
        pts = _trace_if_confined(chain, HalfDisk(mid, radius), start=start)
        return ("accepted", _curve_observables(pts, names))
    except Exception as exc:  # noqa: BLE001
        return (_classify(exc), None)


def run_reversibility(cfg: ExperimentConfig) -> list[McReport]:
    """Compare trace-set observables of the two growth directions.

    Ensemble F grows from x1 toward x2, ensemble R from x2 toward x1;
    each curve runs to absorption or to exit of a large half-disk.
    Indicator observables get a two-proportion z-test, continuous ones a
    two-sample KS test.
    """
    validate_kappa(cfg.kappa, for_reversibility=True)
    names = cfg.resolved_observables()
    out_f = _map_replicas(
        cfg.n_samples, partial(_reversibility_replica, cfg, names, 1), cfg.workers
    )
    out_r = _map_replicas(
        cfg.n_samples, partial(_reversibility_replica, cfg, names, 2), cfg.workers
    )
    counts_f = _reduce_counts([s for s, _ in out_f], cfg.n_samples)
    counts_r = _reduce_counts([s for s, _ in out_r], cfg.n_samples)
    counts = {k: counts_f[k] + counts_r[k] for k in REJECT_KEYS}
    obs_f = np.array([v for s, v in out_f if s == "accepted"])
    obs_r = np.array([v for s, v in out_r if s == "accepted"])

    reports = []
    for c, name in enumerate(names):
        f = obs_f[:, c]
        r = obs_r[:, c]
        if name.startswith("enclosed@"):
            pf, pr = float(np.mean(f)), float(np.mean(r))
            pool = float(np.mean(np.concatenate((f, r))))
            se = math.sqrt(max(pool * (1.0 - pool), 1e-300) * (1 / len(f) + 1 / len(r)))
            z = _z_against(pf - pr, 0.0, se)
            passed = abs(z) <= 3.0
            meta = {"p_forward": pf, "p_reverse": pr}
            est = pf - pr
        else:
            ks = stats.ks_2samp(f, r)
            pvalue = float(ks.pvalue)
            z = float(stats.norm.isf(min(max(pvalue, 1e-300), 1.0) / 2.0))
            passed = pvalue >= 0.01
            meta = {
                "ks_statistic": float(ks.statistic),
                "pvalue": pvalue,
                "mean_forward": float(np.mean(f)),
                "mean_reverse": float(np.mean(r)),
            }
            est = float(ks.statistic)
        meta["config"] = config_dict(cfg)
        reports.append(
            McReport(
                experiment=f"reversibility[{name}]",
                estimate=est,
                std_error=float(se) if name.startswith("enclosed@") else 0.0,
                n=len(f) + len(r),
                z_score=z,
                passed=passed,
                rejects=counts,
                metadata=meta,
            )
        )
    return reports


# ---------------------------------------------------------------------------
# left-passage sanity check for the base simulator
# ---------------------------------------------------------------------------


def left_passage_reference(kappa: float, z0: complex) -> float:
    """Probability that the standard trace passes left of z0, by quadrature.

    The ratio Re/Im of the evolved point is, after a time change, a
    one-dimensional diffusion whose exit probabilities solve a two-point
    boundary problem; the solution is the normalized integral of
    (1+s^2)^(-4/kappa), evaluated here with adaptive quadrature.
    """
    validate_kappa(kappa)
    if not z0.imag > 0:
        raise ValueError("z0 must be interior")
    if kappa >= 8:
        raise KappaOutOfRange("left-passage reference needs kappa < 8")
    w0 = z0.real / z0.imag
    expo = -4.0 / kappa

    def dens(s: float) -> float:
        return (1.0 + s * s) ** expo

    total, _ = integrate.quad(dens, -np.inf, np.inf)
    part, _ = integrate.quad(dens, -np.inf, w0)
    return part / total


def _left_passage_batch(
    kappa: float, z0: complex, dt: float, n_steps: int, seed: int, size: int, b: int
):
    from .loewner import advance_points

    rng = replica_rng(seed, b)
    w = np.full(size, complex(z0), dtype=complex)
    xi = np.zeros(size)
    sk = math.sqrt(kappa * dt)
    done = 0
    while done < n_steps:
        m = min(4096, n_steps - done)
        g = rng.standard_normal((size, m))
        for k in range(m):
            xi = xi + sk * g[:, k]
            w = advance_points(w, xi, dt)
        done += m
    return np.count_nonzero(w.real - xi > 0.0)


def validate_simulator_left_passage(
    kappa: float,
    z0: complex,
    n: int,
    dt: float = 1e-3,
    horizon: float | None = None,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Empirical left-passage probability against the quadrature reference."""
    if n < 100:
        raise InsufficientSamples(f"need at least 100 samples, got {n}")
    ref = left_passage_reference(kappa, complex(z0))
    if horizon is None:
        horizon = 40.0 * (abs(z0) ** 2 + 1.0)
    n_steps = math.ceil(horizon / dt)
    batch = 512
    n_batches = math.ceil(n / batch)
    sizes = [batch] * (n_batches - 1) + [n - batch * (n_batches - 1)]
    fn = partial(_left_passage_batch, kappa, complex(z0), dt, n_steps, seed)
    counts = _map_replicas(
        n_batches, lambda b: fn(sizes[b], b), workers if workers == 1 else 1
    )
    hits = int(sum(counts))
    p = hits / n
    se = math.sqrt(max(p * (1 - p), 1e-300) / n)
    z = _z_against(p, ref, se)
    return McReport(
        experiment="left_passage",
        estimate=p,
        std_error=se,
        n=n,
        z_score=z,
        passed=abs(z) <= 3.0,
        rejects={"accepted": n, "collision": 0, "never_exits": 0, "guard": 0},
        metadata={
            "kappa": kappa,
            "z0": [z0.real, z0.imag],
            "reference": ref,
            "dt": dt,
            "horizon": horizon,
            "seed": seed,
        },
    )
