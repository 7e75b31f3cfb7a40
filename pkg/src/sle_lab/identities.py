"""Deterministic residual suite for the two-chain differential identities.

One seeded desk configuration (two short disjoint chains grown from the
marked boundary points) is evaluated against every identity that relates
the image-chain drivings, capacities, derivative jets, and the kernel
integral.  Each check returns its residual together with the tolerance it
is gated at; the tolerances were calibrated once on the default desk
configuration and frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .driver import build_driver, replica_rng, simulate_bessel
from .ensemble import (
    TwoChainConfig,
    check_flow_identities,
    check_lemma_derivatives,
    coefficient_lattice,
    commutation_residual,
    image_chain,
    two_chain_config,
)
from .loewner import DrivingSample
from .martingale import integral_identity


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tol

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tol": self.tol,
            "pass": self.passed,
        }


def desk_config(
    kappa: float = 2.0,
    dt: float = 1e-4,
    horizon: float = 0.02,
    seed: int = 2024,
    x1: float = 0.0,
    x2: float = 1.0,
    extra_steps: int = 32,
) -> TwoChainConfig:
    """Two independent short driver-pair chains frozen at the horizon."""
    n = round(horizon / dt)
    budget = n + extra_steps
    samples = []
    for j in (1, 2):
        path = simulate_bessel(kappa, x1, x2, dt, replica_rng(seed, j), budget)
        if path.n_steps < budget:
            raise RuntimeError("desk path absorbed before the horizon; reseed")
        samples.append(build_driver(path, j, kappa, x1, x2).sample())
    return two_chain_config(samples[0], samples[1], n, n)


def smooth_config(dt: float = 1e-4, horizon: float = 0.03) -> TwoChainConfig:
    """Two disjoint chains with smooth deterministic drivings."""
    n = round(horizon / dt)
    t = np.arange(n + 1) * dt
    s1 = DrivingSample(0.0 + 1.2 * t, dt)
    s2 = DrivingSample(1.0 - 0.8 * t, dt)
    return two_chain_config(s1, s2, n, n)


def _smooth_decay_checks(dt: float) -> list[IdentityCheck]:
    cfg = smooth_config(dt)
    n = cfg.t1
    sub = TwoChainConfig(cfg.chain1, cfg.chain2, cfg.trace1, cfg.trace2, n - 170, n)
    probe = 80 * dt
    lem = check_lemma_derivatives(sub, probe)
    lem_half = check_lemma_derivatives(sub, probe / 2)
    flow = check_flow_identities(sub, complex(0.5, 0.6), probe)
    flow_half = check_flow_identities(sub, complex(0.5, 0.6), probe / 2)
    out = [
        IdentityCheck("smooth_base_time_value", lem["value_residual"], 1e-1),
        IdentityCheck("smooth_base_time_deriv", lem["derivative_residual"], 1e-1),
    ]
    # a first-order difference halves (within 30%) when the probe halves
    for name, full, half in (
        ("base_time_value", lem["value_residual"], lem_half["value_residual"]),
        ("base_time_deriv", lem["derivative_residual"], lem_half["derivative_residual"]),
        ("flow_value", flow["flow_value"], flow_half["flow_value"]),
        ("flow_ratio_dz", flow["flow_ratio_dz"], flow_half["flow_ratio_dz"]),
    ):
        ratio = half / max(full, 1e-30)
        out.append(IdentityCheck(f"smooth_{name}_halving", abs(ratio - 0.5), 0.15))
    return out


def run_identity_suite(
    kappa: float = 2.0,
    dt: float = 1e-4,
    horizon: float = 0.02,
    seed: int = 2024,
) -> list[IdentityCheck]:
    """All §-level identity residuals on one desk configuration."""
    cfg = desk_config(kappa, dt, horizon, seed)
    n = cfg.t1
    checks: list[IdentityCheck] = []

    # image driving vs jet of the opposite image map, along the chain
    img1 = image_chain(cfg, 1)
    ts = np.unique(np.linspace(1, n, 8).astype(int))
    a1, _ = coefficient_lattice(cfg, ts, np.array([cfg.t2]), order=1)
    eta_res = max(
        abs(img1.eta_knots[t] - a1[r, 0, 0]) for r, t in enumerate(ts)
    )
    checks.append(IdentityCheck("image_driving_vs_jet", float(eta_res), 2e-2))

    # capacity speed vs squared first derivative
    v_res = 0.0
    for r, t in enumerate(ts[:-1]):
        fd = (img1.v[t + 1] - img1.v[t]) / dt
        v_res = max(v_res, abs(fd / (a1[r, 0, 1] ** 2) - 1.0))
    checks.append(IdentityCheck("capacity_speed", float(v_res), 5e-2))

    # flow identities at an interior probe point; a short probe keeps the
    # rough-driver contribution to the one-sided difference small
    sub = TwoChainConfig(
        cfg.chain1, cfg.chain2, cfg.trace1, cfg.trace2, n - 88, cfg.t2
    )
    z = complex(0.5 * (cfg.driving_value(1) + cfg.driving_value(2)), 0.6)
    flow = check_flow_identities(sub, z, 2 * dt)
    checks.append(IdentityCheck("flow_value", flow["flow_value"], 5e-2))
    checks.append(IdentityCheck("flow_logderiv", flow["flow_logderiv"], 1.5e-1))
    checks.append(IdentityCheck("flow_ratio", flow["flow_ratio"], 1.5e-1))
    checks.append(IdentityCheck("flow_ratio_dz", flow["flow_ratio_dz"], 1.5e-1))

    # base-time derivative identities at the reference probe
    lem = check_lemma_derivatives(sub, 10 * dt)
    checks.append(IdentityCheck("base_time_value", lem["value_residual"], 1e-1))
    checks.append(IdentityCheck("base_time_deriv", lem["derivative_residual"], 1e-1))

    # Convergence order of the probes is checked on a smooth driving pair:
    # the identities are pathwise statements and a rough driver's increments
    # mask the first-order truncation term at small probes.
    checks.extend(_smooth_decay_checks(dt))

    # jet combination vs kernel quadrature
    lhs, rhs = integral_identity(cfg, stride=1)
    rel = abs(lhs - rhs) / abs(rhs)
    checks.append(IdentityCheck("kernel_integral", float(rel), 2e-2))
    lhs8, rhs8 = integral_identity(cfg, stride=8)
    rel8 = abs(lhs8 - rhs8) / abs(rhs8)
    checks.append(
        IdentityCheck("kernel_integral_refines", float(rel / max(rel8, 1e-30)), 1.0)
    )

    # exact vanishing on the axis
    axis_cfg = TwoChainConfig(cfg.chain1, cfg.chain2, cfg.trace1, cfg.trace2, n, 0)
    lhs0, rhs0 = integral_identity(axis_cfg, stride=1)
    checks.append(IdentityCheck("kernel_integral_axis", abs(lhs0) + abs(rhs0), 0.0))

    # the two evaluation orders of the joint map agree
    rng = replica_rng(seed, 99)
    pts = (
        cfg.driving_value(1)
        + (cfg.driving_value(2) - cfg.driving_value(1)) * rng.random(20)
        + 1j * (0.3 + 1.2 * rng.random(20))
    )
    checks.append(
        IdentityCheck("commutation", commutation_residual(cfg, pts), 1e-3)
    )
    return checks
