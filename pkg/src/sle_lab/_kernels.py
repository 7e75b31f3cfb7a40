"""JIT inner loops for the slit-map engine.

These kernels carry the O(n^2) sequential work (welding, trace tips, jet
propagation, point advancement) that dominates Monte Carlo runs.  They
mirror the branch conventions documented in loewner.py exactly: square
roots live in the closed upper half-plane, and on the nonnegative real
axis the sign of Re(w - xi) breaks the tie.  Kernels report failures as
integer status codes; the wrappers in loewner.py turn them into the
package's exceptions.
"""

import cmath
import math

from numba import njit

# squared-contact tolerance; keep equal to loewner.TOL_SWALLOW
_TOL_SWALLOW = 1e-12


@njit(cache=True, inline="always")
def _branch_sqrt(u, hint):
    if u.imag != 0.0:
        r = cmath.sqrt(u)
        if r.imag >= 0.0:
            return r
        return -r
    if u.real >= 0.0:
        r = math.sqrt(u.real)
        if hint >= 0.0:
            return complex(r, 0.0)
        return complex(-r, 0.0)
    return complex(0.0, math.sqrt(-u.real))


@njit(cache=True)
def advance_inplace(pts, xi, delta):
    c = 4.0 * delta
    for i in range(pts.shape[0]):
        dv = pts[i] - xi
        pts[i] = xi + _branch_sqrt(dv * dv + c, dv.real)


@njit(cache=True)
def advance_var_inplace(pts, xi, delta):
    c = 4.0 * delta
    for i in range(pts.shape[0]):
        dv = pts[i] - xi[i]
        pts[i] = xi[i] + _branch_sqrt(dv * dv + c, dv.real)


@njit(cache=True)
def retreat_inplace(pts, xi, delta):
    c = 4.0 * delta
    for i in range(pts.shape[0]):
        dv = pts[i] - xi
        pts[i] = xi + _branch_sqrt(dv * dv - c, dv.real)


@njit(cache=True)
def zip_curve(pts, xi_out, delta_out):
    """Weld the polyline in place; returns 0 or the offending vertex index."""
    n = pts.shape[0] - 1
    for m in range(1, n + 1):
        q = pts[m]
        if not q.imag > 0.0:
            return m
        x = q.real
        d = 0.25 * q.imag * q.imag
        xi_out[m - 1] = x
        delta_out[m - 1] = d
        c = 4.0 * d
        for i in range(m + 1, n + 1):
            dv = pts[i] - x
            pts[i] = x + _branch_sqrt(dv * dv + c, dv.real)
    return 0


@njit(cache=True)
def jet_pass(xi, delta, x, record_at, order, out):
    """Real-point jet through the steps, snapshotting at prefix lengths.

    Returns 0 on success or 1 + step index when the point is swallowed
    (contact with the driving value, or the driving value crossing over).
    """
    n = xi.shape[0]
    nrec = record_at.shape[0]
    f = x
    f1 = 1.0
    f2 = 0.0
    f3 = 0.0
    side = 0.0
    pos = 0
    third = order >= 2
    for m in range(n):
        while pos < nrec and record_at[pos] == m:
            out[pos, 0] = f
            out[pos, 1] = f1
            out[pos, 2] = f2
            out[pos, 3] = f3
            pos += 1
        if pos == nrec:
            return 0
        d = f - xi[m]
        dd = d * d
        if dd <= _TOL_SWALLOW:
            return m + 1
        s = 1.0 if d > 0.0 else -1.0
        if side == 0.0:
            side = s
        elif s != side:
            return m + 1
        dm = delta[m]
        root = s * math.sqrt(dd + 4.0 * dm)
        g1 = d / root
        if third:
            r3 = root * root * root
            g2 = 4.0 * dm / r3
            g3 = -12.0 * dm * d / (r3 * root * root)
            f3 = g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3
            f2 = g2 * f1 * f1 + g1 * f2
        f1 = g1 * f1
        f = xi[m] + root
    while pos < nrec:
        out[pos, 0] = f
        out[pos, 1] = f1
        out[pos, 2] = f2
        out[pos, 3] = f3
        pos += 1
    return 0


@njit(cache=True)
def real_orbit(xi, delta, x, out):
    """Orbit of a real point; returns 0 or 1 + swallowing step index."""
    out[0] = x
    v = x
    side = 0.0
    for m in range(xi.shape[0]):
        d = v - xi[m]
        dd = d * d
        if dd <= _TOL_SWALLOW:
            return m + 1
        s = 1.0 if d > 0.0 else -1.0
        if side == 0.0:
            side = s
        elif s != side:
            return m + 1
        v = xi[m] + s * math.sqrt(dd + 4.0 * delta[m])
        out[m + 1] = v
    return 0


@njit(cache=True)
def trace_tips(xi, delta, seeds, k0):
    """Backward inverse pass: seeds[j] becomes the tip at index k0 + 1 + j."""
    k1 = k0 + seeds.shape[0]
    for i in range(k1 - 1, -1, -1):
        xm = xi[i]
        c = 4.0 * delta[i]
        lo = i - k0
        if lo < 0:
            lo = 0
        for j in range(lo, seeds.shape[0]):
            dv = seeds[j] - xm
            seeds[j] = xm + _branch_sqrt(dv * dv - c, dv.real)


@njit(cache=True)
def trace_tips_at(xi, delta, seeds, indices):
    """Backward inverse pass for selected tips.

    ``seeds[j]`` starts as the driving value at time index ``indices[j]``
    (sorted ascending, all >= 1) and ends as the trace point there.
    """
    nj = seeds.shape[0]
    lo = nj
    for i in range(indices[nj - 1] - 1, -1, -1):
        while lo > 0 and indices[lo - 1] >= i + 1:
            lo -= 1
        xm = xi[i]
        c = 4.0 * delta[i]
        for j in range(lo, nj):
            dv = seeds[j] - xm
            seeds[j] = xm + _branch_sqrt(dv * dv - c, dv.real)


@njit(cache=True)
def bessel_steps(x0, a, dt, g, out):
    """Euler steps dX = dB + a/X dt; returns (steps written, absorbed)."""
    sdt = math.sqrt(dt)
    adt = a * dt
    v = x0
    out[0] = v
    for i in range(g.shape[0]):
        v = v + sdt * g[i] + adt / v
        if v <= 0.0:
            out[i + 1] = 0.0
            return i + 1, True
        out[i + 1] = v
    return g.shape[0], False
