"""Compiled RK4 kernels for the life-cycle model and its adjoint.

State layout is ``[E_1..E_J, L_1..L_J, P_1..P_J, A_1..A_J]``.  Time-varying
inputs are sampled on the half-step grid ``t_start + k*dt/2`` so step ``n``
reads indices ``2n``, ``2n+1`` and ``2n+2``.  Row order of ``rates``:
dev_egg, dev_larva, dev_pupa, dev_gonotrophic, mort_egg, mort_larva,
mort_pupa, mort_adult, oviposition.
"""
import math

import numpy as np
from numba import njit

GEL, GLP, GPA, GAE, GED, GLD, GPD, GAD, OV = range(9)


@njit(cache=True, inline="always")
def _f1(x, clamp, scale):
    # returns (value, derivative) of the recruitment factor at x = 1 - sum(L)/C
    if not clamp:
        return x, 1.0
    z = scale * x
    if z > 0:
        val = x + math.log1p(math.exp(-z)) / scale
        der = 1.0 / (1.0 + math.exp(-z))
    else:
        val = math.log1p(math.exp(z)) / scale
        ez = math.exp(z)
        der = ez / (1.0 + ez)
    return val, der


@njit(cache=True)
def lifecycle_rhs(y, J, k, rates, rl, ra, cap, clamp, scale, out):
    gel = rates[GEL, k]
    glp = rates[GLP, k]
    gpa = rates[GPA, k]
    gae = rates[GAE, k]
    ged = rates[GED, k]
    gld = rates[GLD, k] + rl[k]
    gpd = rates[GPD, k]
    gad = rates[GAD, k] + ra[k]
    ov = rates[OV, k]
    e0, l0, p0, a0 = 0, J, 2 * J, 3 * J

    s = 0.0
    for j in range(J):
        s += y[l0 + j]
    f1, _ = _f1(1.0 - s / cap[k], clamp, scale)

    out[e0] = J * ov * gae * y[a0 + J - 1] - (J * gel + ged) * y[e0]
    out[l0] = J * f1 * gel * y[e0 + J - 1] - (J * glp + gld) * y[l0]
    out[p0] = J * glp * y[l0 + J - 1] - (J * gpa + gpd) * y[p0]
    out[a0] = J * (0.5 * gpa * y[p0 + J - 1] + gae * y[a0 + J - 1]) - (J * gae + gad) * y[a0]
    for j in range(1, J):
        out[e0 + j] = J * gel * y[e0 + j - 1] - (J * gel + ged) * y[e0 + j]
        out[l0 + j] = J * glp * y[l0 + j - 1] - (J * glp + gld) * y[l0 + j]
        out[p0 + j] = J * gpa * y[p0 + j - 1] - (J * gpa + gpd) * y[p0 + j]
        out[a0 + j] = J * gae * y[a0 + j - 1] - (J * gae + gad) * y[a0 + j]


@njit(cache=True)
def forward_rk4(y0, J, dt, n_steps, rates, rl, ra, cap, clamp, scale):
    """Integrate forward; returns ``(states, derivatives, failed_step)``.

    ``failed_step`` is -1 on success, otherwise the first step whose result
    was non-finite (later rows are left as NaN).
    """
    m = y0.size
    ys = np.full((n_steps + 1, m), np.nan)
    fs = np.full((n_steps + 1, m), np.nan)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    y = y0.copy()
    ys[0] = y
    for n in range(n_steps):
        i = 2 * n
        lifecycle_rhs(y, J, i, rates, rl, ra, cap, clamp, scale, k1)
        fs[n] = k1
        for q in range(m):
            tmp[q] = y[q] + 0.5 * dt * k1[q]
        lifecycle_rhs(tmp, J, i + 1, rates, rl, ra, cap, clamp, scale, k2)
        for q in range(m):
            tmp[q] = y[q] + 0.5 * dt * k2[q]
        lifecycle_rhs(tmp, J, i + 1, rates, rl, ra, cap, clamp, scale, k3)
        for q in range(m):
            tmp[q] = y[q] + dt * k3[q]
        lifecycle_rhs(tmp, J, i + 2, rates, rl, ra, cap, clamp, scale, k4)
        ok = True
        for q in range(m):
            y[q] = y[q] + dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            if not math.isfinite(y[q]):
                ok = False
        if not ok:
            return ys, fs, n
        ys[n + 1] = y
    lifecycle_rhs(y, J, 2 * n_steps, rates, rl, ra, cap, clamp, scale, k1)
    fs[n_steps] = k1
    return ys, fs, -1


@njit(cache=True)
def adjoint_rhs(lam, x, J, k, rates, rl, ra, cap, clamp, scale, src, out):
    """``dlam/dt = -(df/dx)^T lam + dR0/dx`` at half-grid index ``k``."""
    gel = rates[GEL, k]
    glp = rates[GLP, k]
    gpa = rates[GPA, k]
    gae = rates[GAE, k]
    ged = rates[GED, k]
    gld = rates[GLD, k] + rl[k]
    gpd = rates[GPD, k]
    gad = rates[GAD, k] + ra[k]
    ov = rates[OV, k]
    e0, l0, p0, a0 = 0, J, 2 * J, 3 * J

    s = 0.0
    for j in range(J):
        s += x[l0 + j]
    c = cap[k]
    f1, df1 = _f1(1.0 - s / c, clamp, scale)
    # d f1 / d L_j is the same for every j
    df1_dL = -df1 / c
    hatch = J * gel * x[e0 + J - 1] * df1_dL * lam[l0]

    for j in range(J):
        last = j == J - 1
        # eggs
        v = -(J * gel + ged) * lam[e0 + j]
        if last:
            v += J * f1 * gel * lam[l0]
        else:
            v += J * gel * lam[e0 + j + 1]
        out[e0 + j] = -v
        # larvae
        v = -(J * glp + gld) * lam[l0 + j] + hatch
        if last:
            v += J * glp * lam[p0]
        else:
            v += J * glp * lam[l0 + j + 1]
        out[l0 + j] = -v
        # pupae
        v = -(J * gpa + gpd) * lam[p0 + j]
        if last:
            v += 0.5 * J * gpa * lam[a0]
        else:
            v += J * gpa * lam[p0 + j + 1]
        out[p0 + j] = -v
        # adults
        v = -(J * gae + gad) * lam[a0 + j]
        if last:
            v += J * gae * (lam[a0] + ov * lam[e0])
        else:
            v += J * gae * lam[a0 + j + 1]
        out[a0 + j] = -v + src[k]


@njit(cache=True)
def backward_rk4(ys, fs, J, dt, rates, rl, ra, cap, clamp, scale, src):
    """Integrate the adjoint from ``lam(T) = 0`` down to ``t_start``.

    Forward states at half steps come from cubic Hermite interpolation of
    the stored grid states and derivatives.  Returns ``(lams, failed_step)``.
    """
    n_steps = ys.shape[0] - 1
    m = ys.shape[1]
    lams = np.full((n_steps + 1, m), np.nan)
    lam = np.zeros(m)
    lams[n_steps] = lam
    xm = np.empty(m)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for n in range(n_steps, 0, -1):
        i = 2 * n
        for q in range(m):
            xm[q] = 0.5 * (ys[n - 1, q] + ys[n, q]) + dt / 8.0 * (fs[n - 1, q] - fs[n, q])
        adjoint_rhs(lam, ys[n], J, i, rates, rl, ra, cap, clamp, scale, src, k1)
        for q in range(m):
            tmp[q] = lam[q] - 0.5 * dt * k1[q]
        adjoint_rhs(tmp, xm, J, i - 1, rates, rl, ra, cap, clamp, scale, src, k2)
        for q in range(m):
            tmp[q] = lam[q] - 0.5 * dt * k2[q]
        adjoint_rhs(tmp, xm, J, i - 1, rates, rl, ra, cap, clamp, scale, src, k3)
        for q in range(m):
            tmp[q] = lam[q] - dt * k3[q]
        adjoint_rhs(tmp, ys[n - 1], J, i - 2, rates, rl, ra, cap, clamp, scale, src, k4)
        ok = True
        for q in range(m):
            lam[q] = lam[q] - dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            if not math.isfinite(lam[q]):
                ok = False
        if not ok:
            return lams, n - 1
        lams[n - 1] = lam
    return lams, -1
