"""Compiled inner loops: GVE matrix, barrier terms and the closed-loop RHS.

Everything here works on flat float64 arrays so it can be jitted with numba.
The public modules wrap these kernels with typed dataclasses and errors.

Controller parameters travel as one packed vector (see ``pack_controller``):

    [0:5]    target elements (a, e, i, raan, argp)
    [5:30]   P, row-major 5x5
    [30:32]  q1, q2
    [32:36]  r_min, e_min, eps1, eps2
    [36]     saturation code (SAT_*)
    [37]     2-norm radius
    [38:41]  per-channel bounds
    [41]     mu
"""

import math

import numpy as np
from numba import njit

E_GUARD = 1e-9
SIN_I_GUARD = 1e-9

SAT_NONE = -1
SAT_BALL = 0
SAT_BOX = 1

N_CTRL = 42
I_XDES = 0
I_P = 5
I_Q1 = 30
I_Q2 = 31
I_RMIN = 32
I_EMIN = 33
I_EPS1 = 34
I_EPS2 = 35
I_MODE = 36
I_UMAX = 37
I_BOX = 38
I_MU = 41


@njit(cache=True)
def gve_matrix(x, theta, mu):
    """5x3 control-influence matrix, rows (a, e, i, raan, argp), cols (S, T, W)."""
    a = x[0]
    e = x[1]
    inc = x[2]
    argp = x[4]
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    st = math.sin(theta)
    ct = math.cos(theta)
    r = p / (1.0 + e * ct)
    # cos of the eccentric anomaly, written without the 1/e cancellation
    cospsi = (ct + e) / (1.0 + e * ct)
    cospsi = min(1.0, max(-1.0, cospsi))
    arg_lat = theta + argp
    su = math.sin(arg_lat)
    cu = math.cos(arg_lat)
    si = math.sin(inc)
    ci = math.cos(inc)

    G = np.zeros((5, 3))
    G[0, 0] = 2.0 * a * a * e * st / h
    G[0, 1] = 2.0 * a * a * p / (h * r)
    G[1, 0] = p * st / h
    G[1, 1] = p * (cospsi + ct) / h
    G[2, 2] = r * cu / h
    G[3, 2] = r * su / (h * si)
    G[4, 0] = -p * ct / (e * h)
    G[4, 1] = (r + p) * st / (e * h)
    G[4, 2] = -r * su * ci / (h * si)
    return G


@njit(cache=True)
def theta_rate(x, theta, u, mu):
    a = x[0]
    e = x[1]
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    ct = math.cos(theta)
    st = math.sin(theta)
    r = p / (1.0 + e * ct)
    rate = h / (r * r)
    if u[0] != 0.0 or u[1] != 0.0:
        rate += (p * ct * u[0] - (p + r) * st * u[1]) / (e * h)
    return rate


@njit(cache=True)
def barrier_terms(x, q1, q2, r_min, e_min, eps1, eps2):
    """Return (B1, B2, grad B1, grad B2)."""
    a = x[0]
    e = x[1]
    g1 = np.zeros(5)
    g2 = np.zeros(5)
    b1 = 0.0
    b2 = 0.0
    s1 = a * (1.0 - e) - r_min - eps1
    if s1 < 0.0:
        b1 = 0.5 * q1 * s1 * s1
        g1[0] = q1 * (1.0 - e) * s1
        g1[1] = -q1 * a * s1
    s2 = e - e_min - eps2
    if s2 < 0.0:
        b2 = 0.5 * q2 * s2 * s2
        g2[1] = q2 * s2
    return b1, b2, g1, g2


@njit(cache=True)
def quad_form(dx, P):
    acc = 0.0
    for k in range(5):
        row = 0.0
        for m in range(5):
            row += P[k, m] * dx[m]
        acc += dx[k] * row
    return 0.5 * acc


@njit(cache=True)
def lyapunov(x, ctrl):
    """Return (V, V0, B1, B2) for the packed controller parameters."""
    P = ctrl[I_P:I_P + 25].reshape((5, 5))
    dx = x[:5] - ctrl[I_XDES:I_XDES + 5]
    v0 = quad_form(dx, P)
    b1, b2, _, _ = barrier_terms(x, ctrl[I_Q1], ctrl[I_Q2], ctrl[I_RMIN],
                                 ctrl[I_EMIN], ctrl[I_EPS1], ctrl[I_EPS2])
    return v0 + b1 + b2, v0, b1, b2


@njit(cache=True)
def nominal_control(x, theta, ctrl):
    P = ctrl[I_P:I_P + 25].reshape((5, 5))
    G = gve_matrix(x, theta, ctrl[I_MU])
    _, _, g1, g2 = barrier_terms(x, ctrl[I_Q1], ctrl[I_Q2], ctrl[I_RMIN],
                                 ctrl[I_EMIN], ctrl[I_EPS1], ctrl[I_EPS2])
    grad = g1 + g2
    dx = x[:5] - ctrl[I_XDES:I_XDES + 5]
    for k in range(5):
        acc = 0.0
        for m in range(5):
            acc += P[k, m] * dx[m]
        grad[k] += acc
    u = np.zeros(3)
    for j in range(3):
        acc = 0.0
        for k in range(5):
            acc += G[k, j] * grad[k]
        u[j] = -acc
    return u, G


@njit(cache=True)
def saturate(u_nom, mode, u_max, box):
    u = u_nom.copy()
    if mode == SAT_BALL:
        norm = math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
        if norm > u_max:
            scale = u_max / norm
            for j in range(3):
                u[j] = u[j] * scale
            # round-off can leave the scaled vector one ulp outside the ball
            while math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) > u_max:
                for j in range(3):
                    u[j] = u[j] * (1.0 - 2.2e-16)
    elif mode == SAT_BOX:
        for j in range(3):
            if u[j] > box[j]:
                u[j] = box[j]
            elif u[j] < -box[j]:
                u[j] = -box[j]
    return u


@njit(cache=True)
def singular(x):
    return x[1] < E_GUARD or abs(math.sin(x[2])) < SIN_I_GUARD


@njit(cache=True)
def feedback(x, theta, ctrl):
    """Saturated barrier-Lyapunov control; NaN when a guard trips."""
    if singular(x):
        return np.full(3, np.nan)
    u_nom, _ = nominal_control(x, theta, ctrl)
    return saturate(u_nom, int(ctrl[I_MODE]), ctrl[I_UMAX], ctrl[I_BOX:I_BOX + 3])


# Derivative reported at singular trial points. LSODA treats NaN as a
# passing error estimate, so a huge finite value is used to force a
# rejected step instead.
REJECT = 1e30


@njit(cache=True)
def closed_loop_rhs(t, y, ctrl):
    dy = np.empty(6)
    if singular(y):
        dy[:] = REJECT
        return dy
    u_nom, G = nominal_control(y, y[5], ctrl)
    u = saturate(u_nom, int(ctrl[I_MODE]), ctrl[I_UMAX], ctrl[I_BOX:I_BOX + 3])
    for k in range(5):
        dy[k] = G[k, 0] * u[0] + G[k, 1] * u[1] + G[k, 2] * u[2]
    dy[5] = theta_rate(y, y[5], u, ctrl[I_MU])
    return dy


@njit(cache=True)
def log_quantities(samples, ctrl):
    """Per-sample (u, V, B1, B2, V0) for logged states."""
    m = samples.shape[0]
    u = np.empty((m, 3))
    out = np.empty((m, 4))
    for k in range(m):
        x = samples[k]
        u[k, :] = feedback(x, x[5], ctrl)
        v, v0, b1, b2 = lyapunov(x, ctrl)
        out[k, 0] = v
        out[k, 1] = b1
        out[k, 2] = b2
        out[k, 3] = v0
    return u, out


@njit(cache=True)
def closed_loop_jac(t, y, ctrl):
    """Central-difference Jacobian of ``closed_loop_rhs``.

    The increments are far smaller than the solver's default ones, which
    would otherwise straddle the barrier switch surface a(1 - e) = r_min +
    eps1 and hand the stiff solver a badly wrong Jacobian.
    """
    J = np.zeros((6, 6))
    yp = y.copy()
    for k in range(6):
        h = 1e-9 * max(abs(y[k]), 1e-3)
        yk = y[k]
        yp[k] = yk + h
        fp = closed_loop_rhs(t, yp, ctrl)
        yp[k] = yk - h
        fm = closed_loop_rhs(t, yp, ctrl)
        yp[k] = yk
        for m in range(6):
            J[m, k] = (fp[m] - fm[m]) / (2.0 * h)
    return J
