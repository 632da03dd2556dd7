"""Numerical integration of the GVE system under feedback.

All propagation, including the governor's forward predictions, goes through
``integrate``. It wraps LSODA (``scipy.integrate.odeint``) with an explicit
initial step computed from the state alone. The solver steps past output
times and interpolates, so the accepted step sequence does not depend on
which output times are requested and extra log samples never perturb the
trajectory. The barrier terms make the closed loop stiff near the periapsis
margin (a fast decay of order 1e4 per second), which is why a
stiffness-switching method with a carefully built Jacobian is used. When
LSODA runs out of steps anyway, the rest of the interval is re-solved with
BDF.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import ODEintWarning, odeint, solve_ivp

from . import _kernels
from .constraints import ConstraintConfig
from .controller import pack_controller
from .errors import (EccentricitySingularity, GveBarrierError, InclinationSingularity,
                     IntegrationFailure, SingularityError)
from .orbit import BodyParams, OrbitalElements, _as_control, _as_vector, check_guards
from .trajectory import TrajectoryLog

H_NOMINAL = 60.0   # s, horizon used to size the first step
# healthy intervals take a few thousand steps; more means LSODA has locked up
MXSTEP = 200_000
# A stalled run is classified as singular inside this band. The 1/e and
# 1/sin(i) rates stiffen the problem well before the hard guard is hit.
GUARD_BAND = 1e-4


def log_times(t_final: float, period: float) -> np.ndarray:
    """0, period, 2 period, ... with t_final always the last entry."""
    if t_final < 0.0 or not period > 0.0:
        raise ValueError("need t_final >= 0 and period > 0")
    if t_final == 0.0:
        return np.zeros(1)
    n = int(math.floor(t_final / period * (1.0 + 1e-12)))
    times = period * np.arange(n + 1)
    if t_final - times[-1] > 1e-9 * period:
        times = np.append(times, t_final)
    else:
        times[-1] = t_final
    return times


def _output_grid(duration, offsets):
    inner = [float(o) for o in offsets if 0.0 < o < duration]
    return np.unique(np.array([0.0] + inner + [float(duration)]))


def _singularity_near(y):
    if y[1] < GUARD_BAND:
        return EccentricitySingularity
    if abs(math.sin(y[2])) < GUARD_BAND:
        return InclinationSingularity
    return None


class _Guarded:
    """Python right-hand side that never raises into the Fortran solver.

    Singular trial points get the same huge derivative as the compiled
    path so the step is rejected; any other package error is parked and
    re-raised after the solver returns.
    """

    def __init__(self, fn):
        self.fn = fn
        self.error = None
        self.t_error = None

    def __call__(self, t, y, *args):
        if self.error is not None:
            return np.full(y.size, np.nan)
        try:
            return self.fn(t, y, *args)
        except SingularityError:
            return np.full(y.size, _kernels.REJECT)
        except GveBarrierError as exc:
            self.error, self.t_error = exc, t
            return np.full(y.size, np.nan)


def _raise_with_time(exc, t):
    cls = type(exc)
    if issubclass(cls, IntegrationFailure):
        raise cls(str(exc), t) from exc
    raise cls(f"{exc} at t = {t:.6f} s") from exc


def initial_step(rhs, y0, args, rtol, atol, duration):
    """LSODA's own first-step rule, evaluated against a fixed nominal horizon.

    LSODA normally measures the first step against the first output time,
    which ties the trajectory to the output grid. Using ``H_NOMINAL``
    instead gives the same step whatever outputs are requested.
    """
    with np.errstate(all="ignore"):
        f0 = np.asarray(rhs(0.0, y0, *args), dtype=float)
    tol = min(max(rtol, 100.0 * np.finfo(float).eps), 1e-3)
    w0 = H_NOMINAL
    ydot = np.max(np.abs(f0) / (rtol * np.abs(y0) + atol))
    if not np.isfinite(ydot):
        return float(min(1e-6, duration))
    h0 = 1.0 / math.sqrt(1.0 / (tol * w0 * w0) + tol * ydot * ydot)
    return float(min(h0, H_NOMINAL, duration))


def fd_jacobian(rhs):
    """Central differences with increments too small to straddle the barrier switch.

    The solver's default increments are about 1e-8 |y|, which for the
    semi-major axis is comparable to how far the trajectory rides from the
    switch surface of the periapsis barrier.
    """
    def jac(t, y, *args):
        J = np.empty((y.size, y.size))
        yp = np.array(y, dtype=float)
        for k in range(y.size):
            h = 1e-9 * max(abs(y[k]), 1e-3)
            yp[k] = y[k] + h
            fp = np.asarray(rhs(t, yp, *args), dtype=float)
            yp[k] = y[k] - h
            fm = np.asarray(rhs(t, yp, *args), dtype=float)
            yp[k] = y[k]
            J[:, k] = (fp - fm) / (2.0 * h)
        return J
    return jac


def _run(rhs, y0, grid, args, rtol, atol, h0, jac):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ODEintWarning)
        with np.errstate(all="ignore"):
            return odeint(rhs, y0, grid, args=args, Dfun=jac, tfirst=True, rtol=rtol,
                          atol=atol, h0=h0, mxstep=MXSTEP, full_output=True)


def _last_good(states, grid, info):
    """Last trustworthy output row and the time the solver reached.

    Rows and diagnostics past the failed interval are uninitialized memory
    and can hold stale values from earlier calls, so they are never read.
    An interval counts as done only when the solver stepped past its end.
    """
    tcur = np.asarray(info["tcur"], dtype=float)
    k = 0
    while (k < grid.size - 1 and np.isfinite(tcur[k]) and tcur[k] >= grid[k + 1]
           and np.all(np.isfinite(states[k + 1]))):
        k += 1
    if k == grid.size - 1:
        return k, float(grid[-1])
    t = tcur[k]
    reached = float(t) if np.isfinite(t) and grid[k] <= t < grid[k + 1] else float(grid[k])
    return k, reached


def _bdf_rerun(rhs, y0, grid, args, rtol, atol, jac):
    """Re-solve the output grid with BDF only.

    LSODA can lock into its non-stiff method while the state grazes the
    stiff side of the periapsis barrier, and then creeps at steps of order
    1e-5 s. A pure BDF solve does not have that failure mode.
    """
    with np.errstate(all="ignore"):
        sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, method="BDF", t_eval=grid, args=args,
                        jac=jac, rtol=rtol, atol=atol, dense_output=True)
    if sol.success and np.all(np.isfinite(sol.y)):
        return sol.y.T.copy(), None, None
    if sol.sol is None:
        return None, float(grid[0]), y0
    return None, float(sol.sol.t_max), sol.sol(sol.sol.t_max)


def integrate(rhs, y0, duration: float, offsets=(), args=(), rtol=1e-9, atol=1e-9,
              t_start: float = 0.0, jac=None):
    """Integrate ``rhs(t, y, *args)`` over [0, duration] in local time.

    Args:
        rhs: right-hand side, jitted or plain Python.
        y0: initial (a, e, i, raan, argp, theta).
        duration: segment length in seconds.
        offsets: interior output times, local to the segment.
        t_start: absolute start time, only used in error messages.
        jac: Jacobian callable with the signature of ``rhs``; defaults to
            ``fd_jacobian(rhs)``.

    Returns:
        (times, states): local output times and the (m, 6) state rows.

    Raises:
        EccentricitySingularity, InclinationSingularity: the state reached a
            GVE singularity.
        IntegrationFailure: the solver could not advance.
    """
    y0 = np.asarray(y0, dtype=float)
    if duration == 0.0:
        return np.zeros(1), y0[None, :].copy()
    if duration < 0.0:
        raise ValueError("duration must be non-negative")
    grid = _output_grid(duration, offsets)
    guarded = rhs if hasattr(rhs, "py_func") else _Guarded(rhs)
    jac = jac or fd_jacobian(guarded)
    h0 = initial_step(guarded, y0, args, rtol, atol, duration)
    states, info = _run(guarded, y0, grid, args, rtol, atol, h0, jac)
    if isinstance(guarded, _Guarded) and guarded.error is not None:
        _raise_with_time(guarded.error, t_start + guarded.t_error)
    if info["message"].startswith("Integration successful") and np.all(np.isfinite(states)):
        return grid, states

    # rows past the stall point are not meaningful, even when finite
    k, t_stall = _last_good(states, grid, info)
    near = states[k]
    message = info["message"].strip()
    if message.startswith("Excess work"):
        rows, t_fail, y_fail = _bdf_rerun(guarded, states[k], grid[k:], args, rtol, atol, jac)
        if isinstance(guarded, _Guarded) and guarded.error is not None:
            _raise_with_time(guarded.error, t_start + guarded.t_error)
        if rows is not None:
            states[k:] = rows
            return grid, states
        t_stall, near = t_fail, y_fail
        message = "BDF fallback stalled after " + message
    elif t_stall > grid[k]:
        probe = np.linspace(0.0, t_stall - grid[k], 201)
        rows, pinfo = _run(guarded, states[k], probe, args, rtol, atol, h0, jac)
        j, _ = _last_good(rows, probe, pinfo)
        near = rows[j]
    cls = _singularity_near(near)
    t_abs = t_start + t_stall
    if cls is not None:
        raise cls(f"state reached a GVE singularity near t = {t_abs:.6f} s "
                  f"(e = {near[1]:.3e}, i = {near[2]:.6f})")
    raise IntegrationFailure(f"integrator stalled: {message}", t_abs)


def _projected_rhs(project, mu):
    def rhs(t, y, ctrl):
        check_guards(y)
        u_nom, G = _kernels.nominal_control(y, y[5], ctrl)
        u = np.asarray(project(u_nom), dtype=float)
        dy = np.empty(6)
        dy[:5] = G @ u
        dy[5] = _kernels.theta_rate(y, y[5], u, mu)
        return dy
    return rhs


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Everything the feedback loop needs besides target and weights."""

    constraints: ConstraintConfig
    saturation: object
    body: BodyParams = BodyParams()
    rtol: float = 1e-9
    atol: float = 1e-9

    def __post_init__(self):
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValueError("integrator tolerances must be positive")

    @property
    def compiled(self) -> bool:
        return self.saturation.kernel_code is not None

    def pack(self, x_des, weights) -> np.ndarray:
        return pack_controller(x_des, self.constraints, weights, self.saturation, self.body)

    def _rhs(self):
        if self.compiled:
            return _kernels.closed_loop_rhs, _kernels.closed_loop_jac
        return _projected_rhs(self.saturation.project, self.body.mu), None

    def integrate(self, y0, duration, x_des, weights, offsets=(), t_start=0.0):
        ctrl = self.pack(x_des, weights)
        rhs, jac = self._rhs()
        return integrate(rhs, y0, duration, offsets, (ctrl,), self.rtol, self.atol,
                         t_start, jac)

    def sample_columns(self, states, x_des, weights):
        """Control, V, B1, B2 and V0 recomputed at logged states."""
        ctrl = self.pack(x_des, weights)
        u, vals = _kernels.log_quantities(np.ascontiguousarray(states), ctrl)
        if not self.compiled:
            for k, y in enumerate(states):
                u_nom, _ = _kernels.nominal_control(y, y[5], ctrl)
                u[k] = self.saturation.project(u_nom)
        return u, vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3]


def propagate(x0, theta0: float, control_law, body: BodyParams = BodyParams(),
              t_span: float = 0.0, log_period: float = 60.0, rtol=1e-9, atol=1e-9,
              constraints: ConstraintConfig = ConstraintConfig()) -> TrajectoryLog:
    """Propagate under an arbitrary feedback ``control_law(x, theta, t)``.

    The law receives the five elements as an array and returns a
    ``ControlAccel`` or 3-vector (km/s^2). It is evaluated continuously
    inside the derivative.
    """
    xv = _as_vector(x0)
    OrbitalElements.from_array(xv)
    mu = body.mu

    def rhs(t, y):
        u = _as_control(control_law(y[:5], y[5], t))
        dy = np.empty(6)
        if u[0] == 0.0 and u[1] == 0.0 and u[2] == 0.0:
            dy[:5] = 0.0
        else:
            check_guards(y)
            dy[:5] = _kernels.gve_matrix(y, y[5], mu) @ u
        if u[0] != 0.0 or u[1] != 0.0:
            check_guards(y, need_sin_i=False)
        dy[5] = _kernels.theta_rate(y, y[5], u, mu)
        return dy

    times = log_times(t_span, log_period)
    _, states = integrate(rhs, np.r_[xv, float(theta0)], t_span, times[1:-1], (), rtol, atol)
    u = np.array([_as_control(control_law(y[:5], y[5], t)) for t, y in zip(times, states)])
    return TrajectoryLog(times, states[:, :5], states[:, 5], u.reshape(-1, 3),
                         constraints=constraints)
