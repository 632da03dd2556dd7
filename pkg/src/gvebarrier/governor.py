"""Convergence governor: a virtual target that creeps toward the real one.

At each update instant the governor moves the virtual target a fraction
kappa of the way to the final target, choosing the largest kappa in [0, 1]
for which a forward simulation over the horizon ends inside the terminal
set Q of the candidate target. Q is a sublevel set of the quadratic part of
the Lyapunov function, sized so that the state constraints (with margins)
hold everywhere inside it.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .constraints import ConstraintConfig, instantaneously_feasible
from .controller import Weights, barriers_inactive, nominal_value, sized_weights
from .errors import InfeasibleInitialState, InfeasibleTerminalSet
from .orbit import OrbitalElements, _as_vector
from .propagation import ClosedLoop

_N_PHI = 2048
_C0_ITERS = 80


@dataclass(frozen=True)
class GovernorConfig:
    """Governor timing and acceptance settings (seconds)."""

    t_hor: float
    update_period: float = 360.0
    bisection_iters: int = 10
    delta: float = 1e-6
    reject_small: bool = True
    c0_table: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.t_hor > 0.0:
            raise ValueError("t_hor must be positive")
        if not self.update_period > 0.0:
            raise ValueError("update_period must be positive")
        if self.bisection_iters < 1:
            raise ValueError("bisection_iters must be at least 1")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True, eq=False)
class GovernorState:
    x_des_virtual: OrbitalElements
    kappa_last: float = 0.0
    weights: Optional[Weights] = None
    c0: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.kappa_last <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa_last}")


@dataclass(frozen=True)
class UpdateInfo:
    """Diagnostics for one update; ``terminal_ok`` is None when nothing was checked."""

    kappa: float
    candidates: int
    terminal_ok: Optional[bool]
    rejected_small: bool = False
    skipped: str = ""


# --- terminal set ---

def _ae_ellipse(P):
    """Cholesky factor of the (a, e) block of P^-1 (shadow of the sublevel set)."""
    M = np.linalg.inv(np.asarray(P, dtype=float))[:2, :2]
    return M, np.linalg.cholesky(M)


def min_periapsis_on_level(x_des_virtual, P, c0: float) -> float:
    """Minimum of a(1 - e) over {X : V0(P, X, x_des_virtual) <= c0}.

    a(1 - e) is bilinear with an indefinite Hessian, so the minimum sits on
    the boundary of the (a, e) shadow ellipse; a dense angle sweep brackets
    it and a bounded scalar search polishes it.
    """
    xt = _as_vector(x_des_virtual)
    _, L = _ae_ellipse(P)
    scale = math.sqrt(2.0 * c0)

    def rp(phi):
        d = scale * (L @ np.array([np.cos(phi), np.sin(phi)]))
        return (xt[0] + d[0]) * (1.0 - xt[1] - d[1])

    phi = np.linspace(0.0, 2.0 * math.pi, _N_PHI, endpoint=False)
    d = scale * (L @ np.vstack([np.cos(phi), np.sin(phi)]))
    vals = (xt[0] + d[0]) * (1.0 - xt[1] - d[1])
    k = int(np.argmin(vals))
    step = 2.0 * math.pi / _N_PHI
    res = minimize_scalar(rp, bounds=(phi[k] - step, phi[k] + step), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, vals[k]))


def min_eccentricity_on_level(x_des_virtual, P, c0: float) -> float:
    xt = _as_vector(x_des_virtual)
    M, _ = _ae_ellipse(P)
    return float(xt[1] - math.sqrt(2.0 * c0 * M[1, 1]))


def terminal_level(x_des_virtual, w: Weights, cfg: ConstraintConfig) -> float:
    """Largest c0 with both margin constraints satisfied on Q(x_des_virtual).

    Raises:
        InfeasibleTerminalSet: the target itself sits on or inside a margin.
    """
    xt = _as_vector(x_des_virtual)
    r_floor = cfg.r_min + cfg.eps1
    e_floor = cfg.e_min + cfg.eps2
    if xt[0] * (1.0 - xt[1]) <= r_floor or xt[1] <= e_floor:
        raise InfeasibleTerminalSet(
            f"target has no slack beyond the margins (r_p = {xt[0] * (1.0 - xt[1]):.6f} km, "
            f"e = {xt[1]:.6g})")
    M, _ = _ae_ellipse(w.P)
    # the eccentricity bound is linear, so its level is closed form
    c_hi = (xt[1] - e_floor) ** 2 / (2.0 * M[1, 1])
    if min_periapsis_on_level(xt, w.P, c_hi) >= r_floor:
        return float(c_hi)
    lo, hi = 0.0, c_hi
    for _ in range(_C0_ITERS):
        mid = 0.5 * (lo + hi)
        if min_periapsis_on_level(xt, w.P, mid) >= r_floor:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return float(lo)


def cached_terminal_level(gcfg: GovernorConfig, x_des_virtual, w: Weights, cfg: ConstraintConfig):
    xt = _as_vector(x_des_virtual)
    key = (xt.tobytes(), w.P.tobytes(), cfg)
    if key not in gcfg.c0_table:
        gcfg.c0_table[key] = terminal_level(xt, w, cfg)
    return gcfg.c0_table[key]


def in_terminal_set(x, x_des_virtual, w: Weights, c0: float) -> bool:
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    return nominal_value(x, x_des_virtual, w.P) <= c0


# --- forward prediction ---

def predict_terminal(x, theta: float, x_des_virtual, loop: ClosedLoop, w: Weights,
                     t_hor: float) -> OrbitalElements:
    """Closed-loop state after t_hor seconds toward a fixed target, constant weights."""
    y0 = np.r_[_as_vector(x), float(theta)]
    _, states = loop.integrate(y0, t_hor, x_des_virtual, w)
    return OrbitalElements.from_array(states[-1, :5])


def _lands_in_q(y0, x_c, w, c0, loop, t_hor):
    """Terminal check: the state at the end of the horizon lies in Q.

    One uninterrupted integration, so the answer agrees bit for bit with
    ``predict_terminal`` and with the logged closed-loop propagation.
    """
    _, states = loop.integrate(y0, t_hor, x_c, w)
    return nominal_value(states[-1, :5], x_c, w.P) <= c0


def initialize_governor(x0, cfg: ConstraintConfig) -> GovernorState:
    """Start with the virtual target at the initial state (kappa = 0).

    Raises:
        InfeasibleInitialState: x0 violates a state constraint.
    """
    x0 = x0 if isinstance(x0, OrbitalElements) else OrbitalElements.from_array(x0)
    if not instantaneously_feasible(x0, cfg):
        raise InfeasibleInitialState(
            f"initial state violates the constraints (r_p = {x0.a * (1.0 - x0.e):.3f} km, "
            f"e = {x0.e:.6g})")
    return GovernorState(x0, 0.0)


def governor_update(gs: GovernorState, x, theta: float, x_des_final, gcfg: GovernorConfig,
                    loop: ClosedLoop, P=None):
    """One update of the virtual target.

    Each candidate target is paired with weights sized from the current
    state, and kept constant over the prediction. The target only moves
    while both barrier terms are inactive at the current state, so that the
    weight change that comes with it never alters the Lyapunov value.

    Returns:
        (GovernorState, UpdateInfo)
    """
    cfg = loop.constraints
    P = gs.weights.P if P is None else np.asarray(P, dtype=float)
    xv = gs.x_des_virtual.as_array()
    xf = _as_vector(x_des_final)
    d = xf - xv
    y0 = np.r_[_as_vector(x), float(theta)]

    if not np.any(d):
        return GovernorState(gs.x_des_virtual, 0.0, gs.weights, gs.c0), UpdateInfo(
            0.0, 0, None, skipped="at final target")
    if not barriers_inactive(x, cfg):
        return GovernorState(gs.x_des_virtual, 0.0, gs.weights, gs.c0), UpdateInfo(
            0.0, 0, None, skipped="barrier active")

    count = 0
    chosen = None

    def check(kappa):
        nonlocal count
        x_c = xf.copy() if kappa == 1.0 else xv + kappa * d
        try:
            c0 = cached_terminal_level(gcfg, x_c, Weights(P, 0.0, 0.0), cfg)
        except InfeasibleTerminalSet:
            return None
        w_c = sized_weights(x, x_c, cfg, P)
        count += 1
        if _lands_in_q(y0, x_c, w_c, c0, loop, gcfg.t_hor):
            return x_c, w_c, c0
        return None

    chosen = check(1.0)
    kappa = 1.0
    if chosen is None:
        lo, hi, best = 0.0, 1.0, None
        for _ in range(gcfg.bisection_iters):
            mid = 0.5 * (lo + hi)
            result = check(mid)
            if result is not None:
                lo, best = mid, result
            else:
                hi = mid
        kappa, chosen = lo, best

    if chosen is not None and gcfg.reject_small and kappa < 1.0:
        step = chosen[0] - xv
        if math.sqrt(float(step @ P @ step)) < gcfg.delta:
            return GovernorState(gs.x_des_virtual, 0.0, gs.weights, gs.c0), UpdateInfo(
                0.0, count, None, rejected_small=True)

    if chosen is None:
        ok = None
        if gs.weights is not None and gs.c0 is not None:
            ok = _lands_in_q(y0, xv, gs.weights, gs.c0, loop, gcfg.t_hor)
            count += 1
        return GovernorState(gs.x_des_virtual, 0.0, gs.weights, gs.c0), UpdateInfo(
            0.0, count, ok)

    x_c, w_c, c0 = chosen
    return (GovernorState(OrbitalElements.from_array(x_c), kappa, w_c, c0),
            UpdateInfo(kappa, count, True))
