"""Barrier-shaped Lyapunov feedback with thrust saturation.

The Lyapunov function is

    V(X) = 1/2 (X - X_des)^T P (X - X_des) + B1(X) + B2(X)

where B1 penalizes periapsis radius inside the margin r_min + eps1 and B2
penalizes eccentricity inside e_min + eps2. The nominal control is the
negative gradient of V pushed through the GVE matrix, and the applied
control is its projection onto the admissible thrust set, so V never
increases along closed-loop trajectories.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .constraints import ConstraintConfig
from .errors import ResetNotPermitted
from .orbit import BodyParams, ControlAccel, _as_control, _as_vector, check_guards

WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Weights:
    """Quadratic weight P (5x5, SPD) and barrier weights q1 [km^-2], q2.

    q1 = q2 = 0 switches the barriers off entirely.
    """

    P: np.ndarray
    q1: float
    q2: float

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape != (5, 5):
            raise ValueError(f"P must be 5x5, got shape {P.shape}")
        if not np.allclose(P, P.T, rtol=1e-12, atol=0.0):
            raise ValueError("P must be symmetric")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise ValueError("P must be positive definite") from None
        if not (math.isfinite(self.q1) and self.q1 >= 0.0):
            raise ValueError(f"q1 must be non-negative, got {self.q1}")
        if not (math.isfinite(self.q2) and self.q2 >= 0.0):
            raise ValueError(f"q2 must be non-negative, got {self.q2}")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def diagonal(cls, p_diag, q1: float, q2: float) -> "Weights":
        p_diag = np.asarray(p_diag, dtype=float)
        if p_diag.shape != (5,) or np.any(p_diag <= 0.0):
            raise ValueError("p_diag must hold 5 positive entries")
        return cls(np.diag(p_diag), float(q1), float(q2))

    @property
    def p_diag(self) -> np.ndarray:
        return np.diag(self.P).copy()

    @property
    def barriers_enabled(self) -> bool:
        return self.q1 > 0.0 or self.q2 > 0.0

    def with_barrier_weights(self, q1: float, q2: float) -> "Weights":
        return Weights(self.P, float(q1), float(q2))


# --- saturation modes ---

@dataclass(frozen=True)
class TwoNormBall:
    u_max: float

    def __post_init__(self):
        if not self.u_max > 0.0:
            raise ValueError("u_max must be positive")

    kernel_code = _kernels.SAT_BALL

    def kernel_params(self):
        return self.u_max, (0.0, 0.0, 0.0)

    def contains(self, u, tol=0.0) -> bool:
        u = _as_control(u)
        # same summation order as the saturation kernel
        return math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) <= self.u_max + tol


@dataclass(frozen=True)
class InfNormBox:
    bounds: tuple

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.bounds)
        if len(bounds) != 3 or any(not b > 0.0 for b in bounds):
            raise ValueError("InfNormBox needs three positive bounds")
        object.__setattr__(self, "bounds", bounds)

    kernel_code = _kernels.SAT_BOX

    def kernel_params(self):
        return 0.0, self.bounds

    def contains(self, u, tol=0.0) -> bool:
        return bool(np.all(np.abs(u) <= np.asarray(self.bounds) + tol))


class _BallProjector:
    def __init__(self, radius):
        self.radius = float(radius)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return _kernels.saturate(u, _kernels.SAT_BALL, self.radius, np.zeros(3))


class _BoxProjector:
    def __init__(self, bounds):
        self.lim = np.asarray(bounds, dtype=float)

    def __call__(self, u):
        return np.clip(np.asarray(u, dtype=float), -self.lim, self.lim)


@dataclass(frozen=True, eq=False)
class ConvexProjection:
    """Minimum 2-norm projection onto a convex compact set containing 0.

    Use ``ConvexProjection.ball`` / ``ConvexProjection.box`` for the built-in
    sets; ``ConvexProjection.custom`` wraps any projection operator after an
    idempotence check on random samples.
    """

    project: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"
    radius: float = 0.0
    bounds: tuple = field(default=(0.0, 0.0, 0.0))

    @classmethod
    def ball(cls, radius: float) -> "ConvexProjection":
        if not radius > 0.0:
            raise ValueError("radius must be positive")
        return cls(_BallProjector(radius), "ball", float(radius))

    @classmethod
    def box(cls, bounds) -> "ConvexProjection":
        bounds = tuple(float(b) for b in bounds)
        if len(bounds) != 3 or any(not b > 0.0 for b in bounds):
            raise ValueError("box needs three positive bounds")
        return cls(_BoxProjector(bounds), "box", 0.0, bounds)

    @classmethod
    def custom(cls, project, scale: float = 1e-3, samples: int = 256, seed: int = 0):
        check_projection(project, scale, samples, seed)
        return cls(project, "custom")

    @property
    def kernel_code(self):
        return {"ball": _kernels.SAT_BALL, "box": _kernels.SAT_BOX}.get(self.kind)

    def kernel_params(self):
        return self.radius, self.bounds

    def contains(self, u, tol=0.0) -> bool:
        """Membership via the fixed points of the projection."""
        uv = _as_control(u)
        return float(np.linalg.norm(np.asarray(self.project(uv), dtype=float) - uv)) <= tol


def check_projection(project, scale=1e-3, samples=256, seed=0, tol=1e-12):
    """Reject operators that are not idempotent or do not fix the origin."""
    rng = np.random.default_rng(seed)
    origin = np.asarray(project(np.zeros(3)), dtype=float)
    if origin.shape != (3,) or np.linalg.norm(origin) > tol * scale:
        raise ValueError("projection must map 0 to 0 (the set must contain the origin)")
    for u in rng.normal(scale=scale, size=(samples, 3)) * rng.uniform(0.1, 10.0, size=(samples, 1)):
        once = np.asarray(project(u), dtype=float)
        twice = np.asarray(project(once), dtype=float)
        if not np.all(np.isfinite(once)) or np.linalg.norm(twice - once) > tol * max(scale, np.linalg.norm(u)):
            raise ValueError("projection operator is not idempotent")


def saturate(u_nom, mode) -> ControlAccel:
    """Map the nominal control into the admissible set of ``mode``."""
    uv = _as_control(u_nom)
    if isinstance(mode, ConvexProjection):
        return ControlAccel.from_array(mode.project(uv))
    radius, bounds = mode.kernel_params()
    return ControlAccel.from_array(
        _kernels.saturate(uv, mode.kernel_code, radius, np.asarray(bounds, dtype=float)))


# --- Lyapunov function pieces ---

class BarrierTerms(NamedTuple):
    b1: float
    b2: float
    grad_b1: np.ndarray
    grad_b2: np.ndarray


def barrier_terms(x, cfg: ConstraintConfig, w: Weights) -> BarrierTerms:
    xv = _as_vector(x)
    b1, b2, g1, g2 = _kernels.barrier_terms(xv, w.q1, w.q2, cfg.r_min, cfg.e_min,
                                            cfg.eps1, cfg.eps2)
    return BarrierTerms(float(b1), float(b2), g1, g2)


def barriers_inactive(x, cfg: ConstraintConfig) -> bool:
    """True when both barrier terms vanish whatever the weights."""
    xv = _as_vector(x)
    return xv[0] * (1.0 - xv[1]) >= cfg.r_min + cfg.eps1 and xv[1] >= cfg.e_min + cfg.eps2


def nominal_value(x, x_des, P) -> float:
    """V0 = 1/2 (x - x_des)^T P (x - x_des) with raw angle differences."""
    dx = _as_vector(x) - _as_vector(x_des)
    return float(0.5 * dx @ np.asarray(P, dtype=float) @ dx)


def lyapunov_value(x, x_des, cfg: ConstraintConfig, w: Weights) -> float:
    terms = barrier_terms(x, cfg, w)
    return nominal_value(x, x_des, w.P) + terms.b1 + terms.b2


def pack_controller(x_des, cfg: ConstraintConfig, w: Weights, mode=None,
                    body: BodyParams = BodyParams()) -> np.ndarray:
    """Flatten everything the compiled feedback needs into one vector."""
    ctrl = np.zeros(_kernels.N_CTRL)
    ctrl[_kernels.I_XDES:_kernels.I_XDES + 5] = _as_vector(x_des)
    ctrl[_kernels.I_P:_kernels.I_P + 25] = np.asarray(w.P, dtype=float).ravel()
    ctrl[_kernels.I_Q1] = w.q1
    ctrl[_kernels.I_Q2] = w.q2
    ctrl[_kernels.I_RMIN] = cfg.r_min
    ctrl[_kernels.I_EMIN] = cfg.e_min
    ctrl[_kernels.I_EPS1] = cfg.eps1
    ctrl[_kernels.I_EPS2] = cfg.eps2
    code = _kernels.SAT_NONE
    if mode is not None and mode.kernel_code is not None:
        code = mode.kernel_code
        radius, bounds = mode.kernel_params()
        ctrl[_kernels.I_UMAX] = radius
        ctrl[_kernels.I_BOX:_kernels.I_BOX + 3] = bounds
    ctrl[_kernels.I_MODE] = code
    ctrl[_kernels.I_MU] = body.mu
    return ctrl


def nominal_control(x, theta: float, x_des, cfg: ConstraintConfig, w: Weights,
                    body: BodyParams = BodyParams()) -> ControlAccel:
    """U_nom = -G^T (P (X - X_des) + grad B1 + grad B2)."""
    xv = _as_vector(x)
    check_guards(xv)
    u, _ = _kernels.nominal_control(xv, float(theta), pack_controller(x_des, cfg, w, None, body))
    return ControlAccel.from_array(u)


def feedback(x, theta: float, x_des, cfg: ConstraintConfig, w: Weights, mode,
             body: BodyParams = BodyParams()) -> ControlAccel:
    return saturate(nominal_control(x, theta, x_des, cfg, w, body), mode)


def min_weights(v0: float, cfg: ConstraintConfig):
    """Smallest (q1, q2) that keep the barriers below their margin bounds."""
    if v0 < 0.0:
        raise ValueError(f"v0 must be non-negative, got {v0}")
    return 2.0 * v0 / cfg.eps1 ** 2, 2.0 * v0 / cfg.eps2 ** 2


def sized_weights(x, x_des, cfg: ConstraintConfig, P) -> Weights:
    q1, q2 = min_weights(nominal_value(x, x_des, P), cfg)
    return Weights(P, max(q1, WEIGHT_FLOOR), max(q2, WEIGHT_FLOOR))


def reset_weights(x, x_des, cfg: ConstraintConfig, w: Weights) -> Weights:
    """Resize q1, q2 from the current V0; only allowed with both barriers at zero.

    Raises:
        ResetNotPermitted: a barrier term is active at ``x``.
    """
    if not barriers_inactive(x, cfg):
        raise ResetNotPermitted("cannot reset barrier weights while a barrier is active")
    return sized_weights(x, x_des, cfg, w.P)
