"""Two-body orbit geometry and the Gauss variational equations.

Slow elements are ordered (a, e, i, raan, argp) throughout; the true anomaly
is carried separately and never wrapped.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EccentricitySingularity, InclinationSingularity

MU_EARTH = 398600.4418  # km^3/s^2

E_GUARD = _kernels.E_GUARD
SIN_I_GUARD = _kernels.SIN_I_GUARD


@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements of an elliptic orbit (km, rad)."""

    a: float
    e: float
    i: float
    raan: float
    argp: float

    def __post_init__(self):
        values = (self.a, self.e, self.i, self.raan, self.argp)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"orbital elements must be finite, got {values}")
        if self.a <= 0.0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.e}")
        if not 0.0 <= self.i <= math.pi:
            raise ValueError(f"inclination must be in [0, pi], got {self.i}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.e, self.i, self.raan, self.argp], dtype=float)

    @classmethod
    def from_array(cls, values) -> "OrbitalElements":
        a, e, i, raan, argp = (float(v) for v in values)
        return cls(a, e, i, raan, argp)

    def replace(self, **changes) -> "OrbitalElements":
        fields = dict(a=self.a, e=self.e, i=self.i, raan=self.raan, argp=self.argp)
        fields.update(changes)
        return OrbitalElements(**fields)


@dataclass(frozen=True)
class ControlAccel:
    """Thrust acceleration resolved in the STW frame (km/s^2)."""

    s: float
    t: float
    w: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.s, self.t, self.w)):
            raise ValueError("control components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.t, self.w], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ControlAccel":
        s, t, w = (float(v) for v in values)
        return cls(s, t, w)

    @classmethod
    def zero(cls) -> "ControlAccel":
        return cls(0.0, 0.0, 0.0)

    def norm(self) -> float:
        return math.sqrt(self.s * self.s + self.t * self.t + self.w * self.w)


@dataclass(frozen=True)
class BodyParams:
    mu: float = MU_EARTH

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be positive, got {self.mu}")


@dataclass(frozen=True)
class CartesianState:
    position: np.ndarray  # km, inertial
    velocity: np.ndarray  # km/s

    def angular_momentum(self) -> np.ndarray:
        return np.cross(self.position, self.velocity)


def _as_vector(x) -> np.ndarray:
    return x.as_array() if isinstance(x, OrbitalElements) else np.asarray(x, dtype=float)


def _as_control(u) -> np.ndarray:
    return u.as_array() if isinstance(u, ControlAccel) else np.asarray(u, dtype=float)


def check_guards(x, need_e=True, need_sin_i=True):
    """Raise the matching singularity error if a GVE denominator vanishes."""
    xv = _as_vector(x)
    if need_e and xv[1] < E_GUARD:
        raise EccentricitySingularity(f"eccentricity {xv[1]:.3e} below guard {E_GUARD:.0e}")
    if need_sin_i and abs(math.sin(xv[2])) < SIN_I_GUARD:
        raise InclinationSingularity(f"|sin i| below guard {SIN_I_GUARD:.0e} (i = {xv[2]!r})")


def semi_latus_rectum(x: OrbitalElements) -> float:
    return x.a * (1.0 - x.e * x.e)


def radius(x: OrbitalElements, theta: float) -> float:
    return semi_latus_rectum(x) / (1.0 + x.e * math.cos(theta))


def cos_eccentric_anomaly(x: OrbitalElements, theta: float) -> float:
    """cos(psi) = (1 - r/a)/e, clamped to [-1, 1]."""
    check_guards(x, need_sin_i=False)
    value = (1.0 - radius(x, theta) / x.a) / x.e
    return min(1.0, max(-1.0, value))


def gve_matrix(x, theta: float, body: BodyParams = BodyParams()) -> np.ndarray:
    """Control-influence matrix G with d(a, e, i, raan, argp)/dt = G @ (S, T, W).

    Raises:
        EccentricitySingularity: e below the guard (argp row divides by e).
        InclinationSingularity: |sin i| below the guard (raan row divides by sin i).
    """
    xv = _as_vector(x)
    check_guards(xv)
    return _kernels.gve_matrix(xv, float(theta), body.mu)


def theta_rate(x, theta: float, u, body: BodyParams = BodyParams()) -> float:
    """True-anomaly rate: Keplerian term plus the control-dependent terms."""
    xv = _as_vector(x)
    uv = _as_control(u)
    if uv[0] != 0.0 or uv[1] != 0.0:
        check_guards(xv, need_sin_i=False)
    return float(_kernels.theta_rate(xv, float(theta), uv, body.mu))


def state_derivative(x, theta: float, u, body: BodyParams = BodyParams()):
    """Return (element rates, theta rate) of the drift-free GVE system."""
    G = gve_matrix(x, theta, body)
    uv = _as_control(u)
    return G @ uv, theta_rate(x, theta, uv, body)


def orbital_period(x: OrbitalElements, body: BodyParams = BodyParams()) -> float:
    return 2.0 * math.pi * math.sqrt(x.a ** 3 / body.mu)


def _perifocal_rotation(i, raan, argp):
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(i), math.sin(i)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])


def elements_to_cartesian(x: OrbitalElements, theta: float,
                          body: BodyParams = BodyParams()) -> CartesianState:
    p = semi_latus_rectum(x)
    r = p / (1.0 + x.e * math.cos(theta))
    ct, st = math.cos(theta), math.sin(theta)
    r_pf = np.array([r * ct, r * st, 0.0])
    v_pf = math.sqrt(body.mu / p) * np.array([-st, x.e + ct, 0.0])
    R = _perifocal_rotation(x.i, x.raan, x.argp)
    return CartesianState(R @ r_pf, R @ v_pf)


def cartesian_to_elements(state: CartesianState, body: BodyParams = BodyParams()):
    """Inverse of ``elements_to_cartesian``; angles returned in [0, 2*pi).

    Circular orbits get argp = 0 and equatorial ones raan = 0, with the
    remaining angle folded into theta.

    Returns:
        (OrbitalElements, theta)
    """
    r_vec = np.asarray(state.position, dtype=float)
    v_vec = np.asarray(state.velocity, dtype=float)
    mu = body.mu
    r = np.linalg.norm(r_vec)
    h_vec = np.cross(r_vec, v_vec)
    h = np.linalg.norm(h_vec)
    if r <= 0.0 or h <= 0.0:
        raise ValueError("degenerate state: zero radius or angular momentum")
    energy = 0.5 * v_vec @ v_vec - mu / r
    if energy >= 0.0:
        raise ValueError("state is not on an elliptic orbit")
    a = -mu / (2.0 * energy)
    e_vec = np.cross(v_vec, h_vec) / mu - r_vec / r
    e = float(np.linalg.norm(e_vec))
    h_hat = h_vec / h
    inc = math.atan2(math.hypot(h_vec[0], h_vec[1]), h_vec[2])

    two_pi = 2.0 * math.pi
    node = np.array([-h_vec[1], h_vec[0], 0.0])
    node_norm = np.linalg.norm(node)
    if node_norm > 1e-12 * h:
        raan = math.atan2(h_vec[0], -h_vec[1]) % two_pi
        n_hat = node / node_norm
    else:
        raan = 0.0
        n_hat = np.array([1.0, 0.0, 0.0])
    m_hat = np.cross(h_hat, n_hat)  # in-plane, 90 deg ahead of the node

    if e > 1e-12:
        argp = math.atan2(e_vec @ m_hat, e_vec @ n_hat) % two_pi
        p_hat = e_vec / e
    else:
        argp = 0.0
        p_hat = n_hat
    q_hat = np.cross(h_hat, p_hat)
    theta = math.atan2(r_vec @ q_hat, r_vec @ p_hat) % two_pi
    return OrbitalElements(a, e, inc, raan, argp), theta


def stw_basis(state: CartesianState) -> np.ndarray:
    """Rows are the radial, transverse and normal unit vectors."""
    r_vec = np.asarray(state.position, dtype=float)
    e_r = r_vec / np.linalg.norm(r_vec)
    h_vec = state.angular_momentum()
    e_h = h_vec / np.linalg.norm(h_vec)
    e_t = np.cross(e_h, e_r)
    return np.vstack([e_r, e_t, e_h])
