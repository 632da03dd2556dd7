"""Sampled closed-loop trajectories, stored column-wise."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraints import ConstraintConfig, slacks_array
from .orbit import ControlAccel, OrbitalElements


@dataclass(frozen=True)
class TrajectoryRecord:
    """One logged sample; ``governor`` is (kappa, x_des_virtual, in_terminal) or None."""

    t: float
    elements: OrbitalElements
    theta: float
    u: ControlAccel
    v: float
    b1: float
    b2: float
    q1: float
    q2: float
    slacks: tuple
    governor: Optional[tuple] = None


def _column(values, n, fill=np.nan):
    if values is None:
        return np.full(n, fill)
    return np.asarray(values, dtype=float)


@dataclass(eq=False)
class TrajectoryLog:
    """Column arrays for every logged sample.

    ``elements`` is (n, 5) and ``u`` is (n, 3). Lyapunov and weight columns
    are NaN for logs produced by the generic propagator, which knows nothing
    about the controller. Governor columns are None on governor-free runs.
    """

    t: np.ndarray
    elements: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray = None
    b1: np.ndarray = None
    b2: np.ndarray = None
    q1: np.ndarray = None
    q2: np.ndarray = None
    constraints: ConstraintConfig = field(default_factory=ConstraintConfig)
    kappa: Optional[np.ndarray] = None
    x_des_virtual: Optional[np.ndarray] = None
    in_terminal: Optional[np.ndarray] = None
    entered_terminal: bool = False
    convergence_time: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.size
        self.elements = np.asarray(self.elements, dtype=float).reshape(n, 5)
        self.theta = np.asarray(self.theta, dtype=float).reshape(n)
        self.u = np.asarray(self.u, dtype=float).reshape(n, 3)
        for name in ("v", "b1", "b2", "q1", "q2"):
            setattr(self, name, _column(getattr(self, name), n))
        if n > 1 and not np.all(np.diff(self.t) > 0.0):
            raise ValueError("log times must be strictly increasing")

    def __len__(self):
        return self.t.size

    @property
    def has_governor(self) -> bool:
        return self.kappa is not None

    @property
    def c1_slack(self) -> np.ndarray:
        return slacks_array(self.elements, self.constraints)[0]

    @property
    def c3_slack(self) -> np.ndarray:
        return slacks_array(self.elements, self.constraints)[1]

    @property
    def u_norm(self) -> np.ndarray:
        u = self.u
        # same summation order as the saturation kernel
        return np.sqrt(u[:, 0] * u[:, 0] + u[:, 1] * u[:, 1] + u[:, 2] * u[:, 2])

    @property
    def final_elements(self) -> OrbitalElements:
        return OrbitalElements.from_array(self.elements[-1])

    def record(self, k: int) -> TrajectoryRecord:
        gov = None
        if self.has_governor:
            gov = (float(self.kappa[k]), OrbitalElements.from_array(self.x_des_virtual[k]),
                   bool(self.in_terminal[k]))
        c1 = float(self.elements[k, 0] * (1.0 - self.elements[k, 1]) - self.constraints.r_min)
        c3 = float(self.elements[k, 1] - self.constraints.e_min)
        return TrajectoryRecord(
            float(self.t[k]), OrbitalElements.from_array(self.elements[k]), float(self.theta[k]),
            ControlAccel.from_array(self.u[k]), float(self.v[k]), float(self.b1[k]),
            float(self.b2[k]), float(self.q1[k]), float(self.q2[k]),
            (c1, c3, float(self.u_norm[k:k + 1][0])), gov)

    def records(self):
        return [self.record(k) for k in range(len(self))]

    def summary(self) -> dict:
        return {
            "samples": len(self),
            "t_final": float(self.t[-1]),
            "min_c1_slack": float(self.c1_slack.min()),
            "min_c3_slack": float(self.c3_slack.min()),
            "max_u_norm": float(self.u_norm.max()),
            "max_dv": float(np.max(np.diff(self.v))) if len(self) > 1 else 0.0,
            "entered_terminal": self.entered_terminal,
            "convergence_time": self.convergence_time,
        }
