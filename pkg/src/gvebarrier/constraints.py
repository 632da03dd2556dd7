"""Periapsis, thrust and eccentricity constraints.

Every slack is signed: non-negative means satisfied, and the boundary counts
as feasible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .orbit import OrbitalElements, _as_control


@dataclass(frozen=True)
class ConstraintConfig:
    r_min: float = 6628.0   # km
    e_min: float = 1e-3
    u_max: float = 1e-3     # km/s^2
    eps1: float = 25.0      # km
    eps2: float = 5e-4

    def __post_init__(self):
        for name in ("r_min", "e_min", "u_max", "eps1", "eps2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.r_min <= 0.0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")
        if self.e_min < 0.0:
            raise ValueError(f"e_min must be non-negative, got {self.e_min}")
        if self.u_max <= 0.0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")
        # the weight bounds divide by eps**2
        if self.eps1 <= 0.0:
            raise ValueError(f"eps1 must be positive, got {self.eps1}")
        if self.eps2 <= 0.0:
            raise ValueError(f"eps2 must be positive, got {self.eps2}")


def periapsis_slack(x: OrbitalElements, cfg: ConstraintConfig) -> float:
    return x.a * (1.0 - x.e) - cfg.r_min


def eccentricity_slack(x: OrbitalElements, cfg: ConstraintConfig) -> float:
    return x.e - cfg.e_min


def thrust_slack(u, cfg: ConstraintConfig) -> float:
    """u_max**2 - |u|**2, in km^2/s^4."""
    uv = _as_control(u)
    return cfg.u_max ** 2 - float(uv @ uv)


def instantaneously_feasible(x: OrbitalElements, cfg: ConstraintConfig) -> bool:
    return periapsis_slack(x, cfg) >= 0.0 and eccentricity_slack(x, cfg) >= 0.0


def slacks_array(elements: np.ndarray, cfg: ConstraintConfig):
    """Vectorized (c1, c3) over an (n, 5) array of element rows."""
    a = elements[:, 0]
    e = elements[:, 1]
    return a * (1.0 - e) - cfg.r_min, e - cfg.e_min
