"""Constrained Lyapunov feedback for low-thrust orbit transfers.

Dynamics are the Gauss variational equations in classical elements. The
controller adds barrier terms for periapsis radius and eccentricity to a
quadratic Lyapunov function and saturates the thrust; an optional
convergence governor moves a virtual target toward the real one.
"""

from .constraints import (ConstraintConfig, eccentricity_slack, instantaneously_feasible,
                          periapsis_slack, thrust_slack)
from .controller import (ConvexProjection, InfNormBox, TwoNormBall, Weights, barrier_terms,
                         feedback, lyapunov_value, min_weights, nominal_control, nominal_value,
                         reset_weights, saturate)
from .errors import (ConfigError, EccentricitySingularity, GveBarrierError,
                     InclinationSingularity, InfeasibleInitialState, InfeasibleTerminalSet,
                     IntegrationFailure, ParseError, ResetNotPermitted, SingularityError,
                     ValidationError)
from .governor import (GovernorConfig, GovernorState, governor_update, in_terminal_set,
                       initialize_governor, predict_terminal, terminal_level)
from .harness import (GridStudyResult, run_c0_sweep, run_closed_loop, run_governor_comparison,
                      run_grid_study)
from .orbit import (MU_EARTH, BodyParams, CartesianState, ControlAccel, OrbitalElements,
                    cartesian_to_elements, cos_eccentric_anomaly, elements_to_cartesian,
                    gve_matrix, radius, semi_latus_rectum, state_derivative, theta_rate)
from .propagation import ClosedLoop, propagate
from .scenario import ScenarioConfig, load_scenario
from .telemetry import read_csv, write_csv
from .trajectory import TrajectoryLog, TrajectoryRecord

__version__ = "0.1.0"
