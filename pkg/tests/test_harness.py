import math

import numpy as np
import pytest

from gvebarrier import (OrbitalElements, TrajectoryLog, load_scenario, run_closed_loop,
                        run_governor_comparison, run_grid_study)
from gvebarrier.harness import grid_values, run_c0_sweep
from gvebarrier.scenario import HOUR


def test_near_identity_run(fig1):
    # full thrust moves i by ~5e-4 rad per second here, so a millisecond is used
    log = run_closed_loop(fig1.replace(t_final=1e-3, log_period=1e-3))
    assert len(log) >= 2
    change = np.abs(log.elements[-1] - log.elements[0]) / np.maximum(np.abs(log.elements[0]), 1.0)
    assert change.max() < 1e-6


def test_log_grid(fig1_log):
    assert fig1_log.t[0] == 0.0 and fig1_log.t[-1] == 40 * HOUR
    assert np.all(np.diff(fig1_log.t) == 60.0)
    assert fig1_log.meta["scenario"] == "paper_fig1"


def test_deterministic(fig1):
    a = run_closed_loop(fig1.replace(t_final=3 * HOUR))
    b = run_closed_loop(fig1.replace(t_final=3 * HOUR))
    assert np.array_equal(a.elements, b.elements) and np.array_equal(a.u, b.u)


def test_log_grid_does_not_change_trajectory(fig1):
    coarse = run_closed_loop(fig1.replace(t_final=3 * HOUR, log_period=360.0))
    fine = run_closed_loop(fig1.replace(t_final=3 * HOUR, log_period=60.0))
    assert np.array_equal(coarse.elements, fine.elements[::6])


def test_records(fig1_log):
    rec = fig1_log.record(10)
    assert rec.t == 600.0 and rec.governor is None
    assert rec.slacks[0] == pytest.approx(fig1_log.c1_slack[10])


def test_log_validation():
    with pytest.raises(ValueError):
        TrajectoryLog([0.0, 0.0], np.zeros((2, 5)), [0.0, 0.0], np.zeros((2, 3)))


def test_grid_cells(fig1):
    result = run_grid_study(fig1, [21378.0, 6000.0], [0.65], 40 * HOUR, workers=1)
    good, bad = result.cells
    assert good.feasible and good.converged and good.error == ""
    assert good.convergence_time < 40 * HOUR
    assert not bad.feasible and bad.converged is False and bad.convergence_time is None
    assert result.converged_fraction == 1.0


def test_grid_values():
    assert grid_values(0.05, 0.25, 0.1).tolist() == pytest.approx([0.05, 0.15, 0.25])
    with pytest.raises(ValueError):
        grid_values(0.0, 1.0, 0.0)


def test_c0_sweep_endpoints(fig1):
    pts = run_c0_sweep(fig1.x0, fig1.x_des, 3, fig1.P, fig1.constraints)
    assert [p.s for p in pts] == [0.0, 0.5, 1.0]
    assert pts[0].c0 > 0.0
    assert pts[-1].elements == tuple(fig1.x_des.as_array())


def test_governor_comparison_without_horizons(fig1):
    result = run_governor_comparison(load_scenario("paper_fig5").replace(t_final=HOUR), [])
    assert result.runs == {} and len(result.summary) == 1


def test_infeasible_initial_state_rejected(fig1):
    with pytest.raises(ValueError):
        fig1.replace(x0=OrbitalElements(6600.0, 0.01, math.pi / 10, 0.0, math.pi))
