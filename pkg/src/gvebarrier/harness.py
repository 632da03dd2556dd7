"""Simulation drivers: single runs, the grid study, c0 sweeps, governor comparisons."""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraints import instantaneously_feasible
from .controller import Weights, barriers_inactive, reset_weights, sized_weights
from .errors import GveBarrierError, InfeasibleTerminalSet
from .governor import governor_update, initialize_governor, terminal_level
from .orbit import _as_vector
from .propagation import log_times
from .scenario import HOUR, ScenarioConfig
from .trajectory import TrajectoryLog


def _event_times(t_final, period):
    if period is None:
        return np.zeros(1)
    n = int(np.ceil(t_final / period))
    times = period * np.arange(n)
    return times[times < t_final - 1e-9 * period]


def _segment_logs(samples, t0, t1, last):
    """Log times in [t0, t1), plus t1 itself on the final segment."""
    upper = samples <= t1 if last else samples < t1 - 1e-9
    mask = (samples >= t0 - 1e-9) & upper
    return samples[mask]


def run_closed_loop(cfg: ScenarioConfig, use_governor: bool = True,
                    stop_on_convergence: bool = False) -> TrajectoryLog:
    """Propagate the scenario, with resets or governor updates at fixed instants.

    Without a governor, weights are resized every ``reset_period`` whenever
    both barriers are inactive. With one, the virtual target and its weights
    are updated every ``update_period`` and nothing else changes the weights.

    Raises:
        SingularityError, IntegrationFailure: the propagation broke down; the
            message carries the simulation time.
    """
    loop = cfg.loop()
    P = cfg.P
    gcfg = cfg.governor if use_governor else None
    x_final = cfg.x_des.as_array()
    c0_final = terminal_level(x_final, Weights(P, 0.0, 0.0), cfg.constraints)

    samples = log_times(cfg.t_final, cfg.log_period)
    events = _event_times(cfg.t_final, gcfg.update_period if gcfg else cfg.reset_period)
    bounds = np.append(events, cfg.t_final)

    if gcfg is not None:
        gs = initialize_governor(cfg.x0, cfg.constraints)
        try:
            c0 = terminal_level(cfg.x0, Weights(P, 0.0, 0.0), cfg.constraints)
        except InfeasibleTerminalSet:
            c0 = None
        w0 = Weights(P, 0.0, 0.0) if cfg.barriers_disabled else None
        w0 = w0 or sized_weights(cfg.x0, cfg.x0, cfg.constraints, P)
        gs = type(gs)(gs.x_des_virtual, 0.0, w0, c0)
        target = gs.x_des_virtual.as_array()
        weights = gs.weights
    else:
        target = x_final
        weights = cfg.initial_weights()

    y = np.r_[cfg.x0.as_array(), cfg.theta0]
    cols = {k: [] for k in ("t", "y", "u", "v", "b1", "b2", "q1", "q2", "kappa", "xv")}
    updates = []
    kappa = 0.0
    convergence_time = None

    for k, t0 in enumerate(events):
        t1 = bounds[k + 1]
        if gcfg is not None:
            gs, info = governor_update(gs, y[:5], y[5], x_final, gcfg, loop, P)
            updates.append((float(t0), info))
            target, weights, kappa = gs.x_des_virtual.as_array(), gs.weights, info.kappa
        elif k > 0 and not cfg.barriers_disabled and barriers_inactive(y[:5], cfg.constraints):
            weights = reset_weights(y[:5], target, cfg.constraints, weights)

        seg_logs = _segment_logs(samples, t0, t1, k == len(events) - 1)
        local = seg_logs - t0
        grid, states = loop.integrate(y, t1 - t0, target, weights, local, t_start=float(t0))
        rows = states[np.searchsorted(grid, np.clip(local, 0.0, None))]
        if rows.shape[0]:
            u, v, b1, b2, _ = loop.sample_columns(rows, target, weights)
            n = rows.shape[0]
            cols["t"].append(seg_logs)
            cols["y"].append(rows)
            cols["u"].append(u)
            cols["v"].append(v)
            cols["b1"].append(b1)
            cols["b2"].append(b2)
            cols["q1"].append(np.full(n, weights.q1))
            cols["q2"].append(np.full(n, weights.q2))
            cols["kappa"].append(np.full(n, kappa))
            cols["xv"].append(np.tile(target, (n, 1)))
            if convergence_time is None:
                dx = rows[:, :5] - x_final
                inside = 0.5 * np.einsum("ij,jk,ik->i", dx, P, dx) <= c0_final
                if inside.any():
                    j = int(np.argmax(inside))
                    convergence_time = float(seg_logs[j])
                    if stop_on_convergence:
                        for key in cols:
                            cols[key][-1] = cols[key][-1][:j + 1]
                        break
        y = states[-1]

    cat = {key: np.concatenate(val) for key, val in cols.items()}
    dx = cat["y"][:, :5] - x_final
    in_terminal = 0.5 * np.einsum("ij,jk,ik->i", dx, P, dx) <= c0_final
    governed = gcfg is not None
    return TrajectoryLog(
        cat["t"], cat["y"][:, :5], cat["y"][:, 5], cat["u"], cat["v"], cat["b1"], cat["b2"],
        cat["q1"], cat["q2"], cfg.constraints,
        kappa=cat["kappa"] if governed else None,
        x_des_virtual=cat["xv"] if governed else None,
        in_terminal=in_terminal,
        entered_terminal=convergence_time is not None,
        convergence_time=convergence_time,
        meta={"scenario": cfg.name, "c0_final": c0_final, "updates": updates,
              "x_des": x_final, "P": P},
    )


# --- grid study ---

@dataclass(frozen=True)
class GridCell:
    a0: float
    e0: float
    feasible: bool
    converged: bool = False
    convergence_time: Optional[float] = None
    min_c1_slack: Optional[float] = None
    min_c3_slack: Optional[float] = None
    error: str = ""


@dataclass
class GridStudyResult:
    cells: list = field(default_factory=list)

    def __post_init__(self):
        for c in self.cells:
            if c.converged and not c.feasible:
                raise ValueError("a converged cell must be feasible")

    @property
    def feasible(self):
        return [c for c in self.cells if c.feasible]

    @property
    def converged_fraction(self) -> float:
        feas = self.feasible
        return sum(c.converged for c in feas) / len(feas) if feas else 1.0


def default_grid():
    return np.arange(7378.0, 30378.0 + 0.5, 1000.0), np.round(np.arange(0.05, 0.85 + 1e-9, 0.1), 12)


def _run_cell(args):
    base, a0, e0 = args
    x0 = base.x0.replace(a=float(a0), e=float(e0))
    if not instantaneously_feasible(x0, base.constraints):
        return GridCell(float(a0), float(e0), False)
    try:
        log = run_closed_loop(base.replace(x0=x0), use_governor=False, stop_on_convergence=True)
    except GveBarrierError as exc:
        return GridCell(float(a0), float(e0), True, error=f"{type(exc).__name__}: {exc}")
    return GridCell(float(a0), float(e0), True, log.entered_terminal, log.convergence_time,
                    float(log.c1_slack.min()), float(log.c3_slack.min()))


def run_grid_study(base: ScenarioConfig, a_values=None, e_values=None, horizon=40.0 * HOUR,
                   workers: Optional[int] = None) -> GridStudyResult:
    """Run every mesh cell to ``horizon`` (or until it enters Q of the target).

    Infeasible initial states are recorded and skipped. Cells are independent,
    so they run in a process pool when more than one worker is available.
    """
    da, de = default_grid()
    a_values = da if a_values is None else np.asarray(a_values, dtype=float)
    e_values = de if e_values is None else np.asarray(e_values, dtype=float)
    base = base.replace(t_final=float(horizon), governor=None)
    jobs = [(base, a, e) for a in a_values for e in e_values]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    return GridStudyResult(cells)


def grid_values(start: float, stop: float, step: float) -> np.ndarray:
    if not step > 0.0:
        raise ValueError("grid step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


# --- c0 sweep ---

@dataclass(frozen=True)
class C0Point:
    s: float
    elements: tuple
    c0: Optional[float]
    error: str = ""


def run_c0_sweep(x0, x_des, n_points: int, P, cfg) -> list:
    """terminal_level at evenly spaced virtual targets on the segment x0 -> x_des."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    x0 = _as_vector(x0)
    x_des = _as_vector(x_des)
    w = Weights(np.asarray(P, dtype=float), 0.0, 0.0)
    out = []
    for s in np.linspace(0.0, 1.0, n_points):
        xv = x_des.copy() if s == 1.0 else x0 + s * (x_des - x0)
        try:
            out.append(C0Point(float(s), tuple(xv), terminal_level(xv, w, cfg)))
        except InfeasibleTerminalSet as exc:
            out.append(C0Point(float(s), tuple(xv), None, str(exc)))
    return out


# --- governor comparison ---

@dataclass
class GovernorComparison:
    baseline: TrajectoryLog
    runs: dict
    summary: list


def _summary_row(label, log):
    row = {"run": label}
    row.update(log.summary())
    if log.has_governor:
        row["kappa_min"] = float(log.kappa.min())
        row["kappa_max"] = float(log.kappa.max())
    return row


def run_governor_comparison(cfg: ScenarioConfig, horizons) -> GovernorComparison:
    """Governor-free baseline plus one governed run per horizon (seconds)."""
    if cfg.governor is None and len(horizons):
        raise ValueError("scenario has no governor section")
    baseline = run_closed_loop(cfg, use_governor=False)
    runs = {}
    summary = [_summary_row("baseline", baseline)]
    for h in horizons:
        gcfg = type(cfg.governor)(float(h), cfg.governor.update_period,
                                  cfg.governor.bisection_iters, cfg.governor.delta,
                                  cfg.governor.reject_small)
        log = run_closed_loop(cfg.replace(governor=gcfg))
        runs[float(h)] = log
        summary.append(_summary_row(f"t_hor={h / HOUR:g}h", log))
    return GovernorComparison(baseline, runs, summary)
