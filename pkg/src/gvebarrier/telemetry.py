"""CSV output for trajectory logs, grid studies and c0 sweeps.

Headers carry units in brackets (``a[km]``). Floats are written with 17
significant digits so a read-back reproduces every value exactly.
"""

import csv
import math
import re
from pathlib import Path

import numpy as np

from .harness import C0Point, GridStudyResult
from .trajectory import TrajectoryLog

TRAJECTORY_COLUMNS = [
    ("t", "s"), ("a", "km"), ("e", "-"), ("i", "rad"), ("raan", "rad"), ("argp", "rad"),
    ("theta", "rad"), ("s", "km/s^2"), ("t_acc", "km/s^2"), ("w", "km/s^2"),
    ("v", "-"), ("b1", "-"), ("b2", "-"), ("q1", "km^-2"), ("q2", "-"),
    ("c1_slack", "km"), ("c3_slack", "-"), ("u_norm", "km/s^2"), ("in_terminal", "bool"),
]
GOVERNOR_COLUMNS = [
    ("kappa", "-"), ("xv_a", "km"), ("xv_e", "-"), ("xv_i", "rad"), ("xv_raan", "rad"),
    ("xv_argp", "rad"),
]
GRID_COLUMNS = [
    ("a0", "km"), ("e0", "-"), ("feasible", "bool"), ("converged", "bool"),
    ("convergence_time", "s"), ("min_c1_slack", "km"), ("min_c3_slack", "-"), ("error", "text"),
]
C0_COLUMNS = [
    ("s", "-"), ("a", "km"), ("e", "-"), ("i", "rad"), ("raan", "rad"), ("argp", "rad"),
    ("c0", "-"), ("error", "text"),
]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def _header(columns):
    return [f"{name}[{unit}]" for name, unit in columns]


def _trajectory_rows(log: TrajectoryLog):
    columns = list(TRAJECTORY_COLUMNS)
    data = [log.t, *log.elements.T, log.theta, *log.u.T, log.v, log.b1, log.b2, log.q1, log.q2,
            log.c1_slack, log.c3_slack, log.u_norm]
    flags = log.in_terminal if log.in_terminal is not None else np.zeros(len(log), dtype=bool)
    if log.has_governor:
        columns += GOVERNOR_COLUMNS
    rows = []
    for k in range(len(log)):
        row = [fmt(col[k]) for col in data] + [fmt(bool(flags[k]))]
        if log.has_governor:
            row += [fmt(log.kappa[k])] + [fmt(v) for v in log.x_des_virtual[k]]
        rows.append(row)
    return columns, rows


def _grid_rows(result: GridStudyResult):
    rows = [[fmt(c.a0), fmt(c.e0), fmt(c.feasible), fmt(c.converged), fmt(c.convergence_time),
             fmt(c.min_c1_slack), fmt(c.min_c3_slack), c.error] for c in result.cells]
    return GRID_COLUMNS, rows


def _c0_rows(points):
    rows = [[fmt(p.s), *(fmt(v) for v in p.elements), fmt(p.c0), p.error] for p in points]
    return C0_COLUMNS, rows


def write_csv(obj, path):
    """Write a TrajectoryLog, GridStudyResult, list of C0Point or summary dicts.

    Raises:
        OSError: the file could not be written; the message names the path.
    """
    if isinstance(obj, TrajectoryLog):
        columns, rows = _trajectory_rows(obj)
        header = _header(columns)
    elif isinstance(obj, GridStudyResult):
        columns, rows = _grid_rows(obj)
        header = _header(columns)
    elif isinstance(obj, list) and (not obj or isinstance(obj[0], C0Point)):
        columns, rows = _c0_rows(obj)
        header = _header(columns)
    elif isinstance(obj, list) and isinstance(obj[0], dict):
        header = list(obj[0])
        for extra in obj[1:]:
            header += [k for k in extra if k not in header]
        rows = [[fmt(row.get(k)) for k in header] for row in obj]
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> dict:
    """Read a CSV written by ``write_csv`` into name -> column (units stripped).

    Numeric columns come back as float arrays; text columns as lists.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = [re.sub(r"\[.*\]$", "", h) for h in header]
    out = {}
    for j, name in enumerate(names):
        raw = [r[j] for r in rows]
        try:
            out[name] = np.array([float(v) if v != "" else np.nan for v in raw])
        except ValueError:
            out[name] = raw
    return out
