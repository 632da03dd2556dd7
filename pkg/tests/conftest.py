import numpy as np
import pytest

from gvebarrier import OrbitalElements, load_scenario, run_closed_loop

MU = 398600.4418

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []

_RUNS = {}


def cached_run(name, use_governor=True):
    """Shipped scenario runs are shared between test modules."""
    key = (name, use_governor)
    if key not in _RUNS:
        _RUNS[key] = run_closed_loop(load_scenario(name), use_governor=use_governor)
    return _RUNS[key]


def random_feasible_elements(rng, margin=75.0, e_range=(0.01, 0.7)):
    """Elements with periapsis well above r_min + eps1."""
    while True:
        a = rng.uniform(8000.0, 30000.0)
        e = rng.uniform(*e_range)
        if a * (1.0 - e) > 6628.0 + 25.0 + margin:
            break
    return OrbitalElements(a, e, rng.uniform(0.2, np.pi - 0.2), rng.uniform(0.0, 2 * np.pi),
                           rng.uniform(0.0, 2 * np.pi))


@pytest.fixture(scope="session")
def fig1():
    return load_scenario("paper_fig1")


@pytest.fixture(scope="session")
def fig1_log():
    return cached_run("paper_fig1")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
