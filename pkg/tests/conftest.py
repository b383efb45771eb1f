import numpy as np
import pytest

from qadrude.field import SimulationBox, build_realization, evaluate_field
from qadrude.hamiltonian import build_hamiltonian
from qadrude.materials import get_material


@pytest.fixture
def lsco():
    return get_material("LSCO")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_problem(lsco):
    """16x16 LSCO landscape at 300 K, small enough for dense cross-checks."""
    box = SimulationBox.largest(lsco, 16)
    f = build_realization(lsco, box, 300.0, seed=3)
    h = build_hamiltonian(evaluate_field(f, box), lsco, box)
    return lsco, box, f, h


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"{label:<34} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
