import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pmdsim import build_epsilon_machine, model_for, validate_pmd  # noqa: E402

GAMMAS = tuple(round(0.45 + 0.01 * i, 2) for i in range(20))
FULL_GRID = [(n, g, 0.4) for n in range(3, 9) for g in GAMMAS]

_acceptance_lines = []


def record_acceptance(line):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_params():
    return validate_pmd(0.5, 0.4, 4)


@pytest.fixture(scope="session")
def ref_machine(ref_params):
    return build_epsilon_machine(ref_params)


@pytest.fixture(scope="session")
def ref_model(ref_params):
    return model_for(ref_params)
