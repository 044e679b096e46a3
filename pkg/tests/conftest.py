import numpy as np
import pytest

from phlab.torus import (
    IntegerMatrix,
    SuspensionFlow,
    ToralDiffeo,
    TrigPerturbation,
    TrigTerm,
    cat_matrix,
)

PH3 = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]
LN_PHI2 = float(np.log((3 + np.sqrt(5)) / 2))  # log of the cat map's expanding eigenvalue


def ph3_map(s: float = 0.0) -> ToralDiffeo:
    terms = (TrigTerm((0.5, 0.5, 0.5), (1, 0, 0)), TrigTerm((0.5, 0.5, 0.0), (0, 0, 1)))
    return ToralDiffeo(IntegerMatrix(PH3), TrigPerturbation(terms if s else (), s))


@pytest.fixture
def cat():
    return ToralDiffeo(cat_matrix())


@pytest.fixture
def cat_perturbed():
    return ToralDiffeo(cat_matrix(), TrigPerturbation((TrigTerm((1.0, 0.0), (0, 1)),), 0.01))


@pytest.fixture
def flow():
    return SuspensionFlow(cat_matrix())


# one line per acceptance criterion, repeated in the terminal summary
CRITERIA_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
