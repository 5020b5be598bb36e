import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def qubit_rates():
    """Edge rates with w_plus = 4 w_minus (a = ln 4, w = 2, Lambda = 1)."""
    return {"w_plus": 4.0, "w_minus": 1.0}


def dense_decay_rates(op):
    """Ascending decay rates of a tridiagonal operator from a dense solver."""
    return np.sort(-np.linalg.eigvals(op.to_dense()).real)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
