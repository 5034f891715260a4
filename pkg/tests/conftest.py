import numpy as np
import pytest

from gmawctl import Waveform, table1

from acceptance_log import CRITERIA, DETAILS

_ACCEPTANCE_OUTCOMES: dict[str, str] = {}


@pytest.fixture(scope="session")
def plant():
    """Canonical circuit parameters and actuator map."""
    return table1()


def decimate(w: Waveform, factor: int) -> Waveform:
    return Waveform(
        t=w.t[::factor].copy(),
        I_W=w.I_W[::factor].copy(),
        U_arc=w.U_arc[::factor].copy(),
        E_W=w.E_W[::factor].copy(),
        phase=w.phase[::factor].copy(),
    )


def true_switch_edges(w: Waveform) -> np.ndarray:
    """Sample indices where the recorded phase label changes."""
    return np.nonzero(w.phase[1:] != w.phase[:-1])[0] + 1


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name in CRITERIA:
        _ACCEPTANCE_OUTCOMES[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        outcome = _ACCEPTANCE_OUTCOMES.get(name)
        if outcome is None:
            continue
        verdict = "PASS" if outcome == "passed" else "FAIL"
        detail = DETAILS.get(name, "")
        line = f"{verdict} {label}" + (f": {detail}" if detail else "")
        terminalreporter.write_line(line)
