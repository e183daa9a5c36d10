import numpy as np
import pytest

from jtcran.core_model import FIG4_BASE, FIG5, FIG6_BASE


@pytest.fixture
def fig5():
    return FIG5


@pytest.fixture
def fig4():
    return FIG4_BASE


@pytest.fixture
def fig6():
    return FIG6_BASE


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line, shown in the terminal summary."""
    def add(label: str, passed: bool, detail: str, seconds: float, limit_s: float):
        tag = "PASS" if passed and seconds < limit_s else "FAIL"
        _ACCEPTANCE_LINES.append(f"{tag} {label}: {detail} [{seconds:.1f}s of {limit_s:g}s]")
        print(_ACCEPTANCE_LINES[-1])
        return tag == "PASS"
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
