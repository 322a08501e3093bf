import pytest

from scorecompose import build_appendix_scenario, run
from scorecompose.gmm import Gmm1D


@pytest.fixture
def prior():
    return Gmm1D.from_arrays([-4.0, 4.0], [0.9, 0.9], [0.5, 0.5])


@pytest.fixture
def trimodal():
    return Gmm1D.from_arrays([-1.0, 0.5, 3.0], [0.3, 1.2, 0.7], [0.2, 0.5, 0.3])


@pytest.fixture(scope="session")
def reference_runs():
    """Full reference-scenario runs for seeds 1, 2, 3, keyed by seed then strategy name."""
    return {seed: {r.name: r for r in run(build_appendix_scenario(seed))} for seed in (1, 2, 3)}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
