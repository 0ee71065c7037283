import numpy as np
import pytest

from heralded_qng.fock_oracle import LossModel
from heralded_qng.physics import CavityParams


@pytest.fixture
def cavity():
    return CavityParams.from_lab_units(31.0, 0.10, 1.4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ideal_loss():
    return LossModel(eta_S=1.0, eta_T=1.0)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once with the compiled kernels and once with the numpy fallback."""
    if request.param == "numpy":
        monkeypatch.setenv("HERALDED_QNG_DISABLE_NUMBA", "1")
    else:
        monkeypatch.delenv("HERALDED_QNG_DISABLE_NUMBA", raising=False)
    return request.param


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_REPORT, [])

    def report(tag, passed, text):
        line = f"[{'PASS' if passed else 'FAIL'}] {tag} {text}"
        print(line)
        lines.append(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
