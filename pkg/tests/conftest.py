import numpy as np
import pytest

from cnls_stability import evans as ev
from cnls_stability.model import ModelParams


@pytest.fixture(scope="session")
def p_fund():
    """Fundamental wave at the third pitchfork (s = 4), where E_B has integer chi."""
    return ModelParams(1.0, 4.0, 10.0, 2.0)


@pytest.fixture(scope="session")
def ctx_fund(p_fund):
    return ev.CoefficientMatrix.fundamental(p_fund)


@pytest.fixture(scope="session")
def bifurcated_005():
    from cnls_stability.spectral import bifurcated_profile

    prof, params = bifurcated_profile(4.0, 2, 2.0, 0.05)
    return prof, params


@pytest.fixture(scope="session")
def ctx_bif(bifurcated_005):
    prof, params = bifurcated_005
    return ev.CoefficientMatrix.from_profile(prof, params)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
