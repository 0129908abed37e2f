import numpy as np
import pytest

from wavebeam.continuation import ContinuationConfig, sweep_trunk


@pytest.fixture(scope="session")
def beam2_pieces():
    """Beam trunk sweep at N=2, M=4 up to omega=3.5."""
    return sweep_trunk(4, 2, 2, 3.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20251016)


def quadrature_projection(c, nodes=48):
    """Cubic projection by brute-force trapezoid quadrature.

    Independent of the package: the field is sampled on a uniform periodic
    grid over [0, 2 pi)^2 and integrated against each basis function.
    """
    M, N = c.shape
    t = 2 * np.pi * np.arange(nodes) / nodes
    x = 2 * np.pi * np.arange(nodes) / nodes
    ct = np.cos(np.outer(2 * np.arange(M) + 1, t))
    sx = np.sin(np.outer(2 * np.arange(N) + 1, x))
    u = ct.T @ c @ sx
    f = u**3
    # mean over the torus of f * cos * sin, normalised by mean of cos^2 sin^2 = 1/4
    return 4.0 * (ct @ f @ sx.T) / nodes**2


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""
    def emit(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
