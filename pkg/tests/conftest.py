from __future__ import annotations

import math

import numpy as np
import pytest

from wavekin.collision import FrequencyGrid, SpectralDensity, build_kernel_table


def gaussian_phi(w):
    return np.exp(-((np.asarray(w) - 2.0) ** 2) / 2)


def i3_geometric(w) -> float:
    """d = 3 interaction integral from the four-step closure geometry.

    ``pi^2 min(a_min, sum(a)/2 - a_max) / prod(a)``, zero when no closure exists.
    """
    a = np.sqrt(np.asarray(w, dtype=float))
    m = min(a.min(), a.sum() / 2 - a.max())
    return math.pi**2 * max(m, 0.0) / float(np.prod(a))


@pytest.fixture(scope="session")
def grid256() -> FrequencyGrid:
    return FrequencyGrid.log_uniform(1e-3, 40.0, 256)


@pytest.fixture(scope="session")
def gaussian_rho(grid256) -> SpectralDensity:
    return SpectralDensity(grid256, np.abs(gaussian_phi(grid256.nodes)) ** 2)


@pytest.fixture(scope="session")
def table_d3(grid256, gaussian_rho):
    return build_kernel_table(3, grid256, gaussian_rho.default_cutoff())


@pytest.fixture(scope="session")
def table_d3_full(grid256):
    return build_kernel_table(3, grid256, grid256.omega_max)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Record and print one pass/fail line for an acceptance criterion."""

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
