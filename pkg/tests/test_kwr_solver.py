from __future__ import annotations

import csv

import numpy as np
import pytest

from conftest import gaussian_phi
from wavekin.collision import FrequencyGrid, SpectralDensity, build_kernel_table
from wavekin.errors import DomainError, StepSizeError
from wavekin.kwr_solver import (
    EvolutionState,
    TimeSeriesWriter,
    conservation_ledger,
    evolve,
    initial_density,
    moment_weights,
    scan_stationary_exponents,
    stationarity_residual,
    step,
)


@pytest.fixture(scope="module")
def small():
    grid = FrequencyGrid.log_uniform(1e-3, 20.0, 64)
    rho = initial_density(gaussian_phi, grid)
    table = build_kernel_table(3, grid, rho.default_cutoff())
    return grid, rho, table


def test_moment_weights_integrate_powers():
    grid = FrequencyGrid.log_uniform(1e-3, 40.0, 256)
    ones = np.ones(len(grid))
    for p in (0.0, 0.5, 1.0, 1.5):
        assert moment_weights(grid, p) @ ones == pytest.approx(40.0 ** (p + 1) / (p + 1), rel=2e-3)


def test_initial_density_accepts_complex_phi():
    grid = FrequencyGrid.log_uniform(1e-3, 10.0, 16)
    rho = initial_density(lambda w: (1 + 1j) * np.ones_like(w), grid)
    assert np.allclose(rho.values, 2.0)
    with pytest.raises(DomainError):
        initial_density(lambda w: np.full_like(w, np.nan), grid)


def test_short_evolution_conserves(small):
    grid, rho, table = small
    final = evolve(rho, table, 0.05, 1e-8, d=3)
    a = conservation_ledger(EvolutionState(0.0, rho), 3)
    b = conservation_ledger(final, 3)
    assert final.tau == pytest.approx(0.05)
    assert abs(b.mass - a.mass) <= 1e-4 * a.mass
    assert abs(b.energy - a.energy) <= 1e-4 * a.energy
    assert np.all(final.rho.values >= 0)


def test_zero_data_stays_zero(small):
    grid, _, table = small
    zero = SpectralDensity(grid, np.zeros(len(grid)))
    assert np.all(evolve(zero, table, 0.3).rho.values == 0)


def test_step_size_underflow_reports_node(small):
    grid, rho, table = small
    big = rho.with_values(1e4 * rho.values)
    with pytest.raises(StepSizeError) as info:
        step(EvolutionState(0.0, big, last_step=0.1), table, 1e-12, dt_min=1e-3)
    assert "tau" in info.value.diagnostics


def test_state_validation(small):
    _, rho, _ = small
    with pytest.raises(DomainError):
        EvolutionState(-1.0, rho)
    with pytest.raises(DomainError):
        EvolutionState(0.0, rho, last_step=0.0)


def test_time_series_writer(small, tmp_path):
    grid, rho, table = small
    writer = TimeSeriesWriter(tmp_path / "ts.csv", 3, stride=1)
    evolve(rho, table, 0.02, callback=writer)
    writer.flush(grid)
    rows = list(csv.reader(open(tmp_path / "ts.csv")))
    assert rows[0][:3] == ["tau", "mass", "energy"]
    assert len(rows[0]) == 3 + len(grid)
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == pytest.approx(0.02)


def test_rayleigh_jeans_members_are_stationary():
    grid = FrequencyGrid.log_uniform(1e-3, 20.0, 96)
    table = build_kernel_table(3, grid, grid.omega_max)
    assert stationarity_residual(3, 0.0, grid, table) < 1e-12
    assert stationarity_residual(3, 1.0, grid, table) < 1e-12
    assert stationarity_residual(3, 0.5, grid, table) > 1e-3
    scan = scan_stationary_exponents(3, grid, table, [0.0, 0.25, 0.5, 0.75, 1.0, 1.25])
    assert {x for x, _ in scan.minima} >= {1.0}
