from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavekin.collision import (
    FrequencyGrid,
    KernelTable,
    SpectralDensity,
    broadened_collision_operator,
    build_kernel_table,
    cached_kernel_table,
    collision_operator,
    collision_rhs,
    f_term,
    kernel_kstar,
    kstar_prefactor,
    mismatch_profile,
    resonance_modulus,
    sinc2_kernel,
)
from wavekin.errors import CacheMismatchError, DomainError


def riemann_oracle(rho, omega: float, cut: float, n: int = 400) -> float:
    """Midpoint sum over (w1, w2) with the d = 3 kernel from closure geometry."""
    pref = 0.5 * math.pi**2 * (4 * math.pi / (2 * math.pi) ** 3) ** 3
    h1 = cut / n
    total = 0.0
    for x in (np.arange(n) + 0.5) * h1:
        lo, hi = max(0.0, x - omega), min(cut, cut + x - omega)
        if hi <= lo:
            continue
        h2 = (hi - lo) / n
        y = lo + (np.arange(n) + 0.5) * h2
        z = omega - x + y
        a = np.sqrt(np.stack([np.full_like(y, omega), np.full_like(y, x), y, z], 1))
        m = np.minimum(a.min(1), a.sum(1) / 2 - a.max(1))
        kern = math.pi**2 * np.maximum(m, 0) / a.prod(1)
        F = rho(x) * rho(y) * rho(z) - rho(omega) * (rho(y) * rho(z) - rho(x) * rho(z) + rho(x) * rho(y))
        total += h1 * h2 * np.sum(np.sqrt(x * y * z) * kern * F)
    return pref * total


def test_prefactor_value():
    assert kstar_prefactor(3) == pytest.approx(1 / (16 * math.pi**4), rel=1e-15)
    assert kstar_prefactor(2) == pytest.approx(math.pi**2 / 2 / (8 * math.pi**3), rel=1e-15)


def test_riemann_oracle_at_two(gaussian_rho):
    cut = gaussian_rho.default_cutoff()
    value = collision_operator(3, gaussian_rho, 2.0, cut=cut)
    exact_rho = lambda w: np.exp(-((np.asarray(w) - 2.0) ** 2))
    assert abs(riemann_oracle(exact_rho, 2.0, cut) - value) <= 1e-3 * abs(value)
    # against the same interpolant the oracle converges onto the operator
    assert abs(riemann_oracle(gaussian_rho, 2.0, cut, 1600) - value) <= 1e-4 * abs(value)


def test_table_matches_direct_operator(table_d3, gaussian_rho):
    rhs = collision_rhs(table_d3, gaussian_rho)
    nodes = table_d3.nodes
    for i in (60, 150, 200):
        direct = collision_operator(3, gaussian_rho, float(nodes[i]), cut=table_d3.cut)
        assert rhs[i] == pytest.approx(direct, rel=1e-3, abs=1e-10)


@pytest.mark.parametrize("mu", [None, 0.5, 1.0, 2.0])
def test_rayleigh_jeans_nulls(table_d3_full, grid256, mu):
    values = np.full(grid256.nodes.shape, 0.7) if mu is None else 0.7 / (grid256.nodes + mu)
    rho = SpectralDensity(grid256, values)
    value, scale = collision_rhs(table_d3_full, rho, with_scale=True)
    assert np.max(np.abs(value)) <= 1e-6 * np.max(scale)


def test_cubic_homogeneity(table_d3, gaussian_rho):
    base = collision_rhs(table_d3, gaussian_rho)
    scaled = collision_rhs(table_d3, gaussian_rho.with_values(3.0 * gaussian_rho.values))
    assert np.max(np.abs(scaled - 27 * base)) <= 1e-10 * np.max(np.abs(27 * base))


def test_zero_density_gives_zero(table_d3, grid256):
    assert np.all(collision_rhs(table_d3, SpectralDensity(grid256, np.zeros(len(grid256)))) == 0)


def test_d1_rejected(grid256):
    with pytest.raises(DomainError):
        build_kernel_table(1, grid256)


def test_table_roundtrip_and_corruption(tmp_path):
    grid = FrequencyGrid.log_uniform(1e-3, 10.0, 24)
    table = build_kernel_table(3, grid, 8.0)
    path = tmp_path / "t.wkt"
    table.save(path)
    back = KernelTable.load(path, table.header())
    assert np.array_equal(back.kw, table.kw)
    with pytest.raises(CacheMismatchError):
        KernelTable.load(path, {**table.header(), "d": 2})
    raw = bytearray(path.read_bytes())
    raw[-20] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheMismatchError):
        KernelTable.load(path)


def test_cache_rebuilds_mismatched_file(tmp_path, monkeypatch):
    monkeypatch.setenv("WAVEKIN_CACHE_DIR", str(tmp_path))
    grid = FrequencyGrid.log_uniform(1e-3, 10.0, 24)
    first = cached_kernel_table(3, grid, 8.0)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    files[0].write_bytes(b"garbage")
    second = cached_kernel_table(3, grid, 8.0)
    assert np.array_equal(first.kw, second.kw)
    assert KernelTable.load(files[0]).size == first.size


def test_sinc2_kernel_has_unit_mass():
    t = 7.0
    W = np.linspace(-4000, 4000, 2_000_001)
    assert np.trapezoid(sinc2_kernel(W, t), W) == pytest.approx(1.0, abs=2e-4)
    assert sinc2_kernel(0.0, t) == pytest.approx(t / (2 * math.pi))


def test_broadened_operator_approaches_sharp(gaussian_rho):
    cut = gaussian_rho.default_cutoff()
    sharp = collision_operator(3, gaussian_rho, 2.0, cut=cut)
    prof = mismatch_profile(3, gaussian_rho, 2.0, cut=cut)
    vals = broadened_collision_operator(3, gaussian_rho, 2.0, [10.0, 40.0, 160.0], profile=prof)
    gaps = np.abs(vals - sharp) / abs(sharp)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] <= 0.05
    assert prof.l1_bound(10.0) >= abs(vals[0])


def test_kernel_kstar_zero_off_closure():
    assert abs(kernel_kstar(3, (25, 1, 1, 1))) < 1e-16
    assert resonance_modulus((1, 2, 3, 4)) == pytest.approx(-2.0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.0, 5), st.floats(0.1, 3)
)
def test_f_term_telescopes_on_rayleigh_jeans(w1, w2, w0, mu, c):
    w3 = w0 - w1 + w2
    if w3 <= 0:
        return
    r = lambda w: c / (w + mu)
    val = f_term(r(w0), r(w1), r(w2), r(w3))
    size = r(w1) * r(w2) * r(w3) + r(w0) * (r(w2) * r(w3) + r(w1) * r(w3) + r(w1) * r(w2))
    assert abs(val) <= 1e-12 * size
