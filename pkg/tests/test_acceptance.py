"""Acceptance suite: one test per criterion, each printing a single pass/fail line."""

from __future__ import annotations

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import gaussian_phi
from test_collision import riemann_oracle
from test_microsim import narrow
from wavekin.collision import (
    FrequencyGrid,
    SpectralDensity,
    broadened_collision_operator,
    build_kernel_table,
    collision_operator,
    collision_rhs,
    mismatch_profile,
)
from wavekin.interaction import interaction_integral, interaction_integral_closed_d3, scaling_check
from wavekin.kwr_solver import EvolutionState, conservation_ledger, evolve, initial_density, step
from wavekin.microsim import (
    TorusModel,
    evolve_nls,
    first_iterate_variance,
    free_evolution,
    nonlinear_drift,
    pairing_expectation_check,
    prepared_data,
)
from wavekin.reduction import GaussianProfile, SmoothedDeltaConfig, radial_reduction_check, sphere_delta_identity
from wavekin.specfun import lambda_d, sphere_area
from wavekin.spectrum_synth import (
    ManifoldModel,
    counting_consistency,
    kinetic_constant,
    spectrum_covering,
    sum_to_integral_check,
    weyl_eigenvalues,
)

pytestmark = pytest.mark.slow


def pairing_gap(w) -> float:
    a = np.sqrt(np.asarray(w, dtype=float))
    gaps = [abs(a[0] + a[1] - a[2] - a[3]), abs(a[0] + a[2] - a[1] - a[3]), abs(a[0] + a[3] - a[1] - a[2])]
    return min(gaps) / a.sum()


def random_quads(rng: np.random.Generator, d: int, n: int, lo: float = 0.3, hi: float = 8.0) -> list[np.ndarray]:
    """Random quads; in d = 2 the two-plus-two wavenumber sums are kept apart."""
    out = []
    while len(out) < n:
        w = rng.uniform(lo, hi, 4)
        if d == 3 or pairing_gap(w) >= 0.05:
            out.append(w)
    return out


def lambda_by_quadrature(d: int, q: float) -> float:
    """Spherical average of ``exp(i q x_1)`` over the unit sphere by Gauss-Legendre in the polar angle."""
    if d == 1:
        return 0.5 * (math.cos(q) + math.cos(-q))
    x, w = np.polynomial.legendre.leggauss(256)
    theta = 0.5 * math.pi * (x + 1)
    integral = 0.5 * math.pi * float(np.dot(w, np.cos(q * np.cos(theta)) * np.sin(theta) ** (d - 2)))
    return sphere_area(d - 1) * integral / sphere_area(d)


def test_criterion_1_closed_form_kernels(report):
    rng = np.random.default_rng(1001)
    ds = np.repeat([1, 2, 3], 200)
    qs = rng.uniform(0.0, 50.0, 600)
    start = time.perf_counter()
    values = [float(lambda_d(int(d), q)) for d, q in zip(ds, qs)]
    elapsed = time.perf_counter() - start
    err = max(abs(v - lambda_by_quadrature(int(d), q)) for v, d, q in zip(values, ds, qs))
    ok = err <= 1e-8 and elapsed < 5.0
    report(1, ok, f"max |Lambda - quadrature| = {err:.2e} over 600 points, {elapsed:.2f} s")
    assert ok


def test_criterion_2_interaction_integral(report):
    start = time.perf_counter()
    unit = interaction_integral(3, (1, 1, 1, 1), tol=1e-10).value
    f = lambda q: mpmath.sin(q) ** 4 / q**2
    brute = float(4 * mpmath.pi * mpmath.nsum(lambda k: mpmath.quad(f, [k * mpmath.pi, (k + 1) * mpmath.pi]), [0, mpmath.inf]))
    unit_err = max(abs(unit - math.pi**2), abs(brute - math.pi**2)) / math.pi**2

    rng = np.random.default_rng(2002)
    scale_err = 0.0
    for i, w in enumerate(random_quads(rng, 2, 75) + random_quads(rng, 3, 75)):
        d = 2 if i < 75 else 3
        L = float(rng.uniform(0.5, 4.0))
        scale_err = max(scale_err, scaling_check(d, w, L, tol=1e-9))

    closed_err = 0.0
    for w in random_quads(rng, 3, 100, 0.1, 10.0):
        ref = interaction_integral(3, w, tol=1e-10)
        cf = interaction_integral_closed_d3(w)
        closed_err = max(closed_err, abs(cf - ref.value) / max(abs(cf), 1e-300) if cf else abs(ref.value))
    elapsed = time.perf_counter() - start
    ok = unit_err <= 1e-6 and scale_err <= 1e-5 and closed_err <= 1e-7 and elapsed < 60
    report(
        2, ok,
        f"I3(1,1,1,1) rel err {unit_err:.1e}; scaling {scale_err:.1e} on 150; closed vs quadrature {closed_err:.1e} on 100; {elapsed:.1f} s",
    )
    assert ok


def test_criterion_3_monte_carlo_identity(report):
    rng = np.random.default_rng(3003)
    cases = [(2, w) for w in random_quads(rng, 2, 9, 0.5, 5.0)] + [(3, w) for w in random_quads(rng, 3, 9, 0.5, 5.0)]
    cases += [(2, np.array([25.0, 1.0, 1.0, 1.0])), (3, np.array([25.0, 1.0, 1.0, 1.0]))]
    cfg = SmoothedDeltaConfig(samples_per_sigma=100_000)
    start = time.perf_counter()
    reps = [sphere_delta_identity(d, w, cfg, seed=300 + i) for i, (d, w) in enumerate(cases)]
    elapsed = time.perf_counter() - start
    worst = max(r.z_score for r in reps)
    # no closure: the target vanishes within its error bound and the estimate is zero within 3 standard errors
    infeasible_zero = all(
        abs(r.target) <= max(r.target_error, 1e-12) and abs(r.estimate.value) <= 3 * r.estimate.stderr
        for r in reps[-2:]
    )
    ok = all(r.status == "pass" for r in reps) and infeasible_zero and elapsed < 600
    report(3, ok, f"20 quads, max z = {worst:.2f}, infeasible quads statistically zero: {infeasible_zero}; {elapsed:.0f} s")
    assert ok


def test_criterion_4_radial_reduction(report):
    fixtures = [
        (3, 1.0, 1.0, 1.0, 0.05),
        (3, 1.0, 2.0, 1.5, 0.1),
        (3, 2.0, 0.5, 1.0, 0.1),
        (2, 1.0, 3.0, 2.0, 0.1),
        (2, 1.0, 2.5, 0.4, 0.05),
    ]
    cfg = SmoothedDeltaConfig(samples_per_sigma=100_000)
    reps = [radial_reduction_check(d, w, w2, GaussianProfile(c, s), cfg, seed=400 + i) for i, (d, w, w2, c, s) in enumerate(fixtures)]
    statuses = [r.status for r in reps]
    passed = statuses.count("pass")
    inconclusive = statuses.count("inconclusive")
    ok = "fail" not in statuses and inconclusive <= 1 and passed >= 4
    report(4, ok, f"{passed} pass, {inconclusive} inconclusive, statuses {statuses}")
    assert ok


def test_criterion_5_collision_operator(report, grid256, gaussian_rho, table_d3, table_d3_full):
    null = 0.0
    for mu in (None, 0.5, 1.0, 2.0):
        values = np.full(len(grid256), 0.7) if mu is None else 0.7 / (grid256.nodes + mu)
        value, scale = collision_rhs(table_d3_full, SpectralDensity(grid256, values), with_scale=True)
        null = max(null, float(np.max(np.abs(value)) / np.max(scale)))
    cut = gaussian_rho.default_cutoff()
    sharp = collision_operator(3, gaussian_rho, 2.0, cut=cut)
    exact_rho = lambda w: np.abs(gaussian_phi(w)) ** 2
    oracle = abs(riemann_oracle(exact_rho, 2.0, cut) - sharp) / abs(sharp)
    base = collision_rhs(table_d3, gaussian_rho)
    scaled = collision_rhs(table_d3, gaussian_rho.with_values(3.0 * gaussian_rho.values))
    homog = float(np.max(np.abs(scaled - 27 * base)) / np.max(np.abs(27 * base)))
    ok = null <= 1e-6 and oracle <= 1e-3 and homog <= 1e-10
    report(5, ok, f"RJ null residual {null:.1e} of scale; Riemann oracle {oracle:.1e}; homogeneity {homog:.1e}")
    assert ok


def test_criterion_6_solver(report, gaussian_rho, table_d3):
    start = time.perf_counter()
    final = evolve(gaussian_rho, table_d3, 0.5, 1e-8, d=3)
    a = conservation_ledger(EvolutionState(0.0, gaussian_rho), 3)
    b = conservation_ledger(final, 3)
    mass = abs(b.mass - a.mass) / a.mass
    energy = abs(b.energy - a.energy) / a.energy

    # the fixed-point and self-convergence clauses run on a coarser grid to bound the runtime
    coarse = FrequencyGrid.log_uniform(1e-3, 40.0, 64)
    full = build_kernel_table(3, coarse, coarse.omega_max)
    rj_drift = 0.0
    for values in (np.full(len(coarse), 0.7), 0.7 / (coarse.nodes + 1.0)):
        rj = SpectralDensity(coarse, values)
        state = EvolutionState(0.0, rj, 0, 1e-3)
        for _ in range(100):
            state = step(state, full, 1e-8)
        rj_drift = max(rj_drift, float(np.max(np.abs(state.rho.values - rj.values)) / np.max(rj.values)))

    rho = initial_density(lambda w: 4.0 * gaussian_phi(w), coarse)
    table = build_kernel_table(3, coarse, rho.default_cutoff())
    ref = evolve(rho, table, 0.1, 1e-12, d=3, dt0=0.05).rho.values
    errs = [
        float(np.max(np.abs(evolve(rho, table, 0.1, tol, d=3, dt0=0.05).rho.values - ref)))
        for tol in (1e-6, 1e-7, 1e-8, 1e-9)
    ]
    converging = all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    elapsed = time.perf_counter() - start
    ok = mass <= 1e-4 and energy <= 1e-4 and rj_drift <= 1e-6 and converging and elapsed < 600
    report(
        6, ok,
        f"mass drift {mass:.1e}, energy drift {energy:.1e}; RJ sup drift {rj_drift:.1e} over 100 steps; "
        f"self-convergence errors {', '.join(f'{e:.1e}' for e in errs)}; {elapsed:.0f} s",
    )
    assert ok


def test_criterion_7_broadened_kernel(report, gaussian_rho):
    cut = gaussian_rho.default_cutoff()
    sharp = collision_operator(3, gaussian_rho, 2.0, cut=cut)
    prof = mismatch_profile(3, gaussian_rho, 2.0, cut=cut)
    vals = broadened_collision_operator(3, gaussian_rho, 2.0, [10.0, 40.0, 160.0], profile=prof)
    gaps = np.abs(vals - sharp) / abs(sharp)
    ok = bool(np.all(np.diff(gaps) < 0)) and gaps[-1] <= 0.05
    report(7, ok, f"relative gaps at t = 10, 40, 160: {', '.join(f'{g:.2%}' for g in gaps)}")
    assert ok


def test_criterion_8_spectrum_synthesis(report):
    counting = max(
        counting_consistency(weyl_eigenvalues(ManifoldModel(d, 1.0), 100_000, gen, seed=8))
        for d in (2, 3)
        for gen in ("weyl-deterministic", "weyl-jittered")
    )
    chi = lambda w: np.where((w >= 1) & (w <= 2), np.sin(np.pi * (w - 1)) ** 2, 0.0)
    base = ManifoldModel(2, 1.0)
    errors = []
    for L in (4.0, 8.0, 16.0, 32.0):
        model = base.dilated(L)
        errors.append(sum_to_integral_check(weyl_eigenvalues(model, spectrum_covering(model, 2.0)), chi, (1.0, 2.0)))
    decreasing = all(e1 > e2 for e1, e2 in zip(errors, errors[1:]))
    rng = np.random.default_rng(8008)
    identity = max(
        kinetic_constant(
            ManifoldModel(int(rng.integers(1, 4)), float(rng.uniform(0.1, 10)), float(rng.uniform(1.0, 100.0))),
            float(rng.uniform(1e-3, 0.5)),
            float(rng.uniform(0.1, 1e4)),
        ).relative_difference
        for _ in range(100)
    )
    ok = counting <= 0.02 and errors[2] <= 0.05 and decreasing and identity <= 1e-12
    report(
        8, ok,
        f"counting {counting:.2%}; sum-to-integral at L = 4, 8, 16, 32: {', '.join(f'{e:.1e}' for e in errors)}; "
        f"kinetic constant {identity:.1e}",
    )
    assert ok


def test_criterion_9_microsim(report):
    # free evolution at eps = 0
    free = TorusModel(2, 4.0, 32, 0.0)
    f = prepared_data(free, narrow, seed=90)
    dt = 0.5 / float(np.max(free.omega()[free.dealiased()]))
    free_err = float(np.max(np.abs(evolve_nls(f, 1.0, dt).amplitudes - free_evolution(f, 1.0).amplitudes)))
    free_ok = free_err <= 1e-13 * float(np.max(np.abs(f.amplitudes)))

    # mass conservation and Strang order at strong coupling
    model = TorusModel(2, 4.0, 32, 5.0)
    g = prepared_data(model, narrow, seed=91)
    runs = [evolve_nls(g, 1.0, dt / 2**j) for j in range(3)]
    mass = max(abs(r.mass - g.mass) / g.mass for r in runs)
    ratio = np.linalg.norm(runs[0].amplitudes - runs[1].amplitudes) / np.linalg.norm(runs[1].amplitudes - runs[2].amplitudes)

    # pairing identity
    small = TorusModel(2, 4.0, 8, 0.1)
    a, b, c, e = (0, 1), (1, 0), (1, 1), (0, 2)
    quads = [(a, a, b, b), (a, b, b, a), (a, a, a, a), (a, b, a, b), (a, b, c, e), (c, a, e, b)]
    pairing = pairing_expectation_check(small, narrow, quads, 10_000, seed=92)
    pairing_ok = pairing.max_z <= 3.0

    # first-iterate variance on the default fixture, bulk shells
    fixture = TorusModel(2, 16.0, 128, 0.05)
    first = first_iterate_variance(fixture, gaussian_phi, 16.0, [0.5, 1.5, 2.5, 3.5], 40, seed=2024)
    ratio_ok = bool(np.all(np.abs(first.ratio - 1) <= 0.3))

    # early-time drift of the full dynamics
    coarse = TorusModel(2, 16.0, 64, 0.05)
    dt_c = 0.5 / float(np.max(coarse.omega()[coarse.dealiased()]))
    edges = [0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3.25, 3.75, 4.5, 5.5]
    drift = nonlinear_drift(coarse, gaussian_phi, 16.0, dt_c, edges, 60, seed=2024)
    resolved = int(np.count_nonzero(drift.resolved()))
    sign_ok = drift.sign_agreement() and resolved > 0

    ok = free_ok and mass <= 1e-10 and abs(ratio - 4) <= 0.5 and pairing_ok and ratio_ok and sign_ok
    report(
        9, ok,
        f"free {free_err:.1e}; mass {mass:.1e}; Strang ratio {ratio:.2f}; pairing max z {pairing.max_z:.2f}; "
        f"first-iterate ratios {', '.join(f'{r:.2f}' for r in first.ratio)}; drift signs agree on {resolved} resolved shells: {sign_ok}",
    )
    assert ok
