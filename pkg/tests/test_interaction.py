from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import i3_geometric
from wavekin.errors import DivergentIntegralError, DomainError
from wavekin.interaction import (
    FrequencyQuad,
    closed_form_d3,
    interaction_integral,
    interaction_integral_closed_d2,
    interaction_integral_closed_d3,
    kernel_interaction,
    scaling_check,
    tail_moments,
)

freq = st.floats(0.05, 20.0, allow_nan=False)


def test_unit_quad_d3_is_pi_squared():
    rep = interaction_integral(3, (1, 1, 1, 1), tol=1e-10)
    assert rep.value == pytest.approx(math.pi**2, rel=1e-9)
    assert rep.tail_method == "closed-form-d3"
    # brute force: 4 pi int sin^4(q) / q^2 dq
    f = lambda q: mpmath.sin(q) ** 4 / q**2
    ref = 4 * mpmath.pi * mpmath.nsum(lambda k: mpmath.quad(f, [k * mpmath.pi, (k + 1) * mpmath.pi]), [0, mpmath.inf])
    assert rep.value == pytest.approx(float(ref), rel=1e-9)


def test_d3_matches_geometric_oracle():
    rng = np.random.default_rng(11)
    for w in rng.uniform(0.1, 10, size=(40, 4)):
        assert interaction_integral_closed_d3(w) == pytest.approx(i3_geometric(w), rel=1e-12, abs=1e-14)
        assert interaction_integral(3, w, 1e-9).value == pytest.approx(i3_geometric(w), rel=1e-8, abs=1e-10)


def test_d3_infeasible_quad_is_zero():
    assert interaction_integral_closed_d3((25, 1, 1, 1)) == 0.0
    assert abs(interaction_integral(3, (25, 1, 1, 1), 1e-9).value) < 1e-8


def test_d2_quadrature_matches_elliptic_form():
    rng = np.random.default_rng(5)
    checked = 0
    for w in rng.uniform(0.2, 6, size=(24, 4)):
        a = np.sqrt(w)
        gaps = [abs(a[0] + a[1] - a[2] - a[3]), abs(a[0] + a[2] - a[1] - a[3]), abs(a[0] + a[3] - a[1] - a[2])]
        if min(gaps) < 0.05 * a.sum():
            continue
        rep = interaction_integral(2, w, 1e-8)
        assert rep.tail_method == "asymptotic-expansion"
        ref = interaction_integral_closed_d2(w)
        assert abs(rep.value - ref) <= 10 * rep.abs_error_estimate + 1e-12 * abs(ref)
        checked += 1
    assert checked >= 6


def test_d2_pairing_coincidence_diverges():
    with pytest.raises(DivergentIntegralError):
        interaction_integral(2, (1, 1, 1, 1))
    with pytest.raises(DivergentIntegralError):
        interaction_integral_closed_d2((1, 4, 1, 4))
    assert np.isinf(kernel_interaction(2, np.array([1.0, 1.0, 1.0, 1.0])))


def test_domain_errors():
    with pytest.raises(DomainError):
        interaction_integral(1, (1, 1, 1, 1))
    with pytest.raises(DomainError):
        interaction_integral(3, (1, 1, 1, 1e-9))
    with pytest.raises(DomainError):
        interaction_integral(3, (1, 1, 1, 1), tol=1e-14)
    with pytest.raises(DomainError):
        FrequencyQuad.of((1, 2, 3))
    with pytest.raises(DomainError):
        FrequencyQuad(1, -1, 1, 1)
    with pytest.raises(DomainError):
        scaling_check(3, (1, 1, 1, 1), 100.0)


def test_tail_moments_match_mpmath():
    Q, b = 7.0, 2.3
    got = tail_moments(b, 4, Q)
    for p in range(1, 5):
        ref = mpmath.quadosc(lambda q: mpmath.exp(1j * b * q) * q ** (-p), [Q, mpmath.inf], omega=b)
        assert abs(got[p - 1] - complex(ref)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(freq, freq, freq, freq, st.permutations(range(4)))
def test_symmetry_under_permutation(w0, w1, w2, w3, order):
    w = np.array([w0, w1, w2, w3])
    assert interaction_integral(3, w[order], 1e-9).value == interaction_integral(3, w, 1e-9).value


@settings(max_examples=40, deadline=None)
@given(freq, freq, freq, freq, st.floats(0.25, 4.0))
def test_scaling_law_d3(w0, w1, w2, w3, L):
    assert scaling_check(3, (w0, w1, w2, w3), L, 1e-9) < 1e-6 or i3_geometric((w0, w1, w2, w3)) == 0


@settings(max_examples=200, deadline=None)
@given(freq, freq, freq, freq)
def test_d3_kernel_nonnegative(w0, w1, w2, w3):
    assert closed_form_d3(np.array([w0, w1, w2, w3])) >= -1e-12
