from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavekin.errors import AccuracyError, DomainError
from wavekin.specfun import ball_volume, bessel_j, bessel_j_with_error, check_dimension, lambda_d, sphere_area


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, -0.5, 2.5, 0.25])
def test_bessel_matches_mpmath(nu):
    q = np.concatenate([np.linspace(0.01, 15.9, 37), np.linspace(16.1, 400.0, 41)])
    got = bessel_j(nu, q)
    ref = np.array([float(mpmath.besselj(nu, x)) for x in q])
    assert np.max(np.abs(got - ref)) < 1e-12


def test_bessel_at_zero():
    assert bessel_j(0.0, 0.0) == 1.0
    assert bessel_j(1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        bessel_j(-0.5, 0.0)
    with pytest.raises(DomainError):
        bessel_j(0.0, -1.0)


def test_negative_integer_order_reflection():
    q = np.linspace(0.5, 30, 11)
    assert np.allclose(bessel_j(-1.0, q), -bessel_j(1.0, q), atol=1e-15)


def test_error_estimate_is_reported():
    v, e = bessel_j_with_error(0.0, np.array([1.0, 20.0, 1e4]))
    assert np.all(e >= 0) and np.all(e < 1e-12)


def test_accuracy_error_is_raised_when_uncertifiable(monkeypatch):
    import wavekin.specfun as sf

    monkeypatch.setattr(sf, "BESSEL_TOL", 1e-30)
    with pytest.raises(AccuracyError):
        sf.bessel_j(0.0, 5.0)


def test_closed_forms():
    q = np.linspace(0, 50, 501)
    assert np.allclose(lambda_d(1, q), np.cos(q), atol=1e-15)
    assert np.allclose(lambda_d(3, q), np.sinc(q / math.pi), atol=1e-15)
    ref = np.array([float(mpmath.besselj(0, x)) for x in q])
    assert np.allclose(lambda_d(2, q), ref, atol=1e-12)


def test_lambda_taylor_branch_is_continuous():
    q = np.array([0.0, 1e-8, 9.99e-4, 1e-3, 1.001e-3])
    for d in (1, 2, 3):
        ref = np.array([float(mpmath.hyp0f1(d / 2, -(x**2) / 4)) for x in q])
        assert np.allclose(lambda_d(d, q), ref, rtol=0, atol=4e-16)


def test_lambda_3_vanishes_at_pi():
    assert abs(lambda_d(3, math.pi)) < 1e-12


@pytest.mark.parametrize("d", [0, 4, 2.5])
def test_dimension_validation(d):
    with pytest.raises(DomainError):
        check_dimension(d)


def test_sphere_and_ball():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    for d in (1, 2, 3):
        assert ball_volume(d) == pytest.approx(sphere_area(d) / d)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.floats(0, 1e4, allow_nan=False))
def test_lambda_bounded_by_one(d, q):
    assert abs(float(lambda_d(d, q))) <= 1.0 + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.floats(0.0, 1e-3))
def test_lambda_near_one_at_origin(d, q):
    assert abs(float(lambda_d(d, q)) - (1 - q * q / (2 * d))) <= q**4 + 1e-16
