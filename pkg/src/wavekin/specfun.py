"""Special functions: sphere constants, Bessel J_nu and the radial kernel Lambda_d.

``lambda_d(d, q)`` is the average of ``exp(i Z.theta)`` over the unit sphere
``S^{d-1}`` at ``|Z| = q``; in closed form

    Lambda_d(q) = Gamma(d/2) (q/2)^(-nu) J_nu(q),   nu = d/2 - 1,

so that Lambda_1 = cos, Lambda_2 = J_0 and Lambda_3 = sin(q)/q.

Bessel functions are evaluated with an extended-precision power series for
small arguments and the Hankel asymptotic expansion for large ones.  Every
value carries an error estimate and an :class:`AccuracyError` is raised when
neither method certifies the target accuracy.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AccuracyError, DomainError

SUPPORTED_DIMENSIONS = (1, 2, 3)

#: absolute accuracy certified by :func:`bessel_j`
BESSEL_TOL = 1e-12
#: arguments at or below this use the power series, above it the Hankel form
SERIES_CROSSOVER = 16.0
#: below this argument Lambda_d switches to its even Taylor polynomial
TAYLOR_CUTOFF = 1e-3

_EPS_LD = float(np.finfo(np.longdouble).eps)
_EPS = float(np.finfo(float).eps)


def check_dimension(d: int) -> int:
    """Validate a spatial dimension and return it as ``int``."""
    if isinstance(d, bool) or int(d) != d or int(d) not in SUPPORTED_DIMENSIONS:
        raise DomainError(f"unsupported dimension d={d!r}; supported: {SUPPORTED_DIMENSIONS}")
    return int(d)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere ``S^{d-1}``, ``2 pi^{d/2} / Gamma(d/2)``."""
    d = check_dimension(d)
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``, ``pi^{d/2} / Gamma(d/2 + 1)``."""
    d = check_dimension(d)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _as_radial(q) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("radial argument must be finite")
    if np.any(arr < 0):
        raise DomainError("radial argument must be nonnegative")
    return arr


def _series(nu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series of J_nu in long double; returns (value, error estimate)."""
    h = x.astype(np.longdouble) / 2
    h2 = h * h
    term = np.full(h.shape, 1.0 / math.gamma(nu + 1.0), dtype=np.longdouble)
    total = term.copy()
    absum = np.abs(term)
    h2max = float(h2.max()) if h2.size else 0.0
    nu_ld = np.longdouble(nu)
    k = 0
    while True:
        k += 1
        kk = np.longdouble(k)
        term = term * (-h2) / (kk * (kk + nu_ld))
        total += term
        absum += np.abs(term)
        if k * (k + nu) > h2max and np.all(np.abs(term) <= _EPS_LD * absum):
            break
        if k > 10_000:  # pragma: no cover - guarded by the crossover choice
            break
    scale = h**nu
    value = (total * scale).astype(float)
    err = (8 * _EPS_LD * absum * np.abs(scale)).astype(float) + 2 * _EPS * np.abs(value)
    return value, err


def _hankel(nu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hankel asymptotic expansion truncated at its smallest term."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    qs = np.zeros_like(x)
    u = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    last = np.zeros_like(x)
    k = 0
    while np.any(active) and k < 200:
        k += 1
        factor = (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        new = u * factor
        # terms may grow at first when nu is large; only stop past that phase
        grows = (np.abs(new) >= np.abs(u)) & ((2 * k - 1) ** 2 > mu)
        stop = active & (grows | (new == 0))
        last = np.where(stop & (new != 0), np.abs(new), last)
        last = np.where(stop & (new == 0), 0.0, last)
        active &= ~stop
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = np.where(active, p + sign * new, p)
        else:
            qs = np.where(active, qs + sign * new, qs)
        u = np.where(active, new, u)
    last = np.where(active, np.abs(u), last)
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    value = amp * (p * np.cos(chi) - qs * np.sin(chi))
    err = amp * (last + 4 * _EPS * (np.abs(p) + np.abs(qs)) * (1.0 + x))
    return value, err


def bessel_j_with_error(nu: float, q) -> tuple[np.ndarray, np.ndarray]:
    """Bessel function of the first kind with an absolute error estimate.

    Parameters
    ----------
    nu : float
        Real order.  Half-integer orders ``+-1/2`` use their elementary forms.
    q : array_like
        Nonnegative arguments.

    Returns
    -------
    value, error : ndarray
        ``J_nu(q)`` and an estimate of its absolute error.
    """
    nu = float(nu)
    x = _as_radial(q)
    if nu < 0 and nu == round(nu):
        n = int(-nu)
        value, err = bessel_j_with_error(float(n), x)
        return (-1) ** n * value, err
    if nu in (0.5, -0.5):
        if nu < 0 and np.any(x == 0):
            raise DomainError("J_{-1/2} is unbounded at q=0")
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = np.sqrt(2.0 / (math.pi * x))
            trig = np.sin(x) if nu > 0 else np.cos(x)
            value = np.where(x == 0, 0.0, amp * trig)
        return value, 4 * _EPS * np.abs(value) + _EPS * np.where(x == 0, 0.0, amp)
    if nu < 0 and np.any(x == 0):
        raise DomainError(f"J_{nu} is unbounded at q=0")

    flat = np.atleast_1d(x).ravel()
    value = np.empty_like(flat)
    err = np.empty_like(flat)
    small = flat <= SERIES_CROSSOVER
    if np.any(small):
        value[small], err[small] = _series(nu, flat[small])
    if np.any(~small):
        v, e = _hankel(nu, flat[~small])
        bad = e > BESSEL_TOL
        if np.any(bad):
            v2, e2 = _series(nu, flat[~small][bad])
            v[bad] = np.where(e2 < e[bad], v2, v[bad])
            e[bad] = np.minimum(e2, e[bad])
        value[~small], err[~small] = v, e
    return value.reshape(x.shape), err.reshape(x.shape)


def bessel_j(nu: float, q):
    """``J_nu(q)`` to at least :data:`BESSEL_TOL` absolute accuracy.

    Raises
    ------
    AccuracyError
        If the error estimate at some argument exceeds the target.
    """
    value, err = bessel_j_with_error(nu, q)
    if np.any(err > BESSEL_TOL):
        worst = int(np.argmax(np.ravel(err)))
        raise AccuracyError(
            f"J_{nu} cannot be certified to {BESSEL_TOL:g}",
            order=nu,
            argument=float(np.ravel(np.asarray(q, dtype=float))[worst]),
            error_estimate=float(np.ravel(err)[worst]),
        )
    return value[()] if value.ndim == 0 else value


def _lambda_taylor(d: int, q: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k Gamma(d/2) (q/2)^{2k} / (k! Gamma(k + d/2)), through q^8
    h2 = (q / 2) ** 2
    out = np.zeros_like(q)
    coef = 1.0
    power = np.ones_like(q)
    for k in range(5):
        if k:
            coef *= -1.0 / (k * (k - 1 + d / 2))
            power = power * h2
        out += coef * power
    return out


def lambda_d(d: int, q):
    """Spherical average of a unit plane wave in ``R^d`` at radius ``q``.

    Parameters
    ----------
    d : int
        Dimension, one of 1, 2, 3.
    q : array_like
        Nonnegative radial arguments.

    Returns
    -------
    float or ndarray
        ``Lambda_d(q)``; exactly 1 at ``q = 0`` and bounded by 1 in modulus.
    """
    d = check_dimension(d)
    x = _as_radial(q)
    nu = d / 2 - 1
    near = x < TAYLOR_CUTOFF
    out = np.empty_like(x, dtype=float)
    if np.any(near):
        out[near] = _lambda_taylor(d, x[near])
    if np.any(~near):
        xf = x[~near]
        jv = bessel_j(nu, xf)
        out[~near] = math.gamma(d / 2) * (xf / 2) ** (-nu) * jv
    out = np.clip(out, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out
