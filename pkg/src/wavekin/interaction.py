"""Four-point interaction integral.

    I(w0, w1, w2, w3) = s(d) * int_0^inf q^{d-1} prod_j Lambda_d(sqrt(w_j) q) dq

The integrand decays only algebraically, so the integral is split at a
cut point ``Q``.  The head ``[0, Q]`` is summed with composite Gauss-Legendre
panels whose length is one period of the fastest oscillation.  The tail is
integrated analytically:

* d = 3: ``Lambda_3(x) = sin(x)/x`` exactly, the product of sines is a finite
  cosine sum and each term reduces to sine/cosine integrals
  (``tail_method = "closed-form-d3"``);
* d = 2: each ``J_0`` is replaced by its Hankel asymptotic expansion, the
  product is expanded over the 16 sign patterns of the phases and every
  resulting ``exp(i b q) q^{-p}`` moment is integrated exactly
  (``tail_method = "asymptotic-expansion"``).  The truncation order is chosen
  to minimise a rigorous remainder bound.

In d = 2 the integral diverges logarithmically whenever two wavenumbers sum to
the other two (``a_i + a_j = a_k + a_l``); such inputs raise
:class:`DivergentIntegralError`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipk, sici

from .errors import ConvergenceError, DivergentIntegralError, DomainError
from .specfun import check_dimension, lambda_d, sphere_area

#: positivity floor for every frequency of a quadruple
OMEGA_MIN = 1e-6
#: smallest tolerance the quadrature will accept
TOL_FLOOR = 1e-10

TAIL_METHODS = ("zero-partitioned-accelerated", "closed-form-d3", "asymptotic-expansion")

_GL16 = np.polynomial.legendre.leggauss(16)
_GL10 = np.polynomial.legendre.leggauss(10)
_SIGNS = np.array(list(itertools.product((1.0, -1.0), repeat=4)))
_SIGN_PARITY = np.prod(_SIGNS, axis=1)
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class FrequencyQuad:
    """Ordered quadruple of nonnegative frequencies ``(w0, w1, w2, w3)``."""

    w0: float
    w1: float
    w2: float
    w3: float

    def __post_init__(self) -> None:
        for name in ("w0", "w1", "w2", "w3"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"frequency {name}={value!r} must be finite and nonnegative")
            object.__setattr__(self, name, value)

    @classmethod
    def of(cls, values) -> "FrequencyQuad":
        w = list(values)
        if len(w) != 4:
            raise DomainError("a frequency quadruple needs exactly four entries")
        return cls(*w)

    def as_array(self) -> np.ndarray:
        return np.array([self.w0, self.w1, self.w2, self.w3])

    def scaled(self, L: float) -> "FrequencyQuad":
        """Quadruple on the manifold dilated by ``L`` (frequencies divided by ``L**2``)."""
        return FrequencyQuad.of(self.as_array() / L**2)

    def permuted(self, order) -> "FrequencyQuad":
        return FrequencyQuad.of(self.as_array()[list(order)])

    def require_floor(self, floor: float = OMEGA_MIN) -> None:
        w = self.as_array()
        if np.any(w < floor):
            raise DomainError(
                f"all frequencies must be >= {floor:g}", quad=w.tolist(), floor=floor
            )


@dataclass(frozen=True)
class QuadratureReport:
    """Value of a quadrature together with its certified error estimate."""

    value: float
    abs_error_estimate: float
    panels_used: int
    tail_method: str

    def __post_init__(self) -> None:
        if self.tail_method not in TAIL_METHODS:
            raise ValueError(f"unknown tail method {self.tail_method!r}")
        if not (self.abs_error_estimate >= 0 and math.isfinite(self.value)):
            raise ValueError("report requires a finite value and nonnegative error")


def _coerce_quad(quad) -> FrequencyQuad:
    return quad if isinstance(quad, FrequencyQuad) else FrequencyQuad.of(quad)


def natural_scale(d: int, wavenumbers: np.ndarray) -> float:
    """Magnitude ``s(d) (prod a_j)^{-d/4}`` used to make tolerances scale free.

    ``I`` is homogeneous of degree ``-d`` in the wavenumbers ``a_j = sqrt(w_j)``,
    and so is this scale, so certification is invariant under dilation.
    """
    return sphere_area(d) * float(np.prod(wavenumbers)) ** (-d / 4)


# ---------------------------------------------------------------------------
# closed form in d = 3


def sine_product_integral(a: np.ndarray) -> np.ndarray:
    """``int_0^inf q^-2 prod_j sin(a_j q) dq`` for wavenumber rows ``a[..., 4]``.

    Uses ``int_0^inf (1 - cos(b q)) / q^2 dq = pi |b| / 2`` on the cosine
    expansion of the product; the result is piecewise linear in ``a``.
    """
    a = np.asarray(a, dtype=float)
    b = np.abs(a @ _SIGNS.T)
    return -(math.pi / 32.0) * (b @ _SIGN_PARITY)


def closed_form_d3(w) -> np.ndarray:
    """Vectorised d = 3 interaction integral for frequency rows ``w[..., 4]``."""
    a = np.sqrt(np.asarray(w, dtype=float))
    return 4.0 * math.pi * sine_product_integral(a) / np.prod(a, axis=-1)


def interaction_integral_closed_d3(quad) -> float:
    """Exact d = 3 interaction integral.

    Parameters
    ----------
    quad : FrequencyQuad or sequence of four floats
        Strictly positive frequencies.

    Returns
    -------
    float
        ``(4 pi / prod a_j) int_0^inf q^-2 prod sin(a_j q) dq`` with ``a_j = sqrt(w_j)``.
    """
    quad = _coerce_quad(quad)
    w = quad.as_array()
    if np.any(w <= 0):
        raise DomainError("closed form requires strictly positive frequencies", quad=w.tolist())
    a = np.sqrt(np.sort(w))
    if 2 * a[-1] >= a.sum():
        # no four-vector closure exists: the value vanishes exactly
        return 0.0
    # sorted input makes every permutation share one floating-point reduction order
    return float(closed_form_d3(a**2))


# ---------------------------------------------------------------------------
# closed form in d = 2


def closed_form_d2(w) -> np.ndarray:
    """Vectorised d = 2 interaction integral through a complete elliptic integral.

    With one direction fixed, the delta of the planar four-step closure reduces
    to ``8 int dx / sqrt(|(x-u1)(x-u2)(x-u3)(x-u4)|)`` over the overlap of
    ``[(a1-a2)^2, (a1+a2)^2]`` and ``[(a0-a3)^2, (a0+a3)^2]``; the roots
    ``u1 < u2 < u3 < u4`` are the four interval ends and the integral is
    ``2 K(m) / sqrt((u4-u2)(u3-u1))``.  The result is ``inf`` on the
    logarithmically divergent set and 0 where no closure exists.
    """
    a = np.sqrt(np.asarray(w, dtype=float))
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    u = np.sort(
        np.stack([(a1 - a2) ** 2, (a1 + a2) ** 2, (a0 - a3) ** 2, (a0 + a3) ** 2], axis=-1),
        axis=-1,
    )
    lo = np.maximum((a1 - a2) ** 2, (a0 - a3) ** 2)
    hi = np.minimum((a1 + a2) ** 2, (a0 + a3) ** 2)
    u1, u2, u3, u4 = np.moveaxis(u, -1, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = (u4 - u2) * (u3 - u1)
        m = (u3 - u2) * (u4 - u1) / denom
        value = (8.0 / math.pi) * ellipk(np.clip(m, 0.0, 1.0)) / np.sqrt(denom)
    return np.where(lo < hi, value, 0.0)


def interaction_integral_closed_d2(quad) -> float:
    """Exact d = 2 interaction integral (elliptic form, see :func:`closed_form_d2`).

    Raises
    ------
    DivergentIntegralError
        When two wavenumbers sum to the other two.
    """
    quad = _coerce_quad(quad)
    w = quad.as_array()
    if np.any(w <= 0):
        raise DomainError("closed form requires strictly positive frequencies", quad=w.tolist())
    a = np.sqrt(np.sort(w))
    if _pairing_gap(a) <= 64 * _EPS * float(a.sum()):
        raise DivergentIntegralError(
            "interaction integral diverges: two wavenumbers sum to the other two",
            wavenumbers=a.tolist(),
        )
    return float(closed_form_d2(np.sort(w)))


def _pairing_gap(a: np.ndarray) -> float:
    """Smallest ``|a_i + a_j - a_k - a_l|`` over the three pairings."""
    a0, a1, a2, a3 = a
    return min(abs(a0 + a1 - a2 - a3), abs(a0 + a2 - a1 - a3), abs(a0 + a3 - a1 - a2))


def kernel_interaction(d: int, w) -> np.ndarray:
    """Closed-form interaction integral for frequency rows ``w[..., 4]`` (d = 2 or 3)."""
    d = check_dimension(d)
    if d == 3:
        out = closed_form_d3(w)
        a = np.sqrt(np.asarray(w, dtype=float))
        return np.where(2 * a.max(axis=-1) >= a.sum(axis=-1), 0.0, out)
    if d == 2:
        return closed_form_d2(w)
    raise DomainError("the interaction integral does not converge in d=1")


# ---------------------------------------------------------------------------
# tail moments  E(b, p) = int_Q^inf exp(i b q) q^{-p} dq


def tail_moments(b: float, pmax: int, Q: float) -> np.ndarray:
    """Moments ``E(b, p)`` for ``p = 1..pmax`` (index ``p - 1``).

    ``E(b, 1)`` comes from the sine/cosine integrals, higher orders from
    ``E(b, p) = [Q^{1-p} e^{ibQ} + i b E(b, p-1)] / (p-1)`` when ``|b| Q`` is
    moderate, and from the integration-by-parts asymptotic series when it is
    large.  ``E(0, 1)`` diverges and is returned as ``nan``.
    """
    out = np.empty(pmax, dtype=complex)
    if b == 0.0:
        out[0] = np.nan
        for p in range(2, pmax + 1):
            out[p - 1] = Q ** (1 - p) / (p - 1)
        return out
    x = abs(b) * Q
    phase = complex(math.cos(b * Q), math.sin(b * Q))
    if x < 30.0:
        si, ci = sici(x)
        out[0] = complex(-ci, math.copysign(1.0, b) * (0.5 * math.pi - si))
        for p in range(2, pmax + 1):
            out[p - 1] = (Q ** (1 - p) * phase + 1j * b * out[p - 2]) / (p - 1)
        return out
    for p in range(1, pmax + 1):
        z = -1j / (b * Q)
        term = 1.0 + 0j
        total = 0j
        prev = math.inf
        k = 0
        while abs(term) < prev and abs(term) > 1e-18 * max(abs(total), 1e-300):
            total += term
            prev = abs(term)
            term = term * (p + k) * z
            k += 1
        out[p - 1] = (1j / b) * phase * Q ** (-p) * total
    return out


# ---------------------------------------------------------------------------
# head quadrature


def _head(d: int, a: np.ndarray, Q: float, h: float) -> tuple[float, float, int]:
    """Composite Gauss-Legendre on [0, Q]; returns (value, error estimate, panels)."""
    n = max(1, int(math.ceil(Q / h)))
    edges = np.linspace(0.0, Q, n + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    half, mid = (hi - lo) / 2, (hi + lo) / 2

    def rule(nodes, weights):
        q = mid + half * nodes[None, :]
        f = q ** (d - 1)
        for aj in a:
            f = f * lambda_d(d, aj * q)
        return half * (f * weights[None, :]), q

    wf16, _ = rule(*_GL16)
    wf10, _ = rule(*_GL10)
    panel16 = wf16.sum(axis=1)
    panel10 = wf10.sum(axis=1)
    value = float(panel16.sum())
    err = float(np.abs(panel16 - panel10).sum() + 16 * _EPS * np.abs(wf16).sum())
    return value, err, n


# ---------------------------------------------------------------------------
# tails


def _tail_d3(a: np.ndarray, Q: float) -> tuple[float, float]:
    # q^2 prod sin(a q)/(a q) = q^-2 prod sin(a q) / prod a, and
    # prod sin(a_j q) = (1/16) sum_eps parity(eps) cos(b_eps q)
    total = 0.0
    mag = 0.0
    for eps, parity in zip(_SIGNS, _SIGN_PARITY):
        b = float(eps @ a)
        e2 = tail_moments(b, 2, Q)[1]
        total += parity * e2.real
        mag += abs(e2)
    scale = 1.0 / (16.0 * float(np.prod(a)))
    return total * scale, 64 * _EPS * mag * scale


def _hankel_coefficients(kmax: int) -> np.ndarray:
    """``alpha_k`` with ``H_0^(1)(x) ~ sqrt(2/(pi x)) e^{i(x-pi/4)} sum_k i^k alpha_k x^-k``."""
    alpha = np.empty(kmax + 1)
    alpha[0] = 1.0
    for k in range(1, kmax + 1):
        alpha[k] = alpha[k - 1] * (-((2 * k - 1) ** 2)) / (8.0 * k)
    return alpha


def _tail_d2_bound(a: np.ndarray, Q: float, K: int, alpha: np.ndarray) -> float:
    # remainder of each truncated Hankel series is bounded by its first omitted
    # term; the product of the remaining factors is bounded by (1 + remainder)
    rem = np.abs(alpha[K + 1]) / (a * Q) ** (K + 1)
    hmax = np.array([np.sum(np.abs(alpha[: K + 1]) / (aj * Q) ** np.arange(K + 1)) for aj in a])
    total = 0.0
    for j in range(4):
        others = np.prod(np.delete(hmax + rem, j))
        total += rem[j] * others
    prefactor = (4.0 / math.pi**2) / math.sqrt(float(np.prod(a)))
    return prefactor * total / (K + 1)


def _tail_d2(a: np.ndarray, Q: float, K: int, alpha: np.ndarray) -> tuple[float, float]:
    inv = 1.0 / a
    ik = (1j) ** np.arange(K + 1)
    total = 0j
    mag = 0.0
    for eps in _SIGNS:
        b = float(eps @ a)
        poly = np.ones(1, dtype=complex)
        for j in range(4):
            c = ik * alpha[: K + 1] * inv[j] ** np.arange(K + 1)
            if eps[j] < 0:
                c = np.conj(c)
            poly = np.convolve(poly, c)[: K + 1]
        moments = tail_moments(b, K + 1, Q)
        if b == 0.0 or abs(b) <= 64 * _EPS * float(a.sum()):
            if poly[0] != 0:
                raise DivergentIntegralError(
                    "interaction integral diverges: two wavenumbers sum to the other two",
                    wavenumbers=a.tolist(),
                    signs=eps.tolist(),
                )
            moments[0] = 0.0
        phase = np.exp(-0.25j * math.pi * eps.sum())
        terms = poly * moments[: K + 1]
        total += phase * terms.sum()
        mag += float(np.abs(terms).sum())
    prefactor = (4.0 / math.pi**2) / math.sqrt(float(np.prod(a))) / 16.0
    return float(total.real) * prefactor, 256 * _EPS * mag * prefactor


def _best_order(a: np.ndarray, Q: float, alpha: np.ndarray, kmax: int) -> tuple[int, float]:
    best = (1, math.inf)
    for K in range(1, kmax):
        bound = _tail_d2_bound(a, Q, K, alpha)
        if bound < best[1]:
            best = (K, bound)
    return best


def interaction_integral(d: int, quad, tol: float = 1e-8, *, max_refinements: int = 12) -> QuadratureReport:
    """Interaction integral with a certified error estimate.

    Parameters
    ----------
    d : int
        Dimension, 2 or 3.
    quad : FrequencyQuad or sequence of four floats
        Frequencies, each at least :data:`OMEGA_MIN`.
    tol : float
        Requested accuracy relative to ``max(|I|, natural_scale)``; at least
        :data:`TOL_FLOOR`.

    Returns
    -------
    QuadratureReport

    Raises
    ------
    DomainError
        Unsupported dimension, frequency below the floor or tolerance too small.
    DivergentIntegralError
        d = 2 with a vanishing two-plus-two wavenumber combination.
    ConvergenceError
        The error estimate could not be brought below the target.
    """
    d = check_dimension(d)
    if d == 1:
        raise DomainError("the interaction integral does not converge in d=1")
    if not tol >= TOL_FLOOR:
        raise DomainError(f"tolerance must be >= {TOL_FLOOR:g}", tol=tol)
    quad = _coerce_quad(quad)
    quad.require_floor()
    # canonical order: the integrand is symmetric, and sorting makes the
    # floating-point evaluation independent of argument order
    a = np.sqrt(np.sort(quad.as_array()))
    scale = natural_scale(d, a)
    h = 2.0 * math.pi / float(a.sum())
    if d == 3:
        Q = 8 * h
        tail_method = "closed-form-d3"
    else:
        Q = max(24.0 / float(a.min()), 8 * h)
        tail_method = "asymptotic-expansion"
        alpha = _hankel_coefficients(41)

    history = []
    for _ in range(max_refinements):
        head, head_err, panels = _head(d, a, Q, h)
        if d == 3:
            tail, tail_err = _tail_d3(a, Q)
        else:
            K, bound = _best_order(a, Q, alpha, 40)
            tail, tail_round = _tail_d2(a, Q, K, alpha)
            tail_err = bound + tail_round
        value = head + tail
        err = head_err + tail_err
        history.append(
            {"Q": Q, "h": h, "value": value, "head_error": head_err, "tail_error": tail_err}
        )
        target = tol * max(abs(value), scale)
        if err <= target:
            s = sphere_area(d)
            return QuadratureReport(float(s * value), float(s * err), panels, tail_method)
        if head_err > 0.5 * target:
            h /= 2
        if d == 2 and tail_err > 0.5 * target:
            Q *= 1.5
    raise ConvergenceError(
        "interaction integral did not reach the requested tolerance",
        d=d,
        quad=quad.as_array().tolist(),
        tol=tol,
        history=history,
    )


def scaling_check(d: int, quad, L: float, tol: float = 1e-8) -> float:
    """Residual of the dilation law ``I(w / L^2) = L^d I(w)``.

    The residual is relative to ``max(|L^d I(w)|, natural_scale)`` of the
    dilated quad, matching the tolerance convention, so quads without a
    closure (``I = 0`` up to roundoff) do not divide by zero.
    """
    if not (0.125 <= L <= 8.0):
        raise DomainError("dilation factor must lie in [1/8, 8]", L=L)
    quad = _coerce_quad(quad)
    base = interaction_integral(d, quad, tol).value
    if L == 1.0:
        return 0.0
    scaled = quad.scaled(L)
    dilated = interaction_integral(d, scaled, tol).value
    reference = L**d * base
    denom = max(abs(reference), natural_scale(d, np.sqrt(scaled.as_array())))
    return abs(dilated - reference) / denom
