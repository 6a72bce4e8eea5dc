"""Monte-Carlo cross-checks of the radial kernel against the angular form.

The sphere-delta integral

    J(w) = iiint delta_{R^d}(a0 e - a1 t1 + a2 t2 - a3 t3) dt1 dt2 dt3,   a_j = sqrt(w_j),

with ``e`` a fixed unit vector and ``t_j`` ranging over the unit sphere, equals
``s(d)^3 I(w) / (2 pi)^d``.  (Integrating over the direction of the first
vector as well multiplies both sides by ``s(d)``.)  It is estimated with a
Gaussian mollifier of width ``sigma``: ``t1`` is sampled uniformly, the
integrals over ``t2`` and ``t3`` are done deterministically, and the results for a decreasing
sequence of widths are extrapolated to ``sigma = 0`` by a least-squares
polynomial in ``sigma^2``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf, i0e

from .collision import kernel_kstar
from .errors import DomainError, InstabilityError
from .rng import stream
from .interaction import OMEGA_MIN, FrequencyQuad, interaction_integral
from .specfun import check_dimension, sphere_area

BATCH = 1 << 14


# ---------------------------------------------------------------------------
# random streams and accumulators


def sphere_points(rng: np.random.Generator, d: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform points on ``S^{d-1}`` from normalised isotropic Gaussians."""
    g = rng.standard_normal(shape + (d,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


@dataclass
class RunningStats:
    """Mergeable mean/variance accumulator (pairwise Welford update)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, samples: np.ndarray) -> "RunningStats":
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        return cls(int(x.size), mu, float(np.sum((x - mu) ** 2)))

    def merge(self, other: "RunningStats") -> "RunningStats":
        n = self.count + other.count
        if n == 0:
            return RunningStats()
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningStats(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.inf

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.inf


@dataclass(frozen=True)
class SphereSampleBatch:
    """Four-tuples of unit vectors drawn reproducibly from ``seed``."""

    d: int
    count: int
    unit_vectors: np.ndarray
    seed: int

    @classmethod
    def draw(cls, d: int, count: int, seed: int, stream_id: int = 0) -> "SphereSampleBatch":
        d = check_dimension(d)
        if count < 1:
            raise DomainError("count must be positive")
        pts = sphere_points(stream(seed, stream_id), d, (count, 4))
        return cls(d, count, pts, int(seed))

    def __post_init__(self) -> None:
        norms = np.linalg.norm(self.unit_vectors, axis=-1)
        if self.unit_vectors.shape != (self.count, 4, self.d) or np.any(np.abs(norms - 1) > 1e-12):
            raise DomainError("sample batch must hold unit vectors of shape (count, 4, d)")


@dataclass(frozen=True)
class SmoothedDeltaConfig:
    """Mollifier widths (relative to the mean wavenumber) and samples per width."""

    sigma_sequence: tuple[float, ...] = (0.08, 0.06, 0.04, 0.02)
    samples_per_sigma: int = 100_000
    degree: int = 2

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma_sequence, dtype=float)
        if s.size < 2 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise DomainError("sigma sequence must be positive and strictly decreasing")
        if self.samples_per_sigma < 10_000:
            raise DomainError("at least 1e4 samples per width are required")
        if not 1 <= self.degree < s.size:
            raise DomainError("extrapolation degree must be below the number of widths")


# ---------------------------------------------------------------------------
# mollified sphere-delta estimator


_GL32 = np.polynomial.legendre.leggauss(32)


def _pair_average_d3(R: np.ndarray, a2: np.ndarray, a3: np.ndarray, sigma: float) -> np.ndarray:
    """``E[ int_{S^2} g_sigma(V - Y) ]`` over ``Y = a2 t2 - a3 t3`` in closed form, ``|V| = R``.

    ``|Y|`` has density ``r / (2 a2 a3)`` on ``[|a2 - a3|, a2 + a3]`` and the
    spherical average of a Gaussian reduces the remaining integral to error
    functions.
    """
    lo, hi = np.abs(a2 - a3), a2 + a3
    k = 1.0 / (math.sqrt(2.0) * sigma)
    bracket = erf((hi - R) * k) - erf((lo - R) * k) - erf((hi + R) * k) + erf((lo + R) * k)
    with np.errstate(invalid="ignore", divide="ignore"):
        body = bracket / (4 * a2 * a3 * R)
    # R -> 0: the bracket vanishes linearly
    limit = (np.exp(-((lo * k) ** 2)) - np.exp(-((hi * k) ** 2))) * k / (math.sqrt(math.pi) * a2 * a3)
    return np.where(R > 1e-9 * (hi + sigma), body, limit)


def _pair_average_d2(R: np.ndarray, a2: np.ndarray, a3: np.ndarray, sigma: float) -> np.ndarray:
    """Same average in two dimensions by Gauss-Legendre over the relative angle.

    With ``|Y|^2 = a2^2 + a3^2 - 2 a2 a3 cos(phi)``, ``phi`` uniform on
    ``[0, pi]``, the integrand is a narrow bump around ``|Y| = R``; the rule is
    placed on the window ``| |Y| - R | <= 9 sigma``.
    """
    x, w = _GL32
    lo, hi = np.abs(a2 - a3), a2 + a3

    def angle(r):
        c = (a2**2 + a3**2 - np.clip(r, lo, hi) ** 2) / (2 * a2 * a3)
        return np.arccos(np.clip(c, -1.0, 1.0))

    p0, p1 = angle(R - 9 * sigma), angle(R + 9 * sigma)
    half = (p1 - p0) / 2
    phi = (p0 + p1)[:, None] / 2 + half[:, None] * x
    r = np.sqrt(np.maximum(a2[:, None] ** 2 + a3[:, None] ** 2 - 2 * (a2 * a3)[:, None] * np.cos(phi), 0.0))
    Rc = R[:, None]
    shell = np.exp(-((Rc - r) ** 2) / (2 * sigma**2)) * i0e(Rc * r / sigma**2) / sigma**2
    return (half * (shell @ w)) / math.pi


def _delta_samples(d: int, a: np.ndarray, sigma: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """Unbiased samples of the mollified ``J`` at wavenumbers ``a`` (shape ``(4,)`` or ``(n, 4)``).

    Only the direction ``t1`` is random; the average over ``t2`` and ``t3`` is
    carried out deterministically, so the variance stays bounded as the
    mollifier narrows.
    """
    if d not in (2, 3):
        raise DomainError("the sphere-delta estimator needs d in {2, 3}")
    a = np.broadcast_to(np.asarray(a, dtype=float), (n, 4))
    t1 = sphere_points(rng, d, (n,))
    v = -a[:, 1, None] * t1
    v[:, 0] += a[:, 0]
    R = np.linalg.norm(v, axis=-1)
    pair = _pair_average_d3 if d == 3 else _pair_average_d2
    return sphere_area(d) ** 2 * pair(R, a[:, 2], a[:, 3], sigma)


def _accumulate(draw: Callable[[np.random.Generator, int], np.ndarray], seed: int, level: int, n: int, threads: int):
    sizes = [BATCH] * (n // BATCH) + ([n % BATCH] if n % BATCH else [])

    def run(k: int) -> RunningStats:
        return RunningStats.of(draw(stream(seed, level, k), sizes[k]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    total = RunningStats()
    for p in parts:
        total = total.merge(p)
    return total


@dataclass(frozen=True)
class Extrapolation:
    sigmas: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    value: float
    stderr: float
    stat_error: float = 0.0
    model_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "stat_error": self.stat_error,
            "model_error": self.model_error,
            "sigmas": self.sigmas.tolist(),
            "means": self.means.tolist(),
            "stderrs": self.stderrs.tolist(),
            "value": self.value,
            "stderr": self.stderr,
        }


def extrapolate_sigma(sigmas, means, stderrs, degree: int = 2) -> Extrapolation:
    """Weighted least-squares polynomial in ``sigma^2`` evaluated at zero.

    The reported standard error combines the propagated Monte-Carlo error with
    the change of the extrapolated value when the widest level is dropped,
    which exposes widths outside the polynomial regime.

    Raises
    ------
    InstabilityError
        If the sequence of means is not monotone in ``sigma`` beyond three
        combined standard errors.
    """
    s = np.asarray(sigmas, float)
    m = np.asarray(means, float)
    e = np.asarray(stderrs, float)
    steps = np.diff(m)
    noise = 3 * np.sqrt(e[1:] ** 2 + e[:-1] ** 2)
    significant = np.abs(steps) > noise
    signs = np.sign(steps[significant])
    if signs.size and np.any(signs != signs[0]):
        raise InstabilityError(
            "mollified estimates are not monotone in sigma", sigmas=s, means=m, stderrs=e
        )
    value, stat = _weighted_extrapolation(s, m, e, degree)
    # Richardson-style model error: drop the widest level and refit
    sub_degree = min(degree, s.size - 2)
    coarse, _ = _weighted_extrapolation(s[1:], m[1:], e[1:], sub_degree)
    model = abs(value - coarse)
    return Extrapolation(s, m, e, value, math.hypot(stat, model), stat, model)


def _weighted_extrapolation(s, m, e, degree):
    # relative weights are capped so the normal equations stay well conditioned
    w = 1.0 / np.maximum(e, 1e-3 * max(float(np.max(e)), 1e-300))
    design = np.vander(s**2, degree + 1, increasing=True)
    c = np.linalg.pinv(design * w[:, None])[0] * w
    return float(c @ m), float(math.sqrt(np.sum((c * e) ** 2)))


def sphere_delta_target(d: int, quad: FrequencyQuad, tol: float = 1e-10) -> tuple[float, float]:
    """``s(d)^3 I(w) / (2 pi)^d`` and its error bound from the certified interaction integral."""
    rep = interaction_integral(d, quad, tol)
    factor = sphere_area(d) ** 3 / (2 * math.pi) ** d
    return factor * rep.value, factor * rep.abs_error_estimate


def four_sphere_delta_mc(
    d: int,
    quad,
    cfg: SmoothedDeltaConfig = SmoothedDeltaConfig(),
    seed: int = 0,
    threads: int = 1,
) -> Extrapolation:
    """Monte-Carlo estimate of the sphere-delta integral ``J`` with sigma extrapolation.

    Widths in ``cfg`` are multiplied by the mean wavenumber of ``quad``.
    """
    d = check_dimension(d)
    if d == 1:
        raise DomainError("the sphere-delta check needs d in {2, 3}")
    quad = quad if isinstance(quad, FrequencyQuad) else FrequencyQuad.of(quad)
    quad.require_floor(OMEGA_MIN)
    a = np.sqrt(quad.as_array())
    unit = float(a.mean())
    sigmas = np.asarray(cfg.sigma_sequence) * unit
    stats = [
        _accumulate(lambda rng, n, s=s: _delta_samples(d, a, s, rng, n), seed, level, cfg.samples_per_sigma, threads)
        for level, s in enumerate(sigmas)
    ]
    means = np.array([st.mean for st in stats])
    errs = np.array([st.stderr for st in stats])
    return extrapolate_sigma(sigmas, means, errs, cfg.degree)


@dataclass(frozen=True)
class IdentityReport:
    """Monte-Carlo estimate against the interaction-integral value of ``J``.

    ``combined_error`` adds the extrapolation error and the quadrature error
    bound of the target in quadrature.
    """

    d: int
    quad: tuple[float, float, float, float]
    target: float
    target_error: float
    estimate: Extrapolation
    status: str

    @property
    def combined_error(self) -> float:
        return math.hypot(self.estimate.stderr, self.target_error)

    @property
    def z_score(self) -> float:
        diff = abs(self.estimate.value - self.target)
        if diff == 0.0:
            return 0.0
        return diff / self.combined_error if self.combined_error > 0 else math.inf

    def to_dict(self) -> dict:
        out = asdict(self)
        out["estimate"] = self.estimate.to_dict()
        out["combined_error"] = self.combined_error
        out["z_score"] = self.z_score
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sphere_delta_identity(
    d: int, quad, cfg: SmoothedDeltaConfig = SmoothedDeltaConfig(), seed: int = 0, threads: int = 1, nsigma: float = 3.0
) -> IdentityReport:
    """Compare the Monte-Carlo sphere-delta integral with ``s^3 I / (2 pi)^d``."""
    quad = quad if isinstance(quad, FrequencyQuad) else FrequencyQuad.of(quad)
    target, target_err = sphere_delta_target(d, quad)
    est = four_sphere_delta_mc(d, quad, cfg, seed, threads)
    report = IdentityReport(d, tuple(quad.as_array().tolist()), target, target_err, est, "pending")
    status = "pass" if report.z_score <= nsigma else "fail"
    return IdentityReport(d, report.quad, target, target_err, est, status)


# ---------------------------------------------------------------------------
# radial reduction


def radial_weight(d: int, omega) -> np.ndarray:
    """Radial Jacobian ``g(w) = (1/2) (2 pi)^{-d} w^{d/2-1}`` of ``dk = g dw dtheta``."""
    d = check_dimension(d)
    return 0.5 * (2 * math.pi) ** (-d) * np.asarray(omega, dtype=float) ** (d / 2 - 1)


@dataclass(frozen=True)
class GaussianProfile:
    """Test function ``amplitude * exp(-(w - center)^2 / (2 width^2))``."""

    center: float
    width: float
    amplitude: float = 1.0

    def __call__(self, w):
        return self.amplitude * np.exp(-((np.asarray(w) - self.center) ** 2) / (2 * self.width**2))

    @property
    def total(self) -> float:
        return self.amplitude * self.width * math.sqrt(2 * math.pi)

    def support(self, k: float = 8.0) -> tuple[float, float]:
        return self.center - k * self.width, self.center + k * self.width


@dataclass(frozen=True)
class ReductionReport:
    d: int
    omega: float
    omega2: float
    profile: GaussianProfile
    radial_value: float
    angular: Extrapolation | None
    discrepancy: float
    stderr: float
    status: str

    def to_dict(self) -> dict:
        out = asdict(self)
        out["angular"] = None if self.angular is None else self.angular.to_dict()
        return out


def _radial_side(d: int, omega: float, omega2: float, profile: GaussianProfile, tol: float) -> float:
    lo, hi = profile.support()
    lo = max(lo, OMEGA_MIN)
    hi = min(hi, omega + omega2 - OMEGA_MIN)
    if hi <= lo:
        return 0.0
    cuts = sorted({lo, hi, *(c for c in (omega, omega2) if lo < c < hi)})
    x, w = np.polynomial.legendre.leggauss(48)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        nodes = (a + b) / 2 + (b - a) / 2 * x
        vals = [kernel_kstar(d, (omega, n, omega2, omega - n + omega2), tol) for n in nodes]
        total += (b - a) / 2 * float(np.dot(w, np.asarray(vals) * profile(nodes)))
    return total


def radial_reduction_check(
    d: int,
    omega: float,
    omega2: float,
    profile: GaussianProfile,
    cfg: SmoothedDeltaConfig = SmoothedDeltaConfig(),
    seed: int = 0,
    *,
    tol: float = 1e-9,
    max_rel_stderr: float = 0.05,
    nsigma: float = 3.0,
    threads: int = 1,
) -> ReductionReport:
    """Integrate the radial kernel and the angular (four-sphere) kernel against a test profile in ``w1``.

    The radial side is ``int K(w, w1, w2, w3) profile(w1) dw1`` with
    ``w3 = w - w1 + w2`` (deterministic quadrature).  The angular side is

        int profile(w1) 4 pi^2 g(w1) g(w2) g(w3) (2 pi)^d J(w, w1, w2, w3) dw1,

    estimated by sampling ``w1`` from the normalised profile together with the
    sphere directions.  The status is ``"inconclusive"`` when the Monte-Carlo
    standard error exceeds ``max_rel_stderr`` of the radial value.
    """
    d = check_dimension(d)
    if d == 1:
        raise DomainError("the reduction check needs d in {2, 3}")
    if min(omega, omega2) < OMEGA_MIN:
        raise DomainError("frequencies must be at least the frequency floor")
    radial = _radial_side(d, omega, omega2, profile, tol)
    if profile.amplitude == 0.0:
        return ReductionReport(d, omega, omega2, profile, radial, None, 0.0, 0.0, "pass")

    lo, hi = profile.support()
    lo = max(lo, OMEGA_MIN)
    hi = min(hi, omega + omega2 - OMEGA_MIN)
    unit = math.sqrt(omega)
    const = 4 * math.pi**2 * (2 * math.pi) ** d * profile.total

    def draw(rng, n, sigma):
        w1 = rng.normal(profile.center, profile.width, n)
        inside = (w1 >= lo) & (w1 <= hi)
        w1c = np.clip(w1, lo, hi)
        w3 = omega - w1c + omega2
        a = np.sqrt(np.stack([np.full(n, omega), w1c, np.full(n, omega2), w3], axis=1))
        g = radial_weight(d, w1c) * radial_weight(d, omega2) * radial_weight(d, w3)
        return np.where(inside, const * g * _delta_samples(d, a, sigma, rng, n), 0.0)

    sigmas = np.asarray(cfg.sigma_sequence) * unit
    stats = [
        _accumulate(lambda rng, n, s=s: draw(rng, n, s), seed, level, cfg.samples_per_sigma, threads)
        for level, s in enumerate(sigmas)
    ]
    est = extrapolate_sigma(sigmas, [s.mean for s in stats], [s.stderr for s in stats], cfg.degree)
    diff = abs(est.value - radial)
    if est.stderr > max_rel_stderr * abs(radial):
        status = "inconclusive"
    else:
        status = "pass" if diff <= nsigma * est.stderr else "fail"
    return ReductionReport(d, omega, omega2, profile, radial, est, diff, est.stderr, status)


# ---------------------------------------------------------------------------
# monochromatic random waves


@dataclass(frozen=True)
class MonochromaticWave:
    """``Phi(x) = sqrt(2/n) sum_j cos(sqrt(lam) theta_j . x + phi_j)``."""

    lam: float
    directions: np.ndarray
    phases: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        arg = math.sqrt(self.lam) * (x @ self.directions.T) + self.phases
        return math.sqrt(2.0 / self.phases.size) * np.cos(arg).sum(axis=-1)


def sample_monochromatic_wave(d: int, lam: float, n_plane_waves: int, seed: int, stream_id: int = 0) -> MonochromaticWave:
    """One realisation of the monochromatic Gaussian random wave at frequency ``lam``."""
    d = check_dimension(d)
    if n_plane_waves < 64:
        raise DomainError("at least 64 plane waves are required")
    if not lam > 0:
        raise DomainError("frequency must be positive")
    rng = stream(seed, stream_id)
    return MonochromaticWave(
        float(lam), sphere_points(rng, d, (n_plane_waves,)), rng.uniform(0, 2 * math.pi, n_plane_waves)
    )


def two_point_correlation(
    d: int, lam: float, radii: Sequence[float], realizations: int, n_plane_waves: int = 64, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``E[Phi(0) Phi(r e1)]`` with standard errors over independent realisations."""
    radii = np.asarray(radii, dtype=float)
    acc = [RunningStats() for _ in radii]
    e1 = np.zeros(d)
    e1[0] = 1.0
    for k in range(0, realizations, 256):
        m = min(256, realizations - k)
        rng = stream(seed, 7, k)
        theta = sphere_points(rng, d, (m, n_plane_waves))
        phase = rng.uniform(0, 2 * math.pi, (m, n_plane_waves))
        amp = math.sqrt(2.0 / n_plane_waves)
        phi0 = amp * np.cos(phase).sum(axis=1)
        proj = theta @ e1
        for i, r in enumerate(radii):
            phir = amp * np.cos(math.sqrt(lam) * r * proj + phase).sum(axis=1)
            acc[i] = acc[i].merge(RunningStats.of(phi0 * phir))
    return np.array([a.mean for a in acc]), np.array([a.stderr for a in acc])
