"""Random-phase ensembles of the cubic Schrodinger equation on a dilated torus.

The torus ``[0, L)^d`` carries the modes ``psi_k = exp(2 pi i k.x)`` with
``k in Z^d / L`` and frequencies ``w_k = |2 pi k|^2``.  A field is stored by its
amplitudes ``A_k`` in ``u = L^{-d/2} sum_k A_k psi_k``, so ``sum |A_k|^2`` is
the mass.  Arrays use the FFT ordering of integer indices ``m = L k``.

Evolution of ``i u_t + Delta u = eps |u|^2 u`` uses Strang splitting: the
linear flow is an exact phase in Fourier space, the nonlinear flow an exact
pointwise phase in physical space followed by a 2/3-rule projection.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .collision import FrequencyGrid, SpectralDensity, mismatch_profile
from .errors import DomainError, ResourceError, StepSizeError
from .rng import stream

TRUNCATION_TOL = 1e-8
MASS_TOL = 1e-8
QUADRUPLE_BUDGET = 50_000_000
_GL16 = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class TorusModel:
    """Unit-volume torus of side ``L`` truncated to ``n_modes`` per axis."""

    d: int
    L: float
    n_modes: int
    epsilon: float

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise DomainError("torus simulations support d = 1, 2, 3", d=self.d)
        if not self.L >= 1:
            raise DomainError("L must be at least 1")
        n = int(self.n_modes)
        if n != self.n_modes or n < 4 or n & (n - 1):
            raise DomainError("n_modes must be a power of two >= 4", n_modes=self.n_modes)
        if not math.isfinite(self.epsilon):
            raise DomainError("epsilon must be finite")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_modes,) * self.d

    @property
    def gamma(self) -> float:
        return self.L ** (-self.d)

    @property
    def cells(self) -> int:
        return self.n_modes**self.d

    def indices(self) -> list[np.ndarray]:
        m = np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes)
        return np.meshgrid(*([m] * self.d), indexing="ij")

    def omega(self) -> np.ndarray:
        return sum((2 * math.pi * m / self.L) ** 2 for m in self.indices())

    def retained(self) -> np.ndarray:
        """All modes except the Nyquist planes ``|m_i| = n/2``."""
        return np.all([np.abs(m) < self.n_modes // 2 for m in self.indices()], axis=0)

    def dealiased(self) -> np.ndarray:
        """2/3-rule band ``|m_i| <= n/3``."""
        return np.all([np.abs(m) <= self.n_modes // 3 for m in self.indices()], axis=0)

    def to_physical(self, amplitudes: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(amplitudes) * (self.cells * self.L ** (-self.d / 2))

    def to_modes(self, u: np.ndarray) -> np.ndarray:
        return np.fft.fftn(u) * (self.L ** (self.d / 2) / self.cells)


@dataclass(frozen=True)
class ModeField:
    """Amplitudes ``A_k`` at time ``t``."""

    model: TorusModel
    amplitudes: np.ndarray
    t: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def prepared_data(
    model: TorusModel, phi: Callable, seed: int, realization: int = 0, band: np.ndarray | None = None
) -> ModeField:
    """Random-phase data ``A_k = phi(w_k) exp(i theta_k)`` on the dealiased band.

    Raises
    ------
    DomainError
        If ``|phi|`` at the band edge exceeds ``1e-8`` of its maximum, so the
        truncation would be visible.
    """
    band = model.dealiased() if band is None else band
    w = model.omega()
    amp = np.where(band, np.asarray(phi(w), dtype=complex), 0.0)
    peak = float(np.max(np.abs(amp)))
    if peak == 0.0:
        return ModeField(model, amp)
    edge = band & ~_interior(band)
    if np.max(np.abs(amp[edge]), initial=0.0) > TRUNCATION_TOL * peak:
        raise DomainError("phi is not negligible at the truncation edge", edge_omega=float(np.min(w[edge])))
    return ModeField(model, amp * np.exp(1j * random_phases(model, seed, realization)))


def _interior(mask: np.ndarray) -> np.ndarray:
    inner = mask.copy()
    for axis in range(mask.ndim):
        inner &= np.roll(mask, 1, axis) & np.roll(mask, -1, axis)
    return inner


def random_phases(model: TorusModel, seed: int, realization: int = 0) -> np.ndarray:
    """The phase field used by :func:`prepared_data` for this stream."""
    return stream(seed, 0x70, realization).uniform(0.0, 2 * math.pi, model.shape)


def rayleigh_pvalue(angles: np.ndarray) -> float:
    """p-value of the Rayleigh test of circular uniformity."""
    angles = np.ravel(angles)
    n = angles.size
    r = abs(np.sum(np.exp(1j * angles)))
    stat = math.sqrt(1 + 4 * n + 4 * (n * n - r * r)) - (1 + 2 * n)
    return float(min(1.0, math.exp(stat)))


# ---------------------------------------------------------------------------
# pairing rule


@dataclass(frozen=True)
class PairingCheck:
    quadruples: list[tuple]
    estimates: np.ndarray
    stderrs: np.ndarray
    expected: np.ndarray
    z_scores: np.ndarray

    @property
    def max_z(self) -> float:
        return float(np.max(self.z_scores))


def pairing_expectation_check(
    model: TorusModel,
    phi: Callable,
    quadruples: Sequence[tuple],
    n_realizations: int,
    seed: int,
) -> PairingCheck:
    """Ensemble means of ``conj(c_n) c_n1 conj(c_n2) c_n3`` against the pairing rule.

    The expectation is ``|phi_n|^2 |phi_n2|^2`` when ``(n, n2)`` equals
    ``(n1, n3)`` or ``(n3, n1)`` and zero otherwise (both pairings give the
    same value when all four coincide).  Quadruples are tuples of integer index
    vectors ``m``.
    """
    if n_realizations < 10_000:
        raise DomainError("the pairing check needs at least 1e4 realizations")
    quads = [tuple(tuple(int(v) for v in np.atleast_1d(q)) for q in quad) for quad in quadruples]
    for quad in quads:
        if len(quad) != 4 or any(len(q) != model.d for q in quad):
            raise DomainError("each quadruple needs four index vectors of length d", quadruple=quad)
    samples = np.empty((n_realizations, len(quads)), dtype=complex)
    for r in range(n_realizations):
        a = prepared_data(model, phi, seed, r).amplitudes
        for j, (n, n1, n2, n3) in enumerate(quads):
            samples[r, j] = np.conj(a[n]) * a[n1] * np.conj(a[n2]) * a[n3]
    est = samples.mean(axis=0)
    var = samples.real.var(axis=0, ddof=1) + samples.imag.var(axis=0, ddof=1)
    se = np.sqrt(var / n_realizations)
    amp = np.abs(prepared_data(model, phi, seed, 0).amplitudes)
    expected = np.array(
        [
            amp[n] ** 2 * amp[n2] ** 2 if (n, n2) in ((n1, n3), (n3, n1)) else 0.0
            for n, n1, n2, n3 in quads
        ]
    )
    diff = np.abs(est - expected)
    scale = np.maximum(se, 1e-13 * np.maximum(expected, 1.0))
    return PairingCheck(quads, est, se, expected, diff / scale)


# ---------------------------------------------------------------------------
# evolution


def evolve_nls(field: ModeField, t_final: float, dt: float) -> ModeField:
    """Strang split-step solution of ``i u_t + Delta u = eps |u|^2 u``.

    The step is shrunk so that it divides ``t_final``.

    Raises
    ------
    DomainError
        If ``dt * max w`` over the dealiased band exceeds 0.5.
    StepSizeError
        If the mass drifts by more than ``1e-8`` relative (energy left the band).
    """
    model = field.model
    if not (t_final >= 0 and dt > 0):
        raise DomainError("t_final must be nonnegative and dt positive")
    band = model.dealiased()
    w = model.omega()
    if dt * float(np.max(w[band])) > 0.5:
        raise DomainError("time step too large for the retained frequencies", dt=dt)
    n = max(1, int(math.ceil(t_final / dt - 1e-12))) if t_final > 0 else 0
    a = np.where(band, field.amplitudes, 0.0)
    mass0 = float(np.sum(np.abs(a) ** 2))
    if n == 0:
        return ModeField(model, a, field.t)
    h = t_final / n
    half = np.exp(-0.5j * h * w)
    full = half * half
    eps = model.epsilon
    a = a * half
    for i in range(n):
        u = model.to_physical(a)
        u *= np.exp(-1j * eps * h * (u.real**2 + u.imag**2))
        a = model.to_modes(u)
        a[~band] = 0.0
        a *= full if i + 1 < n else half
    mass = float(np.sum(np.abs(a) ** 2))
    if abs(mass - mass0) > MASS_TOL * mass0:
        raise StepSizeError("mass not conserved; energy reached the dealiasing edge", drift=(mass - mass0) / mass0)
    return ModeField(model, a, field.t + t_final)


def free_evolution(field: ModeField, t: float) -> ModeField:
    return ModeField(field.model, field.amplitudes * np.exp(-1j * t * field.model.omega()), field.t + t)


def wick_shift(field: ModeField, t: float) -> ModeField:
    """Global phase ``exp(2 i eps gamma m t)`` with ``m`` the field's own mass."""
    model = field.model
    phase = np.exp(2j * model.epsilon * model.gamma * field.mass * t)
    return ModeField(model, field.amplitudes * phase, field.t)


def interaction_picture(field: ModeField) -> np.ndarray:
    """Amplitudes with the free rotation undone, ``A_k e^{i w_k t}``."""
    return field.amplitudes * np.exp(1j * field.model.omega() * field.t)


def _band_radius(amplitudes: np.ndarray, model: TorusModel, rel: float = 1e-13) -> int:
    active = np.abs(amplitudes) > rel * np.max(np.abs(amplitudes))
    return int(max(np.max(np.abs(m[active])) for m in model.indices()))


def first_iterate(field: ModeField, t: float, rel: float = 1e-13, radius: int | None = None) -> np.ndarray:
    """``B1_k = sum' c_k1 conj(c_k2) c_k3 int_0^t exp(i s Omega) ds`` for the data ``c``.

    The primed sum runs over ``k1 - k2 + k3 = k`` without the pairings
    ``k1 = k`` and ``k3 = k``.  The cubic sum is a zero-padded FFT product on
    the band ``|m_i| <= K`` holding every amplitude above ``rel`` of the peak;
    the output covers ``|m_i| <= 3K`` (clipped to the mode grid), which is the
    full support of the cubic, and is zero elsewhere.  A smaller ``radius``
    restricts the output to ``|m_i| <= radius``, which shortens the time
    quadrature.  The time integral uses Gauss-Legendre panels fine enough for
    the largest mismatch.
    """
    model = field.model
    c = field.amplitudes
    if not t > 0:
        raise DomainError("t must be positive")
    if not np.any(c):
        return np.zeros_like(c)
    K = _band_radius(c, model, rel)
    R = min(3 * K, model.n_modes // 2 - 1)
    if radius is not None:
        R = min(R, int(radius))
    M = 1 << int(math.ceil(math.log2(3 * K + R + 2)))
    small = np.zeros((M,) * model.d, dtype=complex)
    idx = tuple(np.r_[0 : K + 1, M - K : M] for _ in range(model.d))
    src = tuple(np.r_[0 : K + 1, model.n_modes - K : model.n_modes] for _ in range(model.d))
    small[np.ix_(*idx)] = c[np.ix_(*src)]
    m = np.fft.fftfreq(M, 1.0 / M)
    grids = np.meshgrid(*([m] * model.d), indexing="ij")
    w = sum((2 * math.pi * g / model.L) ** 2 for g in grids)
    inband = np.all([np.abs(g) <= K for g in grids], axis=0)
    outband = np.all([np.abs(g) <= R for g in grids], axis=0)
    wmax = float(np.max(w[inband]) + np.max(w[outband]))
    panels = max(1, int(math.ceil(t * wmax / 8.0)))
    x, wt = _GL16
    h = t / panels
    acc = np.zeros_like(small)
    cells = M**model.d
    for p in range(panels):
        for xi, wi in zip(x, wt):
            s = (p + 0.5 + 0.5 * xi) * h
            v = np.fft.ifftn(small * np.exp(-1j * s * w)) * cells
            acc += (0.5 * h * wi) * np.exp(1j * s * w) * (np.fft.fftn((v.real**2 + v.imag**2) * v) / cells)
    mass = float(np.sum(np.abs(c) ** 2))
    acc -= t * small * (2 * mass - np.abs(small) ** 2)
    acc[~outband] = 0.0
    dst = tuple(np.r_[0 : R + 1, model.n_modes - R : model.n_modes] for _ in range(model.d))
    out = np.zeros_like(c)
    out[np.ix_(*dst)] = acc[np.ix_(*tuple(np.r_[0 : R + 1, M - R : M] for _ in range(model.d)))]
    return out


# ---------------------------------------------------------------------------
# ensembles and shell averages


@dataclass(frozen=True)
class EnsembleSpectrum:
    """Per-shell ensemble means of a mode statistic.

    ``m2`` holds the per-shell sum of squared deviations of the realization
    means, so ensembles merge exactly.  Empty shells carry ``nan`` means and are
    flagged by ``counts == 0``; one realization has an infinite standard error.
    """

    edges: np.ndarray
    centers: np.ndarray
    counts: np.ndarray
    mean: np.ndarray
    m2: np.ndarray
    realizations: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, centers: np.ndarray, counts: np.ndarray, edges: np.ndarray) -> "EnsembleSpectrum":
        """Rows of ``samples`` are the shell means of single realizations."""
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[0] < 1:
            raise DomainError("an ensemble needs at least one realization")
        mean = samples.mean(axis=0)
        m2 = np.sum((samples - mean) ** 2, axis=0)
        return cls(np.asarray(edges, float), centers, counts, mean, m2, samples.shape[0])

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    @property
    def stderr(self) -> np.ndarray:
        n = self.realizations
        if n < 2:
            return np.where(self.empty, np.nan, np.inf)
        return np.sqrt(self.m2 / (n - 1) / n)

    def merge(self, other: "EnsembleSpectrum") -> "EnsembleSpectrum":
        """Union of two disjoint ensembles on the same shells."""
        if not np.array_equal(self.edges, other.edges):
            raise DomainError("ensembles use different shells")
        n1, n2 = self.realizations, other.realizations
        n = n1 + n2
        delta = other.mean - self.mean
        mean = self.mean + delta * n2 / n
        m2 = self.m2 + other.m2 + delta**2 * n1 * n2 / n
        return EnsembleSpectrum(self.edges, self.centers, self.counts, mean, m2, n)


def shell_means(model: TorusModel, values: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average of ``values`` over the modes in each frequency shell ``[e_i, e_{i+1})``.

    Returns the shell means, the mean mode frequency per shell and the mode counts.
    """
    w = model.omega().ravel()
    ids = np.searchsorted(edges, w, side="right") - 1
    keep = (ids >= 0) & (ids < edges.size - 1)
    nb = edges.size - 1
    counts = np.bincount(ids[keep], minlength=nb)
    sums = np.bincount(ids[keep], weights=np.ravel(values)[keep], minlength=nb)
    wsum = np.bincount(ids[keep], weights=w[keep], minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts, wsum / counts, counts


def shell_average(field: ModeField, edges: Sequence[float]) -> EnsembleSpectrum:
    """Single-realization shell spectrum of ``|A_k|^2``."""
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("shell edges must be increasing")
    mean, centers, counts = shell_means(field.model, np.abs(field.amplitudes) ** 2, edges)
    return EnsembleSpectrum.from_samples(mean[None, :], centers, counts, edges)


def _run(fn: Callable[[int], np.ndarray], n: int, threads: int) -> np.ndarray:
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(fn, range(n)))
    else:
        rows = [fn(r) for r in range(n)]
    return np.array(rows)


def _edge_radius(model: TorusModel, edges: np.ndarray) -> int:
    """Largest index radius needed to cover modes with ``omega < edges[-1]``."""
    return int(math.ceil(model.L * math.sqrt(float(edges[-1])) / (2 * math.pi)))


def _check_budget(model: TorusModel, n_realizations: int, work: float, budget: float) -> None:
    if n_realizations * work > budget:
        raise ResourceError("ensemble exceeds the work budget", work=n_realizations * work, budget=budget)


def _continuum_density(phi: Callable, grid: FrequencyGrid) -> SpectralDensity:
    values = np.abs(np.asarray(phi(grid.nodes), dtype=complex)) ** 2
    return SpectralDensity(grid, values)


def _shell_prediction(
    model: TorusModel, phi: Callable, t: float, edges: np.ndarray, part: str, grid: FrequencyGrid | None
) -> np.ndarray:
    """Shell average of the broadened operator over the lattice frequencies in each shell."""
    grid = FrequencyGrid.log_uniform(1e-3, 40.0, 256) if grid is None else grid
    rho = _continuum_density(phi, grid)
    w = model.omega()[model.dealiased()]
    w = w[(w >= edges[0]) & (w < edges[-1])]
    levels, mult = np.unique(np.round(w, 9), return_counts=True)
    values = np.array([mismatch_profile(model.d, rho, float(v), part=part).broadened(t) for v in levels])
    ids = np.searchsorted(edges, levels, side="right") - 1
    counts = np.bincount(ids, weights=mult, minlength=edges.size - 1)
    sums = np.bincount(ids, weights=mult * values, minlength=edges.size - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts


@dataclass(frozen=True)
class FirstIterateComparison:
    spectrum: EnsembleSpectrum
    prediction: np.ndarray
    t: float

    @property
    def ratio(self) -> np.ndarray:
        return self.spectrum.mean / self.prediction

    @property
    def ratio_stderr(self) -> np.ndarray:
        return self.spectrum.stderr / self.prediction


def first_iterate_variance(
    model: TorusModel,
    phi: Callable,
    t: float,
    edges: Sequence[float],
    n_realizations: int,
    seed: int,
    *,
    threads: int = 1,
    budget: float = 1e12,
    grid: FrequencyGrid | None = None,
) -> FirstIterateComparison:
    """Shell means of ``E|B1_k|^2`` against the broadened gain prediction.

    The continuum prediction is ``L^{2d} t G_t(w) / pi`` where ``G_t`` is the
    gain part of the sinc^2-broadened collision operator for ``rho = |phi|^2``,
    evaluated at the mean frequency of each shell.
    """
    edges = np.asarray(edges, dtype=float)
    _check_budget(model, n_realizations, model.cells * t * 1e4, budget)
    radius = _edge_radius(model, edges)

    def one(r: int) -> np.ndarray:
        b1 = first_iterate(prepared_data(model, phi, seed, r), t, radius=radius)
        return shell_means(model, np.abs(b1) ** 2, edges)[0]

    samples = _run(one, n_realizations, threads)
    _, centers, counts = shell_means(model, np.zeros(model.shape), edges)
    spec = EnsembleSpectrum.from_samples(samples, centers, counts, edges)
    scale = model.L ** (2 * model.d) * t / math.pi
    pred = scale * _shell_prediction(model, phi, t, edges, "gain", grid)
    return FirstIterateComparison(spec, pred, t)


@dataclass(frozen=True)
class DriftComparison:
    spectrum: EnsembleSpectrum
    prediction: np.ndarray
    t: float

    def resolved(self, nsigma: float = 3.0) -> np.ndarray:
        """Shells whose predicted drift exceeds ``nsigma`` measured standard errors."""
        ok = ~self.spectrum.empty & np.isfinite(self.prediction)
        return ok & (np.abs(self.prediction) > nsigma * self.spectrum.stderr)

    def sign_agreement(self, nsigma: float = 3.0) -> bool:
        sel = self.resolved(nsigma)
        return bool(np.all(np.sign(self.spectrum.mean[sel]) == np.sign(self.prediction[sel])))


def nonlinear_drift(
    model: TorusModel,
    phi: Callable,
    t: float,
    dt: float,
    edges: Sequence[float],
    n_realizations: int,
    seed: int,
    *,
    threads: int = 1,
    budget: float = 1e12,
    grid: FrequencyGrid | None = None,
) -> DriftComparison:
    """Early-time drift ``E|A_k(t)|^2 - |phi_k|^2`` of the full dynamics per shell.

    The zero-mean first-order fluctuation ``2 eps gamma Im(conj(c) B1)`` is
    subtracted from every realization as a control variate.  The prediction is
    ``eps^2 t C_t(w) / pi`` with ``C_t`` the sinc^2-broadened collision operator.
    """
    edges = np.asarray(edges, dtype=float)
    steps = t / dt
    _check_budget(model, n_realizations, model.cells * (steps + t * 1e4), budget)
    eg = model.epsilon * model.gamma
    radius = _edge_radius(model, edges)

    def one(r: int) -> np.ndarray:
        data = prepared_data(model, phi, seed, r)
        c = data.amplitudes
        b1 = first_iterate(data, t, radius=radius)
        a = evolve_nls(data, t, dt).amplitudes
        drift = np.abs(a) ** 2 - np.abs(c) ** 2 - 2 * eg * np.imag(np.conj(c) * b1)
        return shell_means(model, drift, edges)[0]

    samples = _run(one, n_realizations, threads)
    _, centers, counts = shell_means(model, np.zeros(model.shape), edges)
    spec = EnsembleSpectrum.from_samples(samples, centers, counts, edges)
    pred = model.epsilon**2 * t / math.pi * _shell_prediction(model, phi, t, edges, "full", grid)
    return DriftComparison(spec, pred, t)


def enumerate_quadruples(model: TorusModel, k: Sequence[int], budget: int = QUADRUPLE_BUDGET) -> np.ndarray:
    """All ``(m1, m2, m3)`` with ``m1 - m2 + m3 = m`` inside the retained band.

    Returns an array of shape ``(count, 3, d)``.

    Raises
    ------
    ResourceError
        If the enumeration would exceed ``budget`` candidate pairs.
    """
    band = model.dealiased()
    pts = np.stack([m[band] for m in model.indices()], axis=-1).astype(int)
    if pts.shape[0] ** 2 > budget:
        raise ResourceError("quadruple enumeration exceeds the budget", pairs=pts.shape[0] ** 2, budget=budget)
    m = np.asarray(k, dtype=int)
    m1 = np.repeat(pts, pts.shape[0], axis=0)
    m2 = np.tile(pts, (pts.shape[0], 1))
    m3 = m - m1 + m2
    lim = model.n_modes // 3
    ok = np.all(np.abs(m3) <= lim, axis=1)
    return np.stack([m1[ok], m2[ok], m3[ok]], axis=1)
