"""Synthetic Weyl-law spectra and the constants linking discrete sums to the kinetic scale.

For a manifold of volume ``vol`` the Weyl law gives ``lambda_n ~ 4 pi (C_M n)^{2/d}``
with ``C_M = Gamma(d/2 + 1) / vol``.  On the dilated manifold the eigenvalues are
``lambda_n / L^2`` and sums over the spectrum approach
``zeta int w^{d/2-1} chi(w) dw`` with ``zeta = d L^d / (2 C_M (4 pi)^{d/2})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad as scalar_quad

from .collision import kstar_prefactor
from .errors import DomainError
from .rng import stream
from .specfun import ball_volume, check_dimension, sphere_area

JITTER = 0.1
GENERATIONS = ("weyl-deterministic", "weyl-jittered")


@dataclass(frozen=True)
class ManifoldModel:
    d: int
    volume: float
    L: float = 1.0

    def __post_init__(self) -> None:
        check_dimension(self.d)
        if not (math.isfinite(self.volume) and self.volume > 0):
            raise DomainError("volume must be positive")
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError("dilation L must be positive")

    @property
    def c_m(self) -> float:
        return math.gamma(self.d / 2 + 1) / self.volume

    @property
    def gamma(self) -> float:
        """Interaction coupling ``L^{-d} / vol``."""
        return self.L ** (-self.d) / self.volume

    @property
    def zeta(self) -> float:
        """Density factor of the sum-to-integral limit."""
        return self.d * self.L**self.d / (2 * self.c_m * (4 * math.pi) ** (self.d / 2))

    def dilated(self, L: float) -> "ManifoldModel":
        return ManifoldModel(self.d, self.volume, L)


@dataclass(frozen=True)
class SyntheticSpectrum:
    model: ManifoldModel
    eigenvalues: np.ndarray
    generation: str
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.generation not in GENERATIONS:
            raise DomainError(f"unknown generation {self.generation!r}")
        ev = np.asarray(self.eigenvalues)
        if ev.ndim != 1 or np.any(np.diff(ev) < 0) or np.any(ev < 0):
            raise DomainError("eigenvalues must be nonnegative and nondecreasing")

    @property
    def top(self) -> float:
        return float(self.eigenvalues[-1])


def weyl_eigenvalues(
    model: ManifoldModel, N: int, generation: str = "weyl-deterministic", seed: int | None = None
) -> SyntheticSpectrum:
    """Eigenvalues ``4 pi (C_M n)^{2/d} / L^2`` for ``n = 1..N``, optionally jittered.

    The jittered mode multiplies each value by ``1 + u_n`` with ``u_n`` uniform
    on ``[-0.1, 0.1]`` and sorts the result.
    """
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    n = np.arange(1, int(N) + 1, dtype=float)
    lam = 4 * math.pi * (model.c_m * n) ** (2 / model.d)
    if generation == "weyl-jittered":
        if seed is None:
            raise DomainError("the jittered mode needs a seed")
        rng = stream(seed, 0x5EC7)
        lam = np.sort(lam * (1 + rng.uniform(-JITTER, JITTER, lam.size)))
    elif generation != "weyl-deterministic":
        raise DomainError(f"unknown generation {generation!r}")
    return SyntheticSpectrum(model, lam / model.L**2, generation, seed)


def weyl_count(model: ManifoldModel, lam) -> np.ndarray:
    """Weyl counting function ``(2 pi)^{-d} v(d) vol (L^2 lam)^{d/2}`` on the dilated manifold."""
    d = model.d
    lam = np.asarray(lam, dtype=float) * model.L**2
    return (2 * math.pi) ** (-d) * ball_volume(d) * model.volume * lam ** (d / 2)


def counting_consistency(spectrum: SyntheticSpectrum, quantiles=(0.1, 0.25, 0.5, 0.75, 0.8)) -> float:
    """Largest relative deviation of the empirical count from the Weyl law.

    Thresholds are taken at quantiles of the generated range so that the
    truncation at ``N`` (which the jittered mode blurs) is not probed.
    """
    ev = spectrum.eigenvalues
    levels = np.quantile(ev, quantiles)
    counts = np.searchsorted(ev, levels, side="right")
    return float(np.max(np.abs(counts / weyl_count(spectrum.model, levels) - 1)))


def sum_to_integral_check(
    spectrum: SyntheticSpectrum, chi: Callable, support: tuple[float, float]
) -> float:
    """Relative gap between ``sum_n chi(lambda_n)`` and ``zeta int w^{d/2-1} chi(w) dw``.

    Returns 0 when both sides vanish.

    Raises
    ------
    DomainError
        If ``support`` reaches beyond the generated spectrum.
    """
    a, b = map(float, support)
    if not 0 <= a < b:
        raise DomainError("support must be an interval [a, b] with 0 <= a < b")
    if b > spectrum.top:
        raise DomainError("test function support exceeds the spectral range", top=spectrum.top, support=b)
    model = spectrum.model
    ev = spectrum.eigenvalues
    total = float(np.sum(chi(ev[(ev >= a) & (ev <= b)])))
    integral, _ = scalar_quad(lambda w: w ** (model.d / 2 - 1) * chi(np.asarray(w)), a, b, epsabs=0, epsrel=1e-13, limit=200)
    target = model.zeta * integral
    if target == 0.0:
        return 0.0 if total == 0.0 else math.inf
    return abs(total - target) / abs(target)


def spectrum_covering(model: ManifoldModel, top: float, margin: float = 1.05) -> int:
    """Smallest ``N`` whose deterministic spectrum reaches ``margin * top`` (with jitter room)."""
    lam = margin * top * model.L**2 / (1 - JITTER)
    return int(math.ceil((lam / (4 * math.pi)) ** (model.d / 2) / model.c_m)) + 1


# ---------------------------------------------------------------------------
# validity regime and kinetic time


@dataclass(frozen=True)
class RegimeVerdict:
    d: int
    L: float
    epsilon: float
    margin_box: float
    margin_weak: float
    factor: float
    kinetic: bool

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "L": self.L,
            "epsilon": self.epsilon,
            "margin_box": self.margin_box,
            "margin_weak": self.margin_weak,
            "factor": self.factor,
            "verdict": "kinetic" if self.kinetic else "not kinetic",
        }


def regime_validator(L: float, epsilon: float, d: int, factor: float = 10.0) -> RegimeVerdict:
    """Margins ``eps L^{3d/2}`` and ``1/eps`` of ``L^{-3d/2} << eps << 1``; kinetic iff both reach ``factor``."""
    d = check_dimension(d)
    if not L > 1:
        raise DomainError("L must exceed 1")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    m1 = epsilon * L ** (1.5 * d)
    m2 = 1.0 / epsilon
    return RegimeVerdict(d, float(L), float(epsilon), m1, m2, factor, bool(m1 >= factor and m2 >= factor))


@dataclass(frozen=True)
class KineticConstant:
    lhs: float
    rhs: float

    @property
    def relative_difference(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def kinetic_constant(model: ManifoldModel, epsilon: float, t: float) -> KineticConstant:
    """Both sides of ``4 pi t eps^2 gamma^3 zeta^3 = (pi^2/2) (s(d)/(2pi)^d)^3 eps^2 t / pi``."""
    if not (epsilon > 0 and t > 0):
        raise DomainError("epsilon and t must be positive")
    lhs = 4 * math.pi * t * epsilon**2 * (model.gamma * model.zeta) ** 3
    rhs = 0.5 * math.pi**2 * (sphere_area(model.d) / (2 * math.pi) ** model.d) ** 3 * epsilon**2 * t / math.pi
    return KineticConstant(lhs, rhs)


def kinetic_time(epsilon: float) -> float:
    """``T_kin = pi / eps^2``."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return math.pi / epsilon**2


def kstar_prefactor_check(d: int) -> float:
    """Relative gap between the kinetic constant at ``t = T_kin`` and the collision prefactor."""
    model = ManifoldModel(d, 1.0)
    eps = 0.1
    value = kinetic_constant(model, eps, kinetic_time(eps)).rhs
    return abs(value - kstar_prefactor(d)) / kstar_prefactor(d)
