"""Time integration of the radial kinetic equation ``d rho / d tau = C[rho]``.

The integrator is the Dormand-Prince 5(4) embedded pair with first-same-as-last
reuse.  Steps whose local error exceeds the tolerance, or that would make any
node negative, are rejected and retried with a smaller step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .collision import FrequencyGrid, KernelTable, SpectralDensity, collision_rhs
from .errors import DomainError, StepSizeError
from .specfun import check_dimension

DT_MIN = 1e-10

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class EvolutionState:
    """Density at slow time ``tau`` plus bookkeeping of the stepper."""

    tau: float
    rho: SpectralDensity
    step_count: int = 0
    last_step: float = 1e-3
    rhs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise DomainError("tau must be finite and nonnegative")
        if not self.last_step > 0:
            raise DomainError("step size must be positive")


@dataclass(frozen=True)
class ConservationLedger:
    tau: float
    mass: float
    energy: float


def initial_density(phi: Callable, grid: FrequencyGrid, scheme: str = "auto") -> SpectralDensity:
    """``rho(w_i) = |phi(w_i)|^2``; ``phi`` may be complex."""
    values = np.abs(np.asarray(phi(grid.nodes))) ** 2
    values = np.broadcast_to(values, grid.nodes.shape).astype(float)
    if not np.all(np.isfinite(values)):
        raise DomainError("|phi|^2 is not finite on the grid")
    return SpectralDensity(grid, values, scheme)


def moment_weights(grid: FrequencyGrid, power: float) -> np.ndarray:
    """Weights ``W`` with ``sum W rho = int_0^{w_max} w^power rho dw``.

    The integrand ``w^power rho`` is integrated by the trapezoid rule between
    nodes; below the first node ``rho`` is held constant (as the interpolant is)
    and ``w^power`` is integrated exactly.
    """
    w = grid.trapezoid_weights() * grid.nodes**power
    w[0] += grid.omega_lo ** (power + 1) / (power + 1)
    return w


def conservation_ledger(state: EvolutionState, d: int) -> ConservationLedger:
    """Mass ``int w^{d/2-1} rho`` and energy ``int w^{d/2} rho`` on the grid."""
    d = check_dimension(d)
    grid, values = state.rho.grid, state.rho.values
    mass = float(moment_weights(grid, d / 2 - 1) @ values)
    energy = float(moment_weights(grid, d / 2) @ values)
    return ConservationLedger(state.tau, mass, energy)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, tol: float) -> float:
    scale = tol * (1.0 + np.maximum(np.abs(y0), np.abs(y1)))
    return float(np.max(np.abs(err) / scale))


def step(
    state: EvolutionState,
    table: KernelTable,
    tol: float = 1e-8,
    *,
    dt_max: float = 0.1,
    dt_min: float = DT_MIN,
    t_end: float | None = None,
) -> EvolutionState:
    """Advance by one accepted Dormand-Prince step.

    Raises
    ------
    StepSizeError
        When the step would have to shrink below ``dt_min``; the diagnostics
        name the node that forced the last rejection.
    """
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    rho = state.rho
    y0 = rho.values
    k0 = state.rhs if state.rhs is not None else collision_rhs(table, rho)
    dt = min(state.last_step, dt_max)
    if t_end is not None:
        dt = min(dt, t_end - state.tau)
    offender = None
    while True:
        if dt < dt_min:
            raise StepSizeError(
                "step size underflow", tau=state.tau, dt=dt, node=offender,
                omega=None if offender is None else float(rho.grid.nodes[offender]),
            )
        ks = [k0]
        for i in range(1, 7):
            with np.errstate(over="ignore", invalid="ignore"):
                yi = y0 + dt * sum(a * k for a, k in zip(_A[i], ks))
            if not np.all(np.isfinite(yi)):
                break
            if i < 6:
                # inner stages may dip below zero where rho vanishes; they are
                # evaluated at the nonnegative part, accepted states never are
                yi = np.maximum(yi, 0.0)
            elif np.any(yi < 0):
                break
            with np.errstate(over="ignore", invalid="ignore"):
                ks.append(collision_rhs(table, rho.with_values(yi)))
        if len(ks) < 7:
            bad = ~np.isfinite(yi)
            offender = int(np.argmax(bad)) if bad.any() else int(np.argmin(yi))
            dt /= 2
            continue
        y1 = yi  # the last stage is the fifth-order solution (FSAL)
        err = dt * sum(e * k for e, k in zip(_E, ks))
        ratio = _error_norm(err, y0, y1, tol)
        if ratio <= 1.0:
            grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** (-1 / 5))
            return EvolutionState(
                tau=state.tau + dt,
                rho=rho.with_values(y1),
                step_count=state.step_count + 1,
                last_step=max(min(dt * grow, dt_max), dt_min),
                rhs=ks[6],
            )
        offender = int(np.argmax(np.abs(err)))
        dt *= max(0.2, 0.9 * ratio ** (-1 / 5))


def evolve(
    rho0: SpectralDensity,
    table: KernelTable,
    tau_end: float,
    tol: float = 1e-8,
    *,
    d: int | None = None,
    dt0: float = 1e-3,
    dt_max: float = 0.1,
    max_steps: int = 100_000,
    callback: Callable[[EvolutionState], None] | None = None,
) -> EvolutionState:
    """Integrate from ``tau = 0`` to ``tau_end``; ``callback`` sees every accepted state."""
    if not tau_end >= 0:
        raise DomainError("tau_end must be nonnegative")
    state = EvolutionState(0.0, rho0, 0, dt0)
    if callback is not None:
        callback(state)
    while state.tau < tau_end * (1 - 1e-14):
        if state.step_count >= max_steps:
            raise StepSizeError("maximum number of steps reached", tau=state.tau, steps=state.step_count)
        state = step(state, table, tol, dt_max=dt_max, t_end=tau_end)
        if callback is not None:
            callback(state)
    return state


class TimeSeriesWriter:
    """Writes ``tau, mass, energy, rho_0 .. rho_{n-1}`` rows for every ``stride``-th step."""

    def __init__(self, path, d: int, stride: int = 1) -> None:
        if stride < 1:
            raise DomainError("output stride must be positive")
        self.d = check_dimension(d)
        self.stride = stride
        self.rows: list[list[float]] = []
        self.path = Path(path)

    def __call__(self, state: EvolutionState) -> None:
        if state.step_count % self.stride == 0:
            led = conservation_ledger(state, self.d)
            self.rows.append([state.tau, led.mass, led.energy, *state.rho.values.tolist()])

    def flush(self, grid: FrequencyGrid) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["tau", "mass", "energy"] + [f"rho@{w:.6g}" for w in grid.nodes])
            out.writerows([[repr(float(v)) for v in row] for row in self.rows])


# ---------------------------------------------------------------------------
# stationary spectra


def power_law_density(grid: FrequencyGrid, x: float) -> SpectralDensity:
    """``rho = w^{-x}`` on the grid support, zero beyond the last node."""
    return SpectralDensity(grid, grid.nodes ** (-float(x)))


def interior_mask(grid: FrequencyGrid, margin: float = 0.2) -> np.ndarray:
    """Nodes away from both ends by ``margin`` of the grid (in node index)."""
    n = len(grid)
    k = int(math.ceil(margin * n))
    mask = np.zeros(n, dtype=bool)
    mask[k : n - k] = True
    return mask


def stationarity_residual(
    d: int, x: float, grid: FrequencyGrid, table: KernelTable, margin: float = 0.2
) -> float:
    """Relative weighted L2 residual of the collision operator for ``rho = w^{-x}``.

    The residual ``|| C ||`` over interior nodes (weights ``w^{d/2-1}`` times
    trapezoid weights) is divided by the same norm of the term magnitudes that
    cancel inside ``C``, making it invariant under rescaling of ``rho``.  It is
    zero up to rounding on the Rayleigh-Jeans members ``x = 0`` and ``x = 1``.
    """
    d = check_dimension(d)
    rho = power_law_density(grid, x)
    value, scale = collision_rhs(table, rho, with_scale=True)
    mask = interior_mask(grid, margin)
    w = (grid.trapezoid_weights() * grid.nodes ** (d / 2 - 1))[mask]
    num = math.sqrt(float(np.sum(w * value[mask] ** 2)))
    den = math.sqrt(float(np.sum(w * scale[mask] ** 2)))
    return num / den if den > 0 else 0.0


@dataclass(frozen=True)
class StationarityScan:
    exponents: np.ndarray
    residuals: np.ndarray
    minima: list[tuple[float, float]]


def scan_stationary_exponents(
    d: int,
    grid: FrequencyGrid,
    table: KernelTable,
    exponents: Iterable[float] | None = None,
    margin: float = 0.2,
) -> StationarityScan:
    """Residual on an exponent sweep and its interior local minima ``(x, residual)``."""
    xs = np.round(np.arange(0.0, 3.0 + 1e-9, 0.05), 10) if exponents is None else np.asarray(list(exponents), float)
    res = np.array([stationarity_residual(d, x, grid, table, margin) for x in xs])
    minima = []
    for i in range(xs.size):
        left = res[i - 1] if i > 0 else np.inf
        right = res[i + 1] if i + 1 < xs.size else np.inf
        if res[i] < left and res[i] < right:
            minima.append((float(xs[i]), float(res[i])))
    return StationarityScan(xs, res, minima)
