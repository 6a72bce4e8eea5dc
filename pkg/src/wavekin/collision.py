"""Collision operator of the radial kinetic equation.

For a density ``rho(w)`` the operator is

    C[rho](w) = iint K(w, w1, w2, w3) F(rho(w), rho(w1), rho(w2), rho(w3)) dw1 dw2,
    w3 = w - w1 + w2,

with the smooth kernel density

    K(w, w1, w2, w3) = (pi^2/2) (s(d)/(2 pi)^d)^3 (w1 w2 w3)^{d/2-1} I(w, w1, w2, w3)

and the cubic ``F = sum_j (-1)^j prod_{l != j} rho_l``.  The frequency delta is
resolved in ``w3`` so the Jacobian is one.  Integration runs over
``w1, w2, w3`` in ``[lo, cut]`` where ``lo`` is the first grid node.

On the resonant set the interaction integral has kinks (and, in d = 2,
integrable logarithmic singularities) only along ``w1 = w`` and ``w1 = w2``;
the tensor Gauss-Legendre panels are split along those lines and along the
domain edges so every panel sees a smooth integrand.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator, PchipInterpolator

from .errors import CacheMismatchError, ConvergenceError, DomainError
from .interaction import OMEGA_MIN, FrequencyQuad, interaction_integral, kernel_interaction
from .specfun import check_dimension, sphere_area

CACHE_ENV = "WAVEKIN_CACHE_DIR"
TABLE_FORMAT_VERSION = 1
_MAGIC = b"WKTABLE1"

#: growth factor of the panel edges above frequency one
PANEL_RATIO = 2.5

_GL16 = np.polynomial.legendre.leggauss(16)
SCHEMES = ("monotone-cubic", "reciprocal-monotone-cubic")


# ---------------------------------------------------------------------------
# grid and density


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing frequency nodes."""

    nodes: np.ndarray
    spacing: str = "log-uniform"

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("a frequency grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be finite and strictly increasing")
        if nodes[0] < OMEGA_MIN:
            raise DomainError(f"first grid node must be >= {OMEGA_MIN:g}")
        if self.spacing not in ("uniform", "log-uniform"):
            raise DomainError(f"unknown grid spacing {self.spacing!r}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def log_uniform(cls, lo: float = 1e-3, hi: float = 40.0, n: int = 256) -> "FrequencyGrid":
        return cls(np.geomspace(lo, hi, n), "log-uniform")

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        return cls(np.linspace(lo, hi, n), "uniform")

    @property
    def omega_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def omega_lo(self) -> float:
        return float(self.nodes[0])

    def __len__(self) -> int:
        return self.nodes.size

    def digest(self) -> str:
        return hashlib.sha256(self.nodes.tobytes() + self.spacing.encode()).hexdigest()

    def trapezoid_weights(self) -> np.ndarray:
        """Weights of the composite trapezoid rule on the nodes."""
        h = np.diff(self.nodes)
        w = np.zeros_like(self.nodes)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w


class _CubicSampler:
    """Evaluates piecewise cubics with fixed breakpoints at a fixed point set."""

    def __init__(self, nodes: np.ndarray, points: np.ndarray) -> None:
        pts = np.asarray(points, dtype=float)
        idx = np.searchsorted(nodes, pts, side="right") - 1
        self.below = pts < nodes[0]
        self.above = pts > nodes[-1]
        idx = np.clip(idx, 0, nodes.size - 2)
        self.idx = idx
        self.dx = np.where(self.below, 0.0, pts - nodes[idx])
        self.clamped = bool(self.below.any() or self.above.any())

    def __call__(self, coefficients: np.ndarray) -> np.ndarray:
        dx = self.dx
        out = coefficients[0][self.idx] * dx
        out += coefficients[1][self.idx]
        out *= dx
        out += coefficients[2][self.idx]
        out *= dx
        out += coefficients[3][self.idx]
        return out


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Density ``rho`` sampled on a grid with a shape-preserving cubic interpolant.

    ``scheme="monotone-cubic"`` interpolates ``rho`` itself.
    ``scheme="reciprocal-monotone-cubic"`` interpolates ``1/rho`` and inverts;
    it reproduces every ``c / (w + mu)`` exactly and is only available for
    strictly positive data.  ``"auto"`` picks the reciprocal form when the data
    are strictly positive.  Beyond the last node the density is zero; below the
    first node it is held at the first value.
    """

    grid: FrequencyGrid
    values: np.ndarray
    scheme: str = "auto"
    _pp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise DomainError("density values must match the grid")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError("density values must be finite and nonnegative")
        scheme = self.scheme
        if scheme == "auto":
            positive = np.all(values > 0) and np.all(np.isfinite(1.0 / values))
            scheme = SCHEMES[1] if positive else SCHEMES[0]
        if scheme not in SCHEMES:
            raise DomainError(f"unknown interpolation scheme {scheme!r}")
        if scheme == SCHEMES[1] and not np.all(values > 0):
            raise DomainError("reciprocal interpolation needs strictly positive values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scheme", scheme)
        data = 1.0 / values if scheme == SCHEMES[1] else values
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            pp = PchipInterpolator(self.grid.nodes, data)
        object.__setattr__(self, "_pp", pp)

    @classmethod
    def from_function(cls, grid: FrequencyGrid, fn: Callable, scheme: str = "auto") -> "SpectralDensity":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float), scheme)

    def with_values(self, values) -> "SpectralDensity":
        """Same grid and scheme; the reciprocal scheme falls back to the direct one once a value is zero."""
        values = np.asarray(values, dtype=float)
        scheme = self.scheme
        if scheme == SCHEMES[1] and not np.all(values > 0):
            scheme = SCHEMES[0]
        return SpectralDensity(self.grid, values, scheme)

    def coefficients(self) -> np.ndarray:
        return self._pp.c

    def finish(self, raw: np.ndarray, sampler: _CubicSampler) -> np.ndarray:
        out = np.reciprocal(raw, out=raw) if self.scheme == SCHEMES[1] else np.maximum(raw, 0.0, out=raw)
        if sampler.clamped:
            out = np.where(sampler.below, self.values[0], out)
            out = np.where(sampler.above, 0.0, out)
        return out

    def sample(self, sampler: _CubicSampler) -> np.ndarray:
        return self.finish(sampler(self._pp.c), sampler)

    def __call__(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=float)
        sampler = _CubicSampler(self.grid.nodes, w.ravel())
        return self.sample(sampler).reshape(w.shape)

    def support_radius(self, rel: float = 1e-12) -> float:
        """Largest node where the density exceeds ``rel`` times its maximum."""
        peak = float(self.values.max())
        if peak == 0:
            return self.grid.omega_lo
        return float(self.grid.nodes[np.nonzero(self.values >= rel * peak)[0][-1]])

    def default_cutoff(self) -> float:
        """Four times the support radius, capped at the grid end."""
        return min(4.0 * self.support_radius(), self.grid.omega_max)


# ---------------------------------------------------------------------------
# pointwise pieces


def resonance_modulus(quad) -> float:
    """``Omega = w0 - w1 + w2 - w3``."""
    w = quad.as_array() if isinstance(quad, FrequencyQuad) else np.asarray(quad, dtype=float)
    return float(w[0] - w[1] + w[2] - w[3])


def f_term(r0, r1, r2, r3):
    """Cubic ``sum_j (-1)^j prod_{l != j} rho_l`` (vectorised)."""
    return r1 * r2 * r3 - r0 * r2 * r3 + r0 * r1 * r3 - r0 * r1 * r2


def kstar_prefactor(d: int) -> float:
    """``(pi^2 / 2) (s(d) / (2 pi)^d)^3``."""
    d = check_dimension(d)
    return 0.5 * math.pi**2 * (sphere_area(d) / (2 * math.pi) ** d) ** 3


def kernel_kstar(d: int, quad, tol: float = 1e-8) -> float:
    """Smooth kernel density multiplying the frequency delta.

    Returns ``(pi^2/2)(s(d)/(2pi)^d)^3 (w1 w2 w3)^{d/2-1} I(w0, w1, w2, w3)`` with the
    interaction integral taken from the certified quadrature.
    """
    quad = quad if isinstance(quad, FrequencyQuad) else FrequencyQuad.of(quad)
    w = quad.as_array()
    value = interaction_integral(d, quad, tol).value
    return kstar_prefactor(d) * float(np.prod(w[1:])) ** (d / 2 - 1) * value


def kernel_density(d: int, w0, w1, w2, w3) -> np.ndarray:
    """Vectorised kernel density from the closed-form interaction integrals."""
    w = np.stack(np.broadcast_arrays(w0, w1, w2, w3), axis=-1)
    weight = np.prod(w[..., 1:], axis=-1) ** (d / 2 - 1)
    return kstar_prefactor(d) * weight * kernel_interaction(d, w)


# ---------------------------------------------------------------------------
# integration layout


def base_edges(lo: float, cut: float, ratio: float = PANEL_RATIO) -> np.ndarray:
    """Panel edges on ``[lo, cut]``: decades up to 1, then geometric with ``ratio``."""
    if not cut > lo:
        raise DomainError("integration cutoff must exceed the lower frequency bound")
    edges = [lo]
    x = lo
    while x * 10 < min(1.0, cut):
        x *= 10
        edges.append(x)
    x = max(x, 1.0) if cut > 1.0 else x
    if x > edges[-1] * 1.05 and x < cut:
        edges.append(x)
    while x * ratio < cut:
        x *= ratio
        edges.append(x)
    edges.append(cut)
    return np.unique(np.array(edges))


def _gl_panels(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on consecutive panels of each row of ``edges``."""
    x, w = _GL16
    lo, hi = edges[..., :-1], edges[..., 1:]
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    nodes = mid[..., None] + half[..., None] * x
    weights = half[..., None] * w
    shape = edges.shape[:-1] + ((edges.shape[-1] - 1) * x.size,)
    return nodes.reshape(shape), weights.reshape(shape)


def node_points(omega: float, lo: float, cut: float, edges: np.ndarray, shift: float = 0.0):
    """Quadrature points ``(w1, w2, w3, weight)`` for the operator at ``omega``.

    ``shift`` displaces the resonance: ``w3 = omega - shift - w1 + w2``.  It is
    zero for the sharp operator and equals ``Omega`` for the broadened one.
    """
    wr = omega - shift
    outer = np.unique(np.concatenate([edges, [wr] if lo < wr < cut else []]))
    xs, wx = _gl_panels(outer)
    low = np.maximum(lo, xs - wr + lo)
    high = np.minimum(cut, xs - wr + cut)
    ok = high > low
    xs, wx, low, high = xs[ok], wx[ok], low[ok], high[ok]
    inner = low[:, None] + (edges[None, :] - lo)
    inner = np.concatenate([inner, xs[:, None], high[:, None]], axis=1)
    inner = np.clip(inner, low[:, None], high[:, None])
    inner.sort(axis=1)
    ys, wy = _gl_panels(inner)
    keep = wy > 0
    rows = np.broadcast_to(np.arange(xs.size)[:, None], ys.shape)[keep]
    y = ys[keep]
    x = xs[rows]
    weight = wx[rows] * wy[keep]
    z = wr - x + y
    z = np.clip(z, lo, cut)
    return x, y, z, weight


# ---------------------------------------------------------------------------
# kernel table


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel density times quadrature weight at every integration point of every node.

    Entries for node ``i`` occupy ``offsets[i]:offsets[i+1]`` of the point
    arrays.  Tables are immutable after construction.
    """

    d: int
    prefactor: float
    grid_digest: str
    lo: float
    cut: float
    tol: float
    ratio: float
    nodes: np.ndarray
    offsets: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    kw: np.ndarray
    _samplers: dict = field(default_factory=dict, init=False, repr=False)

    def header(self) -> dict:
        return {
            "version": TABLE_FORMAT_VERSION,
            "d": self.d,
            "grid": self.grid_digest,
            "lo": self.lo,
            "cut": self.cut,
            "tol": self.tol,
            "ratio": self.ratio,
        }

    @property
    def size(self) -> int:
        return int(self.kw.size)

    def matches(self, grid: FrequencyGrid, d: int) -> bool:
        return self.grid_digest == grid.digest() and self.d == d

    def segment_ids(self) -> np.ndarray:
        if "segments" not in self._samplers:
            self._samplers["segments"] = np.repeat(np.arange(self.nodes.size), np.diff(self.offsets))
        return self._samplers["segments"]

    def samplers(self) -> tuple[_CubicSampler, _CubicSampler, _CubicSampler]:
        if "w1" not in self._samplers:
            for name in ("w1", "w2", "w3"):
                self._samplers[name] = _CubicSampler(self.nodes, getattr(self, name))
        return self._samplers["w1"], self._samplers["w2"], self._samplers["w3"]

    def save(self, path) -> None:
        buf = io.BytesIO()
        np.savez(buf, nodes=self.nodes, offsets=self.offsets, w1=self.w1, w2=self.w2, w3=self.w3, kw=self.kw)
        payload = buf.getvalue()
        head = dict(self.header(), prefactor=self.prefactor, sha256=hashlib.sha256(payload).hexdigest())
        blob = json.dumps(head, sort_keys=True).encode()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(blob).to_bytes(4, "little"))
            fh.write(blob)
            fh.write(payload)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, expected: dict | None = None) -> "KernelTable":
        """Read a cached table; raise :class:`CacheMismatchError` unless it is intact and matches."""
        try:
            raw = Path(path).read_bytes()
            if raw[:8] != _MAGIC:
                raise CacheMismatchError("not a kernel table file", path=str(path))
            n = int.from_bytes(raw[8:12], "little")
            head = json.loads(raw[12 : 12 + n].decode())
            payload = raw[12 + n :]
        except (OSError, ValueError, UnicodeDecodeError) as exc:
            raise CacheMismatchError(f"unreadable kernel table: {exc}", path=str(path)) from exc
        if hashlib.sha256(payload).hexdigest() != head.get("sha256"):
            raise CacheMismatchError("kernel table payload is corrupted", path=str(path))
        if expected is not None:
            for key, value in expected.items():
                if head.get(key) != value:
                    raise CacheMismatchError(
                        f"kernel table header mismatch on {key!r}", found=head.get(key), expected=value
                    )
        data = np.load(io.BytesIO(payload))
        return cls(
            d=head["d"],
            prefactor=head["prefactor"],
            grid_digest=head["grid"],
            lo=head["lo"],
            cut=head["cut"],
            tol=head["tol"],
            ratio=head["ratio"],
            nodes=data["nodes"],
            offsets=data["offsets"],
            w1=data["w1"],
            w2=data["w2"],
            w3=data["w3"],
            kw=data["kw"],
        )


def build_kernel_table(
    d: int,
    grid: FrequencyGrid,
    cut: float | None = None,
    tol: float = 1e-8,
    ratio: float = PANEL_RATIO,
    threads: int = 1,
) -> KernelTable:
    """Precompute the kernel table on ``grid`` (closed-form interaction integrals).

    ``tol`` is recorded in the header; the closed forms are exact to rounding.
    """
    d = check_dimension(d)
    if d == 1:
        raise DomainError("the collision operator requires d in {2, 3}")
    lo = grid.omega_lo
    cut = grid.omega_max if cut is None else float(cut)
    if not lo < cut <= grid.omega_max:
        raise DomainError("cutoff must lie inside the grid", cut=cut)
    edges = base_edges(lo, cut, ratio)

    def one(omega: float):
        x, y, z, weight = node_points(omega, lo, cut, edges)
        return x, y, z, weight * kernel_density(d, omega, x, y, z)

    nodes = grid.nodes
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, nodes))
    else:
        parts = [one(w) for w in nodes]
    counts = np.array([p[0].size for p in parts])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return KernelTable(
        d=d,
        prefactor=kstar_prefactor(d),
        grid_digest=grid.digest(),
        lo=lo,
        cut=cut,
        tol=float(tol),
        ratio=float(ratio),
        nodes=np.array(nodes),
        offsets=offsets,
        w1=np.concatenate([p[0] for p in parts]),
        w2=np.concatenate([p[1] for p in parts]),
        w3=np.concatenate([p[2] for p in parts]),
        kw=np.concatenate([p[3] for p in parts]),
    )


def cached_kernel_table(
    d: int,
    grid: FrequencyGrid,
    cut: float | None = None,
    tol: float = 1e-8,
    ratio: float = PANEL_RATIO,
    cache_dir=None,
    threads: int = 1,
) -> KernelTable:
    """Load a matching table from the cache directory or build and store one.

    The directory defaults to ``$WAVEKIN_CACHE_DIR``; with neither set no cache
    is used.  Corrupted or mismatched files are rebuilt.
    """
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    cut = grid.omega_max if cut is None else float(cut)
    if not cache_dir:
        return build_kernel_table(d, grid, cut, tol, ratio, threads)
    expected = {
        "version": TABLE_FORMAT_VERSION,
        "d": d,
        "grid": grid.digest(),
        "lo": grid.omega_lo,
        "cut": cut,
        "tol": float(tol),
        "ratio": float(ratio),
    }
    key = hashlib.sha256(json.dumps(expected, sort_keys=True).encode()).hexdigest()[:24]
    path = Path(cache_dir) / f"kernel-d{d}-{key}.wkt"
    if path.exists():
        try:
            return KernelTable.load(path, expected)
        except CacheMismatchError:
            pass
    table = build_kernel_table(d, grid, cut, tol, ratio, threads)
    table.save(path)
    return table


# ---------------------------------------------------------------------------
# operator


def collision_rhs(table: KernelTable, rho: SpectralDensity, with_scale: bool = False):
    """Collision operator at every grid node using a kernel table.

    With ``with_scale`` also return the node-wise magnitude
    ``sum |K| (r1 r2 r3 + r0 r2 r3 + r0 r1 r3 + r0 r1 r2)``, the size of the
    individual terms that cancel in the operator.
    """
    if not table.matches(rho.grid, table.d):
        raise DomainError("kernel table was built for a different grid")
    s1, s2, s3 = table.samplers()
    r1, r2, r3 = rho.sample(s1), rho.sample(s2), rho.sample(s3)
    r13 = r1 * r3
    gain = r13 * r2
    mixed = r2 * r3
    mixed -= r13
    mixed += r1 * r2
    gain *= table.kw
    mixed *= table.kw
    seg, n = table.segment_ids(), table.nodes.size
    value = np.bincount(seg, gain, n) - rho.values * np.bincount(seg, mixed, n)
    if not with_scale:
        return value
    kabs = np.abs(table.kw)
    plus = kabs * (r2 * r3 + r13 + r1 * r2)
    scale = np.bincount(seg, np.abs(gain), n) + rho.values * np.bincount(seg, plus, n)
    return value, scale


def _direct(d: int, rho: SpectralDensity, omega: float, lo: float, cut: float, edges, shift=0.0):
    x, y, z, weight = node_points(omega, lo, cut, edges, shift)
    k = weight * kernel_density(d, omega, x, y, z)
    r0 = float(rho(omega))
    return float(np.sum(k * f_term(r0, rho(x), rho(y), rho(z)))), float(np.sum(np.abs(k)))


def collision_operator(
    d: int,
    rho: SpectralDensity,
    omega: float,
    table: KernelTable | None = None,
    *,
    cut: float | None = None,
    tol: float = 1e-8,
    max_refinements: int = 5,
) -> float:
    """Delta-resolved collision operator at one frequency.

    With a table the node's precomputed entries are used (``omega`` must be a
    grid node).  Without one the panels are refined until two successive
    estimates agree to ``tol`` relative to the scale ``sum |K| rho_max^3``.
    """
    d = check_dimension(d)
    grid = rho.grid
    if not grid.omega_lo <= omega <= grid.omega_max:
        raise DomainError("frequency outside the grid range", omega=omega)
    if table is not None:
        if not table.matches(grid, d):
            raise DomainError("kernel table does not match the grid or dimension")
        hit = np.nonzero(table.nodes == omega)[0]
        if hit.size:
            i = int(hit[0])
            sl = slice(int(table.offsets[i]), int(table.offsets[i + 1]))
            r = (rho(table.w1[sl]), rho(table.w2[sl]), rho(table.w3[sl]))
            return float(np.sum(table.kw[sl] * f_term(float(rho.values[i]), *r)))
        cut, ratio = table.cut, table.ratio
    else:
        ratio = PANEL_RATIO
    lo = grid.omega_lo
    cut = rho.default_cutoff() if cut is None else float(cut)
    rmax = float(rho.values.max())
    previous = None
    for _ in range(max_refinements):
        edges = base_edges(lo, cut, ratio)
        value, mass = _direct(d, rho, omega, lo, cut, edges)
        if previous is not None and abs(value - previous) <= tol * max(mass * rmax**3, 1e-300):
            return value
        if mass == 0.0 or rmax == 0.0:
            return value
        previous = value
        ratio = 1.0 + (ratio - 1.0) / 2
    raise ConvergenceError("collision quadrature did not converge", omega=omega, value=value, previous=previous)


# ---------------------------------------------------------------------------
# time-broadened operator


def sinc2_kernel(omega_mismatch, t: float):
    """``(1 / 2 pi t) sin^2(t W / 2) / (W / 2)^2``; integrates to one over ``W``."""
    x = np.asarray(omega_mismatch, dtype=float)
    return t / (2 * math.pi) * np.sinc(t * x / (2 * math.pi)) ** 2


def _mismatch_edges(lo_b: float, hi_b: float, first: float = 0.125) -> np.ndarray:
    steps = [0.0]
    x = first
    while x < max(-lo_b, hi_b):
        steps.append(x)
        x *= 2
    steps = np.array(steps)
    edges = np.concatenate([-steps[::-1], steps[1:]])
    edges = edges[(edges > lo_b) & (edges < hi_b)]
    return np.unique(np.concatenate([[lo_b], edges, [hi_b]]))


@dataclass(frozen=True)
class MismatchProfile:
    """Off-resonant integrand ``G(W)`` on Gauss-Legendre panels in the mismatch ``W``.

    ``G(0)`` is the sharp collision operator; the broadened operator is
    ``int sinc2_kernel(W, t) G(W) dW``.
    """

    edges: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    abs_values: np.ndarray

    def broadened(self, t: float) -> float:
        x, w = _GL16
        total = 0.0
        for p in range(self.edges.size - 1):
            a, b = self.edges[p], self.edges[p + 1]
            interp = BarycentricInterpolator(self.nodes[p], self.values[p])
            # resolve every oscillation of sin^2(t W / 2) with a full panel
            n = max(1, int(math.ceil((b - a) * t / (2 * math.pi))) * 2)
            sub = np.linspace(a, b, n + 1)
            lo, hi = sub[:-1, None], sub[1:, None]
            q = (hi + lo) / 2 + (hi - lo) / 2 * x
            total += float(np.sum((hi - lo) / 2 * w * sinc2_kernel(q, t) * interp(q)))
        return total

    def l1_bound(self, t: float) -> float:
        """``(t / 2 pi) int |G(W)| dW``: the supremum of the sinc kernel times the L1 norm."""
        x, w = _GL16
        half = (self.edges[1:] - self.edges[:-1]) / 2
        return t / (2 * math.pi) * float(np.sum(half[:, None] * w * self.abs_values))


def mismatch_profile(
    d: int,
    rho: SpectralDensity,
    omega: float,
    *,
    cut: float | None = None,
    ratio: float = PANEL_RATIO,
    first_panel: float = 0.125,
    part: str = "full",
) -> MismatchProfile:
    """Tabulate ``G(W)`` for the broadened operator at ``omega``.

    ``part="gain"`` keeps only the ``rho1 rho2 rho3`` term of ``F``.
    """
    d = check_dimension(d)
    if part not in ("full", "gain"):
        raise DomainError(f"unknown part {part!r}")
    grid = rho.grid
    if not grid.omega_lo <= omega <= grid.omega_max:
        raise DomainError("frequency outside the grid range", omega=omega)
    lo = grid.omega_lo
    cut = rho.default_cutoff() if cut is None else float(cut)
    edges = base_edges(lo, cut, ratio)
    # w3 = omega - W - w1 + w2 must stay in [lo, cut]
    lo_b, hi_b = omega + lo - 2 * cut, omega - 2 * lo + cut
    wedges = _mismatch_edges(lo_b, hi_b, first_panel)
    wnodes, _ = _gl_panels(wedges)
    wnodes = wnodes.reshape(wedges.size - 1, -1)
    values = np.zeros_like(wnodes)
    abs_values = np.zeros_like(wnodes)
    r0 = float(rho(omega))
    for idx in np.ndindex(wnodes.shape):
        shift = float(wnodes[idx])
        x, y, z, weight = node_points(omega, lo, cut, edges, shift)
        if x.size == 0:
            continue
        k = weight * kernel_density(d, omega, x, y, z)
        if part == "gain":
            f = rho(x) * rho(y) * rho(z)
        else:
            f = f_term(r0, rho(x), rho(y), rho(z))
        values[idx] = np.sum(k * f)
        abs_values[idx] = np.sum(np.abs(k * f))
    return MismatchProfile(wedges, wnodes, values, abs_values)


def broadened_collision_operator(
    d: int,
    rho: SpectralDensity,
    omega: float,
    t: float | Sequence[float],
    *,
    cut: float | None = None,
    profile: MismatchProfile | None = None,
):
    """Collision operator with the frequency delta replaced by the finite-time sinc^2 kernel.

    Parameters
    ----------
    t : float or sequence of float
        Positive times; a sequence reuses one mismatch profile.

    Returns
    -------
    float or ndarray
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times <= 0):
        raise DomainError("broadening time must be positive")
    if profile is None:
        profile = mismatch_profile(d, rho, omega, cut=cut)
    out = np.array([profile.broadened(float(s)) for s in times])
    return float(out[0]) if np.ndim(t) == 0 else out
