"""Batch experiment runner: ``wavekin <command> --config cfg.json --output dir``.

A config file is a JSON object with the keys ``command``, ``parameters`` and
optionally ``output_dir`` and ``seed``; unknown keys anywhere are rejected
before any computation starts.  Every run writes its tables as CSV, a
``result.json`` with verdicts, and a ``manifest.json`` recording the resolved
config, its hash, package versions and wall time.

Exit status is 0 on success, 1 for invalid input or a domain error and 2 when
a resource budget would be exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import DomainError, ResourceError, WavekinError

COMMANDS = (
    "lambda",
    "interaction",
    "collision",
    "evolve",
    "scan-kz",
    "verify-reduction",
    "spectrum",
    "microsim",
    "regime",
)


class ConfigError(DomainError):
    """Invalid experiment configuration; ``path`` names the offending field."""


# ---------------------------------------------------------------------------
# strict parameter schemas

REQUIRED = object()


def _int(path: str, v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer", path=path)
    return v


def _float(path: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}: expected a finite number", path=path)
    return float(v)


def _opt_float(path: str, v: Any) -> float | None:
    return None if v is None else _float(path, v)


def _str(path: str, v: Any) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{path}: expected a string", path=path)
    return v


def _floats(path: str, v: Any) -> list[float]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a nonempty list of numbers", path=path)
    return [_float(f"{path}[{i}]", x) for i, x in enumerate(v)]


def _quads(path: str, v: Any) -> list[list[float]]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a nonempty list of quadruples", path=path)
    out = []
    for i, q in enumerate(v):
        q = _floats(f"{path}[{i}]", q)
        if len(q) != 4:
            raise ConfigError(f"{path}[{i}]: a quadruple has four entries", path=f"{path}[{i}]")
        out.append(q)
    return out


def _strict(path: str, v: Any, schema: dict[str, tuple[Callable, Any]]) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"{path}: expected an object", path=path)
    unknown = sorted(set(v) - set(schema))
    if unknown:
        raise ConfigError(f"{path}: unknown field {unknown[0]!r}", path=f"{path}.{unknown[0]}")
    out = {}
    for key, (check, default) in schema.items():
        sub = f"{path}.{key}"
        if key in v:
            out[key] = check(sub, v[key])
        elif default is REQUIRED:
            raise ConfigError(f"{sub}: required field missing", path=sub)
        else:
            out[key] = default
    return out


_PHI_SCHEMAS = {
    "gaussian": {"center": (_float, 2.0), "width": (_float, 1.0), "amplitude": (_float, 1.0)},
    "rayleigh-jeans": {"c": (_float, 1.0), "mu": (_float, 0.0)},
    "power": {"exponent": (_float, REQUIRED)},
}


def _phi(path: str, v: Any) -> dict:
    if not isinstance(v, dict) or "kind" not in v:
        raise ConfigError(f"{path}: expected an object with a 'kind'", path=path)
    kind = _str(f"{path}.kind", v["kind"])
    if kind not in _PHI_SCHEMAS:
        raise ConfigError(f"{path}.kind: unknown kind {kind!r}", path=f"{path}.kind")
    rest = {k: x for k, x in v.items() if k != "kind"}
    return {"kind": kind, **_strict(path, rest, _PHI_SCHEMAS[kind])}


def phi_function(spec: dict) -> Callable:
    """Amplitude profile ``phi(w)`` from its config description."""
    kind = spec["kind"]
    if kind == "gaussian":
        c, s, a = spec["center"], spec["width"], spec["amplitude"]
        if s <= 0:
            raise DomainError("gaussian width must be positive")
        return lambda w: a * np.exp(-((np.asarray(w) - c) ** 2) / (2 * s * s))
    if kind == "rayleigh-jeans":
        c, mu = spec["c"], spec["mu"]
        if c < 0 or mu < 0:
            raise DomainError("rayleigh-jeans data need c >= 0 and mu >= 0")
        return lambda w: np.sqrt(c / (np.asarray(w) + mu))
    x = spec["exponent"]
    return lambda w: np.asarray(w, dtype=float) ** (-x / 2)


def _grid(path: str, v: Any) -> dict:
    return _strict(path, v, {"lo": (_float, 1e-3), "hi": (_float, 40.0), "n": (_int, 256)})


_DEFAULT_GRID = {"lo": 1e-3, "hi": 40.0, "n": 256}
_DEFAULT_PHI = {"kind": "gaussian", "center": 2.0, "width": 1.0, "amplitude": 1.0}

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "lambda": {"d": (_int, REQUIRED), "q_min": (_float, 0.0), "q_max": (_float, 20.0), "points": (_int, 201)},
    "interaction": {"d": (_int, REQUIRED), "quads": (_quads, REQUIRED), "tol": (_float, 1e-8)},
    "collision": {
        "d": (_int, REQUIRED),
        "phi": (_phi, _DEFAULT_PHI),
        "grid": (_grid, _DEFAULT_GRID),
        "cut": (_opt_float, None),
        "tol": (_float, 1e-8),
        "broadening_times": (_floats, None),
        "omegas": (_floats, None),
    },
    "evolve": {
        "d": (_int, REQUIRED),
        "phi": (_phi, _DEFAULT_PHI),
        "grid": (_grid, _DEFAULT_GRID),
        "cut": (_opt_float, None),
        "tau_end": (_float, 0.5),
        "tol": (_float, 1e-8),
        "quad_tol": (_float, 1e-8),
        "stride": (_int, 1),
        "max_steps": (_int, 100_000),
    },
    "scan-kz": {
        "d": (_int, REQUIRED),
        "grid": (_grid, _DEFAULT_GRID),
        "x_min": (_float, 0.0),
        "x_max": (_float, 3.0),
        "x_step": (_float, 0.05),
        "margin": (_float, 0.2),
        "tol": (_float, 1e-8),
    },
    "verify-reduction": {
        "d": (_int, REQUIRED),
        "quads": (_quads, None),
        "fixtures": (_quads, None),
        "sigma_sequence": (_floats, [0.08, 0.06, 0.04, 0.02]),
        "samples_per_sigma": (_int, 100_000),
        "nsigma": (_float, 3.0),
    },
    "spectrum": {
        "d": (_int, REQUIRED),
        "volume": (_float, 1.0),
        "L_values": (_floats, [4.0, 8.0, 16.0, 32.0]),
        "generation": (_str, "weyl-deterministic"),
        "test_function": (_str, "sin2"),
        "counting_N": (_int, 100_000),
    },
    "microsim": {
        "d": (_int, 2),
        "L": (_float, 16.0),
        "n_modes": (_int, 128),
        "epsilon": (_float, 0.05),
        "phi": (_phi, _DEFAULT_PHI),
        "mode": (_str, "first-iterate"),
        "t": (_float, 16.0),
        "dt": (_opt_float, None),
        "shell_edges": (_floats, [0.5, 1.5, 2.5, 3.5]),
        "realizations": (_int, 40),
        "budget": (_float, 1e12),
    },
    "regime": {"d": (_int, REQUIRED), "L": (_float, REQUIRED), "epsilon": (_float, REQUIRED), "factor": (_float, 10.0)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    parameters: dict
    output_dir: str | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"command": self.command, "parameters": self.parameters, "output_dir": self.output_dir, "seed": self.seed}

    def digest(self) -> str:
        body = {"command": self.command, "parameters": self.parameters, "seed": self.seed}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def parse_config(raw: Any, command: str | None = None) -> ExperimentConfig:
    """Validate a decoded JSON config; ``command`` may come from the command line."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object", path="config")
    unknown = sorted(set(raw) - {"command", "parameters", "output_dir", "seed"})
    if unknown:
        raise ConfigError(f"config: unknown field {unknown[0]!r}", path=unknown[0])
    cmd = raw.get("command", command)
    if cmd is None:
        raise ConfigError("command: required field missing", path="command")
    cmd = _str("command", cmd)
    if command is not None and cmd != command:
        raise ConfigError("command: config and command line disagree", path="command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command: unknown command {cmd!r}", path="command")
    params = _strict("parameters", raw.get("parameters", {}), SCHEMAS[cmd])
    out = raw.get("output_dir")
    if out is not None:
        out = _str("output_dir", out)
    seed = raw.get("seed")
    if seed is not None:
        seed = _int("seed", seed)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer", path="seed")
    return ExperimentConfig(cmd, params, out, seed)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, payload: Any) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(v: Any):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


@dataclass
class RunContext:
    config: ExperimentConfig
    out: Path
    threads: int
    seed: int
    figures: bool

    def path(self, name: str) -> Path:
        return self.out / name


# ---------------------------------------------------------------------------
# commands


def _check_d(d: int) -> int:
    from .specfun import check_dimension

    return check_dimension(d)


def run_lambda(ctx: RunContext, p: dict) -> dict:
    from .specfun import lambda_d

    d = _check_d(p["d"])
    if p["points"] < 2 or not p["q_max"] > p["q_min"] >= 0:
        raise DomainError("need q_max > q_min >= 0 and at least two points")
    q = np.linspace(p["q_min"], p["q_max"], p["points"])
    lam = lambda_d(d, q)
    write_csv(ctx.path("lambda.csv"), ["q", f"lambda_{d}"], zip(q, lam))
    if ctx.figures:
        from .plotting import line_figure

        line_figure(ctx.path("lambda.png"), q, {f"Lambda_{d}": lam}, xlabel="q", ylabel="Lambda_d(q)")
    return {"points": int(q.size)}


def run_interaction(ctx: RunContext, p: dict) -> dict:
    from .interaction import interaction_integral

    d = _check_d(p["d"])
    rows = []
    for quad in p["quads"]:
        rep = interaction_integral(d, quad, p["tol"])
        rows.append([*quad, rep.value, rep.abs_error_estimate, rep.panels_used, rep.tail_method])
    write_csv(ctx.path("interaction.csv"), ["w0", "w1", "w2", "w3", "value", "abs_error", "panels", "tail_method"], rows)
    return {"quads": len(rows)}


def _frequency_grid(spec: dict):
    from .collision import FrequencyGrid

    return FrequencyGrid.log_uniform(spec["lo"], spec["hi"], spec["n"])


def run_collision(ctx: RunContext, p: dict) -> dict:
    from .collision import broadened_collision_operator, cached_kernel_table, collision_operator, collision_rhs, mismatch_profile
    from .kwr_solver import initial_density

    d = _check_d(p["d"])
    grid = _frequency_grid(p["grid"])
    rho = initial_density(phi_function(p["phi"]), grid)
    cut = p["cut"] if p["cut"] is not None else rho.default_cutoff()
    if p["omegas"] is None:
        table = cached_kernel_table(d, grid, cut, p["tol"], threads=ctx.threads)
        omegas, values = grid.nodes, collision_rhs(table, rho)
    else:
        omegas = np.asarray(p["omegas"])
        values = np.array([collision_operator(d, rho, float(w), cut=cut, tol=p["tol"]) for w in omegas])
    write_csv(ctx.path("collision.csv"), ["omega", "C"], zip(omegas, values))
    result = {"nodes": int(len(omegas)), "cut": cut}
    if p["broadening_times"] is not None:
        times = p["broadening_times"]
        rows = []
        for w, sharp in zip(omegas, values):
            prof = mismatch_profile(d, rho, float(w), cut=cut)
            rows.append([w, sharp, *broadened_collision_operator(d, rho, float(w), times, profile=prof)])
        write_csv(ctx.path("broadened.csv"), ["omega", "sharp", *[f"t={t:g}" for t in times]], rows)
    if ctx.figures:
        from .plotting import line_figure

        line_figure(ctx.path("collision.png"), omegas, {"C[rho]": values}, xlabel="omega", ylabel="C", logx=True)
    return result


def run_evolve(ctx: RunContext, p: dict) -> dict:
    from .collision import cached_kernel_table
    from .kwr_solver import TimeSeriesWriter, conservation_ledger, evolve, initial_density

    d = _check_d(p["d"])
    grid = _frequency_grid(p["grid"])
    rho0 = initial_density(phi_function(p["phi"]), grid)
    cut = p["cut"] if p["cut"] is not None else rho0.default_cutoff()
    table = cached_kernel_table(d, grid, cut, p["quad_tol"], threads=ctx.threads)
    writer = TimeSeriesWriter(ctx.path("timeseries.csv"), d, p["stride"])
    final = evolve(rho0, table, p["tau_end"], p["tol"], d=d, max_steps=p["max_steps"], callback=writer)
    if writer.rows[-1][0] != final.tau:
        led = conservation_ledger(final, d)
        writer.rows.append([final.tau, led.mass, led.energy, *final.rho.values.tolist()])
    writer.flush(grid)
    first = conservation_ledger(type(final)(0.0, rho0), d)
    last = conservation_ledger(final, d)
    sup0 = float(np.max(np.abs(rho0.values)))
    drift = float(np.max(np.abs(final.rho.values - rho0.values))) / sup0 if sup0 > 0 else 0.0
    if ctx.figures:
        from .plotting import spectrum_snapshots

        picks = sorted({0, len(writer.rows) // 2, len(writer.rows) - 1})
        spectrum_snapshots(
            ctx.path("evolve.png"), grid.nodes, [writer.rows[i][0] for i in picks], [np.array(writer.rows[i][3:]) for i in picks]
        )
    return {
        "steps": final.step_count,
        "tau": final.tau,
        "sup_norm_drift": drift,
        "mass_drift": abs(last.mass - first.mass) / abs(first.mass) if first.mass else 0.0,
        "energy_drift": abs(last.energy - first.energy) / abs(first.energy) if first.energy else 0.0,
        "cut": cut,
    }


def run_scan_kz(ctx: RunContext, p: dict) -> dict:
    from .collision import cached_kernel_table
    from .kwr_solver import scan_stationary_exponents

    d = _check_d(p["d"])
    grid = _frequency_grid(p["grid"])
    if not (p["x_step"] > 0 and p["x_max"] >= p["x_min"]):
        raise DomainError("exponent range must be nonempty with a positive step")
    xs = np.round(np.arange(p["x_min"], p["x_max"] + 1e-9, p["x_step"]), 10)
    table = cached_kernel_table(d, grid, grid.omega_max, p["tol"], threads=ctx.threads)
    scan = scan_stationary_exponents(d, grid, table, xs, p["margin"])
    write_csv(ctx.path("scan.csv"), ["x", "residual"], zip(scan.exponents, scan.residuals))
    if ctx.figures:
        from .plotting import line_figure

        line_figure(ctx.path("scan.png"), scan.exponents, {"residual": np.maximum(scan.residuals, 1e-18)}, xlabel="x", ylabel="residual", logy=True)
    return {"candidates": [{"x": x, "residual": r} for x, r in scan.minima]}


def run_verify_reduction(ctx: RunContext, p: dict) -> dict:
    from .reduction import GaussianProfile, SmoothedDeltaConfig, radial_reduction_check, sphere_delta_identity

    d = _check_d(p["d"])
    if p["quads"] is None and p["fixtures"] is None:
        raise ConfigError("parameters: give 'quads', 'fixtures' or both", path="parameters.quads")
    cfg = SmoothedDeltaConfig(tuple(p["sigma_sequence"]), p["samples_per_sigma"])
    identity, radial = [], []
    for i, quad in enumerate(p["quads"] or []):
        rep = sphere_delta_identity(d, quad, cfg, seed=ctx.seed + i, threads=ctx.threads, nsigma=p["nsigma"])
        identity.append(rep)
    for i, (w, w2, c, s) in enumerate(p["fixtures"] or []):
        rep = radial_reduction_check(d, w, w2, GaussianProfile(c, s), cfg, seed=ctx.seed + 1000 + i, nsigma=p["nsigma"], threads=ctx.threads)
        radial.append(rep)
    if identity:
        write_csv(
            ctx.path("identity.csv"),
            ["w0", "w1", "w2", "w3", "target", "estimate", "combined_error", "z", "status"],
            [[*r.quad, r.target, r.estimate.value, r.combined_error, r.z_score, r.status] for r in identity],
        )
    if radial:
        write_csv(
            ctx.path("radial.csv"),
            ["omega", "omega2", "center", "width", "radial", "angular", "stderr", "status"],
            [
                [r.omega, r.omega2, r.profile.center, r.profile.width, r.radial_value,
                 math.nan if r.angular is None else r.angular.value, r.stderr, r.status]
                for r in radial
            ],
        )
    statuses = [r.status for r in identity + radial]
    return {
        "identity": [r.to_dict() for r in identity],
        "radial": [r.to_dict() for r in radial],
        "verdict": "pass" if all(s in ("pass", "inconclusive") for s in statuses) else "fail",
    }


_TEST_FUNCTIONS = {
    "sin2": ((1.0, 2.0), lambda w: np.where((w >= 1) & (w <= 2), np.sin(np.pi * (w - 1)) ** 2, 0.0)),
    "smooth-bump": (
        (1.0, 2.0),
        lambda w: np.where((w > 1) & (w < 2), np.exp(-1.0 / np.maximum((w - 1) * (2 - w), 1e-300)), 0.0),
    ),
}


def run_spectrum(ctx: RunContext, p: dict) -> dict:
    from .spectrum_synth import ManifoldModel, counting_consistency, spectrum_covering, sum_to_integral_check, weyl_eigenvalues

    d = _check_d(p["d"])
    if p["test_function"] not in _TEST_FUNCTIONS:
        raise ConfigError(f"parameters.test_function: unknown {p['test_function']!r}", path="parameters.test_function")
    support, chi = _TEST_FUNCTIONS[p["test_function"]]
    base = ManifoldModel(d, p["volume"])
    rows = []
    for L in p["L_values"]:
        model = base.dilated(L)
        spec = weyl_eigenvalues(model, spectrum_covering(model, support[1]), p["generation"], ctx.seed)
        rows.append([L, spec.eigenvalues.size, sum_to_integral_check(spec, chi, support)])
    write_csv(ctx.path("sum_to_integral.csv"), ["L", "N", "relative_error"], rows)
    counting = counting_consistency(weyl_eigenvalues(base, p["counting_N"], p["generation"], ctx.seed))
    if ctx.figures:
        from .plotting import line_figure

        Ls = np.array([r[0] for r in rows])
        errs = np.maximum([r[2] for r in rows], 1e-17)
        line_figure(ctx.path("sum_to_integral.png"), Ls, {"relative error": errs}, xlabel="L", ylabel="error", logx=True, logy=True)
    return {"counting_consistency": counting}


def run_microsim(ctx: RunContext, p: dict) -> dict:
    from .microsim import TorusModel, first_iterate_variance, nonlinear_drift

    model = TorusModel(p["d"], p["L"], p["n_modes"], p["epsilon"])
    phi = phi_function(p["phi"])
    edges = np.asarray(p["shell_edges"])
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("parameters.shell_edges: must be increasing", path="parameters.shell_edges")
    if p["mode"] == "first-iterate":
        res = first_iterate_variance(model, phi, p["t"], edges, p["realizations"], ctx.seed, threads=ctx.threads, budget=p["budget"])
        extra = {"ratio": res.ratio, "ratio_stderr": res.ratio_stderr}
    elif p["mode"] == "drift":
        dt = p["dt"] if p["dt"] is not None else 0.5 / float(np.max(model.omega()[model.dealiased()]))
        res = nonlinear_drift(model, phi, p["t"], dt, edges, p["realizations"], ctx.seed, threads=ctx.threads, budget=p["budget"])
        extra = {"resolved": res.resolved(), "sign_agreement": res.sign_agreement()}
    else:
        raise ConfigError("parameters.mode: expected 'first-iterate' or 'drift'", path="parameters.mode")
    s = res.spectrum
    write_csv(
        ctx.path("shells.csv"),
        ["omega", "modes", "mean", "stderr", "realizations", "prediction"],
        zip(s.centers, s.counts, s.mean, s.stderr, [s.realizations] * s.counts.size, res.prediction),
    )
    if ctx.figures:
        from .plotting import line_figure

        ok = ~s.empty
        line_figure(
            ctx.path("shells.png"), s.centers[ok], {"ensemble": s.mean[ok], "prediction": res.prediction[ok]},
            xlabel="omega", ylabel="shell mean", errors={"ensemble": s.stderr[ok]},
        )
    return {"mode": p["mode"], "t": p["t"], **extra}


def run_regime(ctx: RunContext, p: dict) -> dict:
    from .spectrum_synth import regime_validator

    return regime_validator(p["L"], p["epsilon"], p["d"], p["factor"]).to_dict()


RUNNERS: dict[str, Callable[[RunContext, dict], dict]] = {
    "lambda": run_lambda,
    "interaction": run_interaction,
    "collision": run_collision,
    "evolve": run_evolve,
    "scan-kz": run_scan_kz,
    "verify-reduction": run_verify_reduction,
    "spectrum": run_spectrum,
    "microsim": run_microsim,
    "regime": run_regime,
}


def _versions() -> dict:
    import scipy

    return {"wavekin": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def run(config: ExperimentConfig, output_dir, *, threads: int = 1, figures: bool = False) -> dict:
    """Execute one experiment and write its artifacts; returns the manifest."""
    if threads < 1:
        raise ConfigError("--threads must be positive", path="threads")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = 0 if config.seed is None else config.seed
    ctx = RunContext(config, out, threads, seed, figures)
    start = time.perf_counter()
    result = RUNNERS[config.command](ctx, config.parameters)
    wall = time.perf_counter() - start
    write_json(out / "result.json", result)
    manifest = {
        "command": config.command,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "seed": seed,
        "threads": threads,
        "versions": _versions(),
        "wall_time_s": wall,
        "summary": {k: v for k, v in result.items() if not isinstance(v, (list, dict, np.ndarray))},
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    write_json(out / "manifest.json", manifest)
    return manifest


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message, path="argv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavekin", description=__doc__.splitlines()[0])
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="experiment to run (or taken from the config)")
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--output", help="output directory (overrides output_dir)")
    parser.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    parser.add_argument("--seed", type=int, help="u64 seed (overrides the config)")
    parser.add_argument("--figures", action="store_true", help="also write PNG figures")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        raw: Any = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}", path="config") from exc
        if args.seed is not None and isinstance(raw, dict):
            raw = {**raw, "seed": args.seed}
        config = parse_config(raw, args.command)
        output = args.output or config.output_dir
        if output is None:
            raise ConfigError("no output directory: pass --output or set output_dir", path="output_dir")
        manifest = run(config, output, threads=args.threads, figures=args.figures)
    except ResourceError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except WavekinError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "output": str(Path(output)), "config_sha256": manifest["config_sha256"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
