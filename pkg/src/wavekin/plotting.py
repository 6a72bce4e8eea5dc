"""Optional figures for CLI runs; matplotlib is imported only when a figure is drawn."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def line_figure(
    path,
    x: np.ndarray,
    series: dict[str, np.ndarray],
    *,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
    errors: dict[str, np.ndarray] | None = None,
) -> Path:
    """One panel with a line per entry of ``series``; optional error bars."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for label, y in series.items():
        yerr = None if errors is None else errors.get(label)
        if yerr is None:
            ax.plot(x, y, lw=1.2, label=label)
        else:
            ax.errorbar(x, y, yerr=yerr, fmt="o-", ms=3, lw=1.0, capsize=2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def spectrum_snapshots(path, omega: np.ndarray, taus: Sequence[float], rows: Sequence[np.ndarray]) -> Path:
    """Densities at a few slow times on log-log axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for tau, rho in zip(taus, rows):
        pos = rho > 0
        ax.loglog(omega[pos], rho[pos], lw=1.0, label=f"tau = {tau:.3g}")
    ax.set_xlabel("omega")
    ax.set_ylabel("rho")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
