"""Numerical toolkit for wave kinetic equations on compact manifolds."""

from __future__ import annotations

from .errors import (
    AccuracyError,
    CacheMismatchError,
    ConvergenceError,
    DivergentIntegralError,
    DomainError,
    InstabilityError,
    ResourceError,
    StepSizeError,
    WavekinError,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "CacheMismatchError",
    "ConvergenceError",
    "DivergentIntegralError",
    "DomainError",
    "InstabilityError",
    "ResourceError",
    "StepSizeError",
    "WavekinError",
    "__version__",
]
