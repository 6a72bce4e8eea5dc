"""Exception hierarchy shared by all modules.

The CLI maps :class:`DomainError` (and its subclasses) to exit status 1 and
:class:`ResourceError` to exit status 2.
"""

from __future__ import annotations

from typing import Any


class WavekinError(Exception):
    """Base class carrying an optional diagnostics mapping."""

    def __init__(self, message: str, **diagnostics: Any) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }


class DomainError(WavekinError, ValueError):
    """Input outside the supported domain of an operation."""


class AccuracyError(DomainError):
    """The requested accuracy cannot be certified for these inputs."""


class ConvergenceError(DomainError):
    """An iterative or adaptive procedure failed to certify its tolerance."""


class DivergentIntegralError(ConvergenceError):
    """The requested integral does not converge for these inputs."""


class StepSizeError(DomainError):
    """A time integrator could not find an admissible step."""


class InstabilityError(DomainError):
    """A statistical extrapolation behaved inconsistently."""


class CacheMismatchError(WavekinError):
    """A cached table does not match the requested configuration."""


class ResourceError(WavekinError):
    """A computation would exceed its configured resource budget."""


def _jsonable(value: Any) -> Any:
    try:
        import numpy as np
    except ImportError:  # pragma: no cover
        return value
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value
