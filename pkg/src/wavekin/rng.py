"""Reproducible counter-based random streams."""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *ids)``; distinct keys give independent streams."""
    if not 0 <= int(seed) < 2**64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, ids)])))
