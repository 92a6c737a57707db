"""Central numerical tolerances shared across modules."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Default tolerances: entrywise checks at 1e-12, spectral checks at 1e-10.

    The violation signal is ~2.6e-4, so the spectral tolerance leaves six
    orders of magnitude of margin.
    """

    entrywise: float = 1e-12
    spectral: float = 1e-10


DEFAULT_TOL = Tolerances()
