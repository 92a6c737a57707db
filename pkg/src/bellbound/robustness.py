"""White-noise robustness of a Bell violation.

The functional value is affine in the state, so under mixing with white
noise, I(eps) = (1-eps) * I(rho) + eps * I(identity/n) is a line; the
violation survives for every eps below the root eps*. A strictly positive
eps* certifies that a whole neighborhood of PPT states still violates the
inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bell import BellFunctional, MeasurementSet, behavior, evaluate
from .states import DensityMatrix, mix_with_white_noise


@dataclass(frozen=True)
class RobustnessReport:
    value_state: float  # functional value on the input state
    value_noise: float  # functional value on the maximally mixed state
    threshold: float  # eps*: smallest mixing weight killing the violation


def violation_at(
    state: DensityMatrix, f: BellFunctional, ma: MeasurementSet, mb: MeasurementSet, eps: float
) -> float:
    """Functional value of the white-noise-mixed state at weight eps."""
    mixed = mix_with_white_noise(state, eps)
    return evaluate(f, behavior(mixed, ma, mb, f.scenario))


def noise_threshold(
    state: DensityMatrix,
    f: BellFunctional,
    ma: MeasurementSet,
    mb: MeasurementSet,
) -> RobustnessReport:
    """Closed-form eps* = I(rho) / (I(rho) - I(identity/n)).

    Requires an actual violation (value above the local bound, taken as 0
    after shifting) that white noise destroys; otherwise the line never
    crosses zero on (0, 1] and a ValueError is raised.
    """
    v0 = violation_at(state, f, ma, mb, 0.0)
    v1 = violation_at(state, f, ma, mb, 1.0)
    if not v0 > 0.0 >= v1:
        raise ValueError(
            f"no noise threshold on (0, 1]: endpoint values {v0:.3e}, {v1:.3e}"
        )
    return RobustnessReport(v0, v1, v0 / (v0 - v1))


def noise_threshold_bisect(
    state: DensityMatrix,
    f: BellFunctional,
    ma: MeasurementSet,
    mb: MeasurementSet,
    tol: float = 1e-12,
) -> float:
    """eps* located by bisection on eps -> I(eps); cross-check for the closed form."""
    lo, hi = 0.0, 1.0
    v0 = violation_at(state, f, ma, mb, lo)
    v1 = violation_at(state, f, ma, mb, hi)
    if not v0 > 0.0 >= v1:
        raise ValueError(
            f"no noise threshold on (0, 1]: endpoint values {v0:.3e}, {v1:.3e}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if violation_at(state, f, ma, mb, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
