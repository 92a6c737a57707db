"""The PPT bound entangled two-qutrit state and validity reports.

The state is rank 4 and built from its spectral decomposition; every
irrational entry is evaluated from its exact closed form. It is invariant
under partial transposition of the second qutrit, hence PPT and
undistillable, yet violates a Bell inequality (see bell module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .linalg import BipartiteDims, hermiticity_deviation, min_eigenvalue, partial_transpose


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray
    dims: BipartiteDims

    def __post_init__(self):
        n = self.dims.total
        if self.mat.shape != (n, n):
            raise ValueError(f"state shape {self.mat.shape} vs dims {n}x{n}")


@dataclass(frozen=True)
class StateReport:
    """Deviations from a valid PPT state; all entries are nonnegative."""

    trace_dev: float
    hermiticity_dev: float
    min_eig: float
    pt_invariance_dev: float
    pt_min_eig: float

    def ok(self, tol: float = 1e-10) -> bool:
        return (
            self.trace_dev <= tol
            and self.hermiticity_dev <= tol
            and self.min_eig >= -tol
            and self.pt_min_eig >= -tol
        )


# Spectrum of the counterexample state; 3257/6884 + 2*450/1721 + 27/6884 = 1.
EIGENVALUES = (3257 / 6884, 450 / 1721, 450 / 1721, 27 / 6884)

QUTRIT_PAIR = BipartiteDims(3, 3)


def _ket(i: int, j: int) -> np.ndarray:
    v = np.zeros(9)
    v[3 * i + j] = 1.0
    return v


def state_eigenvectors() -> np.ndarray:
    """The four orthonormal eigenvectors, as columns of a 9x4 real matrix."""
    a12 = math.sqrt(131 / 2) / 12  # = sqrt(262)/24
    s2 = 1 / math.sqrt(2)
    s3 = 1 / math.sqrt(3)
    psi1 = s2 * (_ket(0, 0) + _ket(1, 1))
    psi2 = a12 * (_ket(0, 1) + _ket(1, 0)) + (1 / 60) * _ket(0, 2) - (3 / 10) * _ket(2, 1)
    psi3 = a12 * (_ket(0, 0) - _ket(1, 1)) + (1 / 60) * _ket(1, 2) + (3 / 10) * _ket(2, 0)
    psi4 = s3 * (-_ket(0, 1) + _ket(1, 0) + _ket(2, 2))
    return np.column_stack([psi1, psi2, psi3, psi4])


def build_counterexample_state() -> DensityMatrix:
    """Rank-4 PT-invariant two-qutrit state from its spectral form."""
    V = state_eigenvectors().astype(complex)
    lam = np.array(EIGENVALUES)
    rho = (V * lam) @ V.conj().T
    return DensityMatrix(rho, QUTRIT_PAIR)


def verify_state(state: DensityMatrix) -> StateReport:
    """Measure trace/Hermiticity/PSD/PT deviations; never raises."""
    rho = state.mat
    pt = partial_transpose(rho, state.dims, "B")
    herm = 0.5 * (rho + rho.conj().T)
    pt_herm = 0.5 * (pt + pt.conj().T)
    return StateReport(
        trace_dev=abs(float(np.trace(rho).real) - 1.0) + abs(float(np.trace(rho).imag)),
        hermiticity_dev=hermiticity_deviation(rho),
        min_eig=min_eigenvalue(herm),
        pt_invariance_dev=float(np.max(np.abs(pt - rho))),
        pt_min_eig=min_eigenvalue(pt_herm),
    )


def mix_with_white_noise(state: DensityMatrix, eps: float) -> DensityMatrix:
    """(1-eps) * state + eps * identity / (dA*dB)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"mixing weight must be in [0, 1], got {eps}")
    n = state.dims.total
    mixed = (1.0 - eps) * state.mat + eps * np.eye(n, dtype=complex) / n
    return DensityMatrix(mixed, state.dims)


def state_to_json(state: DensityMatrix) -> str:
    payload = {"dims": [state.dims.dA, state.dims.dB], **jsonio.matrix_to_json(state.mat)}
    return jsonio.dumps(payload)


def state_from_json(text: str) -> DensityMatrix:
    d = jsonio.loads(text)
    return DensityMatrix(jsonio.matrix_from_json(d), BipartiteDims(*d["dims"]))
