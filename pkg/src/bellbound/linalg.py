"""Dense complex linear algebra for Hermitian operators.

Bipartite operators live on C^dA (x) C^dB with the row-major product basis
|ij> -> dB*i + j (first factor major). All functions are pure and leave
their inputs untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL


@dataclass(frozen=True)
class BipartiteDims:
    """Local dimensions of a bipartite operator."""

    dA: int
    dB: int

    def __post_init__(self):
        if self.dA < 1 or self.dB < 1:
            raise ValueError(f"local dimensions must be >= 1, got {self.dA}x{self.dB}")

    @property
    def total(self) -> int:
        return self.dA * self.dB


def _check_bipartite(m: np.ndarray, dims: BipartiteDims) -> None:
    n = dims.total
    if m.shape != (n, n):
        raise ValueError(
            f"matrix shape {m.shape} does not match bipartite dims "
            f"{dims.dA}x{dims.dB} (expected {n}x{n})"
        )


def hermiticity_deviation(m: np.ndarray) -> float:
    """Max entrywise deviation from M = M^dagger."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def require_hermitian(m: np.ndarray, tol: float = DEFAULT_TOL.spectral) -> None:
    dev = hermiticity_deviation(m)
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e} > {tol:.1e})")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; block (i,j) of the result equals a[i,j] * b."""
    return np.kron(a, b)


def partial_transpose(m: np.ndarray, dims: BipartiteDims, party: str = "B") -> np.ndarray:
    """Transpose one tensor factor in the computational basis."""
    _check_bipartite(m, dims)
    dA, dB = dims.dA, dims.dB
    m4 = m.reshape(dA, dB, dA, dB)
    if party == "B":
        out = m4.transpose(0, 3, 2, 1)
    elif party == "A":
        out = m4.transpose(2, 1, 0, 3)
    else:
        raise ValueError("party must be 'A' or 'B'")
    return out.reshape(dA * dB, dA * dB)


def partial_trace(m: np.ndarray, dims: BipartiteDims, traced_party: str = "B") -> np.ndarray:
    """Reduced operator on the remaining party; preserves the trace."""
    _check_bipartite(m, dims)
    dA, dB = dims.dA, dims.dB
    m4 = m.reshape(dA, dB, dA, dB)
    if traced_party == "B":
        return np.trace(m4, axis1=1, axis2=3)
    if traced_party == "A":
        return np.trace(m4, axis1=0, axis2=2)
    raise ValueError("traced_party must be 'A' or 'B'")


def eigh(m: np.ndarray, herm_tol: float = DEFAULT_TOL.spectral):
    """Eigendecomposition of a Hermitian matrix (ascending eigenvalues).

    Raises on non-Hermitian input instead of silently symmetrizing.
    """
    require_hermitian(m, herm_tol)
    return np.linalg.eigh(m)


def min_eigenvalue(m: np.ndarray, herm_tol: float = DEFAULT_TOL.spectral) -> float:
    require_hermitian(m, herm_tol)
    return float(np.linalg.eigvalsh(m)[0])


def is_psd(m: np.ndarray, tol: float = DEFAULT_TOL.spectral) -> bool:
    return min_eigenvalue(m) >= -tol
