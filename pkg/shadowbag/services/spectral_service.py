"""
Dense Hermitian kernel for the barrier: one eigendecomposition serves the feasibility
test, tr log(A + eps) and (A + eps)^-1.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from shadowbag.core.errors import BarrierDomainError, HermiticityError


class HermitianMatrix:
    """Complex square matrix, symmetrized as (A + A^H) / 2 on ingest."""

    def __init__(self, entries: np.ndarray, tol: float = 1e-10):
        A = np.asarray(entries, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise HermiticityError(f"Expected a square matrix, got shape {A.shape}")
        scale = max(np.linalg.norm(A), 1.0)
        skew = np.linalg.norm(A - A.conj().T)
        if skew > tol * scale:
            raise HermiticityError(f"Matrix is not Hermitian: ||A - A^H|| = {skew:.3g}")
        self.entries = 0.5 * (A + A.conj().T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _as_hermitian(A) -> HermitianMatrix:
    return A if isinstance(A, HermitianMatrix) else HermitianMatrix(A)


def eigh(A) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unitary eigenvectors (columns)."""
    w, V = scipy.linalg.eigh(_as_hermitian(A).entries)
    return w, V


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def is_feasible(self, eps: float) -> bool:
        return self.lambda_min + eps > 0.0

    def check_domain(self, eps: float):
        if not self.is_feasible(eps):
            raise BarrierDomainError(self.lambda_min, eps)

    def trace_log_shifted(self, eps: float) -> float:
        self.check_domain(eps)
        return float(np.log(self.eigenvalues + eps).sum())

    def inverse_shifted(self, eps: float) -> np.ndarray:
        self.check_domain(eps)
        V = self.eigenvectors
        X = (V / (self.eigenvalues + eps)) @ V.conj().T
        return 0.5 * (X + X.conj().T)


def decompose(A) -> Spectrum:
    w, V = eigh(A)
    return Spectrum(eigenvalues=w, eigenvectors=V)


def trace_log_shifted(A, eps: float) -> float:
    return decompose(A).trace_log_shifted(eps)


def inverse_shifted(A, eps: float) -> HermitianMatrix:
    return HermitianMatrix(decompose(A).inverse_shifted(eps))


def lambda_min(A) -> float:
    """Smallest eigenvalue only, without eigenvectors."""
    return float(scipy.linalg.eigh(_as_hermitian(A).entries, eigvals_only=True, subset_by_index=[0, 0])[0])
