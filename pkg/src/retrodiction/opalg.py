"""Dense complex operator algebra for small Hilbert spaces.

Operators are plain ``numpy`` complex arrays of shape ``(D, D)``. All
functions are pure and return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OperatorError

HERMITICITY_TOL = 1e-12
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class HermitianCheck:
    """Result of :func:`min_eig_hermitian`."""

    max_asymmetry: float
    min_eigenvalue: float
    hermitian: bool


def as_operator(m, name: str = "operator") -> np.ndarray:
    """Validate ``m`` as a square finite complex matrix and return a copy."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise OperatorError(f"{name}: expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise OperatorError(f"{name}: contains NaN or Inf entries")
    return arr


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def projector(state) -> np.ndarray:
    """Return ``|psi><psi|`` for the normalized version of ``state``."""
    psi = np.asarray(state, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0.0 or not np.isfinite(norm):
        raise OperatorError("cannot build a projector from a zero or non-finite vector")
    psi = psi / norm
    return np.outer(psi, psi.conj())


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m)).copy()


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise OperatorError(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_dim(a, b)
    return a @ b + b @ a


def trace(m: np.ndarray) -> complex:
    return complex(np.trace(m))


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + adjoint(m))


def max_asymmetry(m: np.ndarray) -> float:
    """Largest ``|M[a,b] - conj(M[b,a])|``."""
    return float(np.max(np.abs(m - np.conj(m.T))))


def min_eig_hermitian(m: np.ndarray, hermiticity_tol: float = HERMITICITY_TOL) -> HermitianCheck:
    """Smallest eigenvalue of the Hermitian part of ``m``.

    The asymmetry is reported rather than raised; ``hermitian`` is False when
    it exceeds ``hermiticity_tol`` and the caller decides what that means.
    """
    asym = max_asymmetry(m)
    lam = np.linalg.eigvalsh(hermitian_part(m))
    return HermitianCheck(max_asymmetry=asym, min_eigenvalue=float(lam[0]),
                          hermitian=asym <= hermiticity_tol)


def min_eigenvalues(stack: np.ndarray) -> np.ndarray:
    """Smallest Hermitian-part eigenvalue for each matrix of an ``(N, D, D)`` stack."""
    herm = 0.5 * (stack + np.conj(np.swapaxes(stack, -1, -2)))
    return np.linalg.eigvalsh(herm)[..., 0]


def identity_proportionality(m: np.ndarray, tol: float) -> complex | None:
    """Return ``G`` if ``m == G * 1`` entrywise within ``tol`` (max-abs), else None."""
    dim = m.shape[0]
    g = np.trace(m) / dim
    if np.max(np.abs(m - g * np.eye(dim))) <= tol:
        return complex(g)
    return None


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """``Tr(a @ b)`` without forming the product."""
    _check_same_dim(a, b)
    return complex(np.sum(a * b.T))


def real_scalar(z: complex, scale: float = 1.0, tol: float = 1e-12, what: str = "value") -> float:
    """Return ``z.real`` after asserting the imaginary part is negligible.

    A large imaginary part means an upstream operator lost Hermiticity; that
    is an internal-consistency failure, never something to clamp away.
    """
    if abs(z.imag) > tol * max(1.0, scale):
        raise OperatorError(f"{what} has non-negligible imaginary part {z.imag:.3e}")
    return float(z.real)
