"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; kets are 1-D
arrays. Nothing here mutates its inputs.
"""

from __future__ import annotations

import numpy as np

HERM_TOL = 1e-10
NORM_TOL = 1e-10
PSD_TOL = 1e-9


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def ket(amplitudes) -> np.ndarray:
    arr = np.asarray(amplitudes, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-D ket, got shape {arr.shape}")
    return arr


def is_normalized(v, tol: float = NORM_TOL) -> bool:
    v = ket(v)
    return abs(np.vdot(v, v).real - 1.0) <= tol


def projector(v) -> np.ndarray:
    """Return ``|v><v|`` (no normalization is applied)."""
    v = ket(v)
    return np.outer(v, v.conj())


def is_hermitian(m, tol: float = HERM_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def _require_hermitian(m: np.ndarray) -> None:
    if not is_hermitian(m):
        raise ValueError("matrix is not Hermitian within HERM_TOL")


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def transpose(m) -> np.ndarray:
    """Plain transpose in the computational basis (no conjugation)."""
    return as_matrix(m).T.copy()


def partial_trace_A(m, dA: int, dB: int) -> np.ndarray:
    """Trace out the first tensor factor of an operator on C^dA (x) C^dB."""
    m = as_matrix(m)
    if m.shape != (dA * dB, dA * dB):
        raise ValueError(
            f"operator of shape {m.shape} does not act on C^{dA} (x) C^{dB}"
        )
    return np.einsum("ijik->jk", m.reshape(dA, dB, dA, dB))


def op_norm_hermitian(m) -> float:
    """Operator norm (largest |eigenvalue|) of a Hermitian matrix."""
    m = as_matrix(m)
    _require_hermitian(m)
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def is_psd(m, tol: float = PSD_TOL) -> bool:
    m = as_matrix(m)
    _require_hermitian(m)
    return bool(np.linalg.eigvalsh(m)[0] >= -tol)


def is_rank1_projector(m, tol: float = 1e-9) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1] or not is_hermitian(m, tol):
        return False
    return bool(
        np.max(np.abs(m @ m - m)) <= tol and abs(np.trace(m) - 1.0) <= tol
    )


def top_eigenvector(m) -> np.ndarray:
    """Unit eigenvector for the largest eigenvalue of a Hermitian matrix."""
    m = as_matrix(m)
    _require_hermitian(m)
    _, vecs = np.linalg.eigh(m)
    return vecs[:, -1]
