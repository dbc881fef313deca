"""Dense complex linear algebra primitives.

Everything here is a pure function on immutable ndarrays; target sizes are
desk scale (matrices up to 256 x 256), so storage is dense throughout.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_ATOL = 1e-12


class DimensionError(ValueError):
    """Operands have incompatible shapes for the requested operation."""


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T

def hermitize(a: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A†)/2."""
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, atol: float = HERMITICITY_ATOL) -> bool:
    return a.shape[0] == a.shape[1] and bool(
        np.max(np.abs(a - a.conj().T)) <= atol
    )


def require_hermitian(a: np.ndarray, atol: float = HERMITICITY_ATOL, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError(f"{what} contains non-finite entries")
    if not is_hermitian(a, atol):
        dev = float(np.max(np.abs(a - a.conj().T)))
        raise ValueError(f"{what} is not Hermitian (deviation {dev:.3e} > {atol:.0e})")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (first factor owns the major index)."""
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace(m: np.ndarray, dims: tuple[int, int], which: int) -> np.ndarray:
    """Trace out subsystem `which` (0 or 1) of a bipartite operator.

    `m` must be square with dimension dims[0]*dims[1]; the returned matrix
    acts on the kept subsystem.
    """
    d0, d1 = dims
    m = np.asarray(m)
    if m.shape != (d0 * d1, d0 * d1):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    t = m.reshape(d0, d1, d0, d1)
    if which == 0:
        return np.einsum("ijik->jk", t)
    if which == 1:
        return np.einsum("ijkj->ik", t)
    raise DimensionError(f"which must be 0 or 1, got {which}")


def partial_transpose(m: np.ndarray, dims: tuple[int, int], which: int) -> np.ndarray:
    """Transpose one tensor factor of a bipartite operator."""
    d0, d1 = dims
    m = np.asarray(m)
    if m.shape != (d0 * d1, d0 * d1):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    t = m.reshape(d0, d1, d0, d1)
    if which == 0:
        t = t.transpose(2, 1, 0, 3)
    elif which == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise DimensionError(f"which must be 0 or 1, got {which}")
    return t.reshape(d0 * d1, d0 * d1)


def eig_hermitian(h: np.ndarray, atol: float = HERMITICITY_ATOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvectors as columns).  The input is
    symmetrised before decomposition to guard against drift accumulated by
    repeated affine maps.  Reconstruction satisfies
    ||V diag(w) V† - H||_F <= 1e-9 * max(1, ||H||_F).
    """
    h = require_hermitian(h, atol=atol, what="eig_hermitian input")
    return np.linalg.eigh(hermitize(h))


def project_psd(h: np.ndarray, atol: float = HERMITICITY_ATOL) -> np.ndarray:
    """Nearest positive semidefinite matrix in Frobenius norm.

    Negative eigenvalues are clipped to zero; PSD inputs are fixed points.
    """
    w, v = eig_hermitian(h, atol=atol)
    if w[0] >= 0.0:
        return hermitize(np.asarray(h, dtype=complex))
    w = np.maximum(w, 0.0)
    return hermitize((v * w) @ v.conj().T)


def min_eigenvalue(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(np.asarray(h, dtype=complex)))[0])


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))
