"""Numeric kernel backends.

The hot loops (cone projections and the operator-splitting iteration in
:mod:`procap.sdp`) exist in two interchangeable flavours:

* ``numba``  -- ``@njit``-compiled loops calling LAPACK per block.
* ``numpy``  -- vectorised pure-numpy loops; complex Hermitian blocks are
  projected through the real symmetric embedding ``[[Re,-Im],[Im,Re]]``.

The backend is selected once at import time via the ``PROCAP_BACKEND``
environment variable (``"numba"`` or ``"numpy"``).  Default is numba when
importable.  Both paths are deterministic for fixed inputs; they agree to
~1e-12 but not bitwise (different LAPACK drivers).
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("PROCAP_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"PROCAP_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

_HAVE_NUMBA = False
if _requested in ("", "numba"):
    try:
        import numba

        _HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise ImportError(
                "PROCAP_BACKEND=numba but numba is not installed"
            ) from None

USE_NUMBA = _HAVE_NUMBA


def backend_name() -> str:
    """Active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Hermitian <-> real coordinate vector ("hvec")
#
# A complex Hermitian n x n matrix is stored as n^2 reals:
#   [diag (n) | sqrt(2)*Re(upper) | sqrt(2)*Im(upper)]
# with upper-triangle pairs enumerated row-major.  The map is an isometry:
# <A, B>_F = hvec(A) . hvec(B), so cone geometry is preserved.
# ---------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)


def _upper_indices(n: int):
    iu, ju = np.triu_indices(n, k=1)
    return iu, ju


def hvec(H: np.ndarray) -> np.ndarray:
    """Isometric real vectorisation of a complex Hermitian matrix."""
    n = H.shape[0]
    iu, ju = _upper_indices(n)
    out = np.empty(n * n)
    out[:n] = H.diagonal().real
    m = iu.size
    out[n : n + m] = _SQRT2 * H[iu, ju].real
    out[n + m :] = _SQRT2 * H[iu, ju].imag
    return out


def unhvec(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`hvec`."""
    iu, ju = _upper_indices(n)
    m = iu.size
    H = np.zeros((n, n), dtype=complex)
    H[np.arange(n), np.arange(n)] = v[:n]
    upper = (v[n : n + m] + 1j * v[n + m :]) / _SQRT2
    H[iu, ju] = upper
    H[ju, iu] = upper.conj()
    return H


def hvec_batch(H: np.ndarray) -> np.ndarray:
    """hvec applied along the first axis of a (B, n, n) stack."""
    b, n, _ = H.shape
    iu, ju = _upper_indices(n)
    m = iu.size
    out = np.empty((b, n * n))
    out[:, :n] = np.einsum("bii->bi", H).real
    out[:, n : n + m] = _SQRT2 * H[:, iu, ju].real
    out[:, n + m :] = _SQRT2 * H[:, iu, ju].imag
    return out


def unhvec_batch(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`hvec_batch` for a (B, n*n) array."""
    b = v.shape[0]
    iu, ju = _upper_indices(n)
    m = iu.size
    H = np.zeros((b, n, n), dtype=complex)
    H[:, np.arange(n), np.arange(n)] = v[:, :n]
    upper = (v[:, n : n + m] + 1j * v[:, n + m :]) / _SQRT2
    H[:, iu, ju] = upper
    H[:, ju, iu] = upper.conj()
    return H


def _embed_batch(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a (B, n, n) complex Hermitian stack."""
    b, n, _ = H.shape
    E = np.empty((b, 2 * n, 2 * n))
    E[:, :n, :n] = H.real
    E[:, n:, n:] = H.real
    E[:, :n, n:] = -H.imag
    E[:, n:, :n] = H.imag
    return E


def _unembed_batch(E: np.ndarray) -> np.ndarray:
    n = E.shape[1] // 2
    re = 0.5 * (E[:, :n, :n] + E[:, n:, n:])
    im = 0.5 * (E[:, n:, :n] - E[:, :n, n:])
    H = re + 1j * im
    return 0.5 * (H + np.conj(np.transpose(H, (0, 2, 1))))


# ---------------------------------------------------------------------------
# Cone layout
#
# The solver's decision vector is a concatenation of block segments.  The
# layout is described by flat int arrays so both backends (and the njit
# kernel in particular) can walk it without Python objects.
#   kind: 0 = PSD (complex Hermitian, dim n, segment n^2)
#         1 = free (segment len)
#         2 = nonneg (segment len)
# ---------------------------------------------------------------------------


class ConeLayout:
    def __init__(self, kinds, dims, offsets, total):
        self.kinds = np.asarray(kinds, dtype=np.int64)
        self.dims = np.asarray(dims, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.total = int(total)
        # group PSD blocks by matrix dim for batched numpy projection
        groups: dict[int, list[int]] = {}
        for k, d, o in zip(self.kinds, self.dims, self.offsets):
            if k == 0:
                groups.setdefault(int(d), []).append(int(o))
        self.psd_groups = {
            d: np.asarray(offs, dtype=np.int64) for d, offs in sorted(groups.items())
        }
        self.nonneg_mask = np.zeros(total, dtype=bool)
        self.free_mask = np.zeros(total, dtype=bool)
        for k, d, o in zip(self.kinds, self.dims, self.offsets):
            if k == 2:
                self.nonneg_mask[o : o + d] = True
            elif k == 1:
                self.free_mask[o : o + d] = True


def project_cone_numpy(v: np.ndarray, layout: ConeLayout) -> np.ndarray:
    """Euclidean projection onto the cone product (numpy path).

    PSD blocks go through the real symmetric embedding: eigenvalues of the
    embedding are those of the Hermitian block with doubled multiplicity, so
    clipping in the embedded space projects the block itself.
    """
    out = v.copy()
    out[layout.nonneg_mask] = np.maximum(out[layout.nonneg_mask], 0.0)
    for n, offs in layout.psd_groups.items():
        seg = np.stack([v[o : o + n * n] for o in offs])
        H = unhvec_batch(seg, n)
        E = _embed_batch(H)
        w, V = np.linalg.eigh(E)
        np.maximum(w, 0.0, out=w)
        Ep = (V * w[:, None, :]) @ np.transpose(V, (0, 2, 1))
        Hp = _unembed_batch(Ep)
        seg = hvec_batch(Hp)
        for row, o in enumerate(offs):
            out[o : o + n * n] = seg[row]
    return out


def min_eig_blocks_numpy(v: np.ndarray, layout: ConeLayout) -> float:
    """Smallest eigenvalue over all PSD blocks / nonneg coords of v."""
    lo = 0.0
    if layout.nonneg_mask.any():
        lo = min(lo, float(v[layout.nonneg_mask].min(initial=0.0)))
    for n, offs in layout.psd_groups.items():
        seg = np.stack([v[o : o + n * n] for o in offs])
        H = unhvec_batch(seg, n)
        w = np.linalg.eigvalsh(H)
        lo = min(lo, float(w.min()))
    return lo


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _unhvec_nb(v, n):
        H = np.zeros((n, n), dtype=np.complex128)
        for i in range(n):
            H[i, i] = v[i]
        pos = n
        m = (n * (n - 1)) // 2
        idx = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                re = v[pos + idx] / _SQRT2
                im = v[pos + m + idx] / _SQRT2
                H[i, j] = re + 1j * im
                H[j, i] = re - 1j * im
                idx += 1
        return H

    @njit(cache=True)
    def _hvec_nb(H, v):
        n = H.shape[0]
        for i in range(n):
            v[i] = H[i, i].real
        pos = n
        m = (n * (n - 1)) // 2
        idx = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                v[pos + idx] = _SQRT2 * H[i, j].real
                v[pos + m + idx] = _SQRT2 * H[i, j].imag
                idx += 1

    @njit(cache=True)
    def project_cone_nb(v, kinds, dims, offsets):
        out = v.copy()
        for bi in range(kinds.shape[0]):
            k = kinds[bi]
            d = dims[bi]
            o = offsets[bi]
            if k == 0:
                H = _unhvec_nb(v[o : o + d * d], d)
                w, V = np.linalg.eigh(H)
                for i in range(d):
                    if w[i] < 0.0:
                        w[i] = 0.0
                Hp = (V * w) @ V.conj().T
                _hvec_nb(Hp, out[o : o + d * d])
            elif k == 2:
                for i in range(o, o + d):
                    if out[i] < 0.0:
                        out[i] = 0.0
        return out

    @njit(cache=True)
    def min_eig_blocks_nb(v, kinds, dims, offsets):
        lo = 0.0
        for bi in range(kinds.shape[0]):
            k = kinds[bi]
            d = dims[bi]
            o = offsets[bi]
            if k == 0:
                H = _unhvec_nb(v[o : o + d * d], d)
                w = np.linalg.eigvalsh(H)
                if w[0] < lo:
                    lo = w[0]
            elif k == 2:
                for i in range(o, o + d):
                    if v[i] < lo:
                        lo = v[i]
        return lo

    @njit(cache=True)
    def admm_iterate_nb(
        P, xb, c, x, z, u, kinds, dims, offsets, rho, relax, n_iter
    ):
        """Run n_iter fixed-penalty iterations in place; returns consensus residuals.

        x-step: project z - u - c/rho onto the affine subspace (x = (I-P)v + xb)
        z-step: project relaxed iterate onto the cone product
        u-step: scaled dual update
        """
        n = x.shape[0]
        rp = 0.0
        rd = 0.0
        for _ in range(n_iter):
            v = np.empty(n)
            for i in range(n):
                v[i] = z[i] - u[i] - c[i] / rho
            xnew = v - P @ v + xb
            w = np.empty(n)
            for i in range(n):
                xr = relax * xnew[i] + (1.0 - relax) * z[i]
                xnew[i] = xr
                w[i] = xr + u[i]
            znew = project_cone_nb(w, kinds, dims, offsets)
            rp = 0.0
            rd = 0.0
            for i in range(n):
                du = xnew[i] - znew[i]
                u[i] = u[i] + du
                rp += du * du
                dz = znew[i] - z[i]
                rd += dz * dz
                x[i] = xnew[i]
                z[i] = znew[i]
            rp = np.sqrt(rp)
            rd = rho * np.sqrt(rd)
        return rp, rd


def project_cone(v: np.ndarray, layout: ConeLayout) -> np.ndarray:
    if USE_NUMBA:
        return project_cone_nb(v, layout.kinds, layout.dims, layout.offsets)
    return project_cone_numpy(v, layout)


def min_eig_blocks(v: np.ndarray, layout: ConeLayout) -> float:
    if USE_NUMBA:
        return float(min_eig_blocks_nb(v, layout.kinds, layout.dims, layout.offsets))
    return min_eig_blocks_numpy(v, layout)


def admm_iterate(P, xb, c, x, z, u, layout: ConeLayout, rho, relax, n_iter):
    """Run n_iter ADMM iterations in place, returning consensus residuals."""
    if USE_NUMBA:
        return admm_iterate_nb(
            P, xb, c, x, z, u, layout.kinds, layout.dims, layout.offsets,
            rho, relax, n_iter,
        )
    rp = rd = 0.0
    for _ in range(n_iter):
        v = z - u - c / rho
        xnew = v - P @ v + xb
        xnew = relax * xnew + (1.0 - relax) * z
        znew = project_cone_numpy(xnew + u, layout)
        u += xnew - znew
        rp = float(np.linalg.norm(xnew - znew))
        rd = rho * float(np.linalg.norm(znew - z))
        x[:] = xnew
        z[:] = znew
    return rp, rd
