"""First-order conic solver for block-PSD programs with affine constraints.

Problems are stated over named blocks (complex Hermitian PSD, free Hermitian,
free/nonneg reals) with a real linear objective and scalar- or matrix-valued
affine equality constraints.  Operator inequalities are modelled by the caller
through explicit PSD slack blocks.

The algorithm is ADMM over the product of the affine subspace {Ax = b} and
the cone product: the affine projection reuses one cached SVD-based projector
per compiled problem, the cone projection is an eigenvalue clip per block
(see :mod:`procap._backend` for the two kernel flavours), with over-relaxation
and residual-balanced penalty adaptation.  A least-squares polish step on the
detected optimal face refines the final iterate.

Compiled problems can be re-solved after swapping the right-hand side of any
tagged constraint or the objective, and support warm starts; this is what
makes alternating (see-saw) schemes cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend as bk
from .linalg import hermitize, require_hermitian

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200_000
CHECK_EVERY = 50
BALANCE_EVERY = 100
RHO_MIN, RHO_MAX = 1e-4, 1e4
RELAX = 1.6


def embed_hermitian(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]].

    The embedding carries each eigenvalue of H with doubled multiplicity, and
    doubles Frobenius inner products; PSD(H) iff PSD(embedding).
    """
    h = require_hermitian(h, what="embed_hermitian input")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


_BASIS_CACHE: dict[int, np.ndarray] = {}


def _hermitian_basis(n: int) -> np.ndarray:
    """Stack of the n^2 Hermitian matrices dual to the hvec coordinates."""
    got = _BASIS_CACHE.get(n)
    if got is None:
        got = bk.unhvec_batch(np.eye(n * n), n)
        _BASIS_CACHE[n] = got
    return got


_KIND_CODE = {"psd": 0, "free": 1, "nonneg": 2, "herm": 3}


@dataclass
class _Block:
    name: str
    kind: str
    n: int          # matrix dim for psd/herm, vector length otherwise
    offset: int = 0

    @property
    def size(self) -> int:
        return self.n * self.n if self.kind in ("psd", "herm") else self.n


def _equilibrate(A: np.ndarray, blocks, sweeps: int = 10):
    """Ruiz scaling: rows individually, columns one scalar per block."""
    m, n = A.shape
    rrow = np.ones(m)
    ecol = np.ones(n)
    if m == 0 or not A.any():
        return rrow, ecol
    work = np.abs(A)
    for _ in range(sweeps):
        rn = work.max(axis=1)
        dr = 1.0 / np.sqrt(np.maximum(rn, 1e-12))
        work *= dr[:, None]
        rrow *= dr
        for blk in blocks:
            sl = slice(blk.offset, blk.offset + blk.size)
            cn = work[:, sl].max(initial=0.0)
            if cn > 0.0:
                dc = 1.0 / np.sqrt(cn)
                dc = min(max(dc, 1e-4), 1e4)
                work[:, sl] *= dc
                ecol[sl] *= dc
    return rrow, ecol


@dataclass
class SdpSolution:
    values: dict
    objective_value: float
    primal_residual: float
    dual_residual: float
    gap_estimate: float
    iterations: int
    status: str                      # "optimal" | "max_iter" | "infeasible"
    state: tuple = field(repr=False, default=None)


class SdpProblem:
    """Block-structured conic program; see module docstring."""

    def __init__(self, name: str = ""):
        self.name = name
        self.blocks: list[_Block] = []
        self._block_by_name: dict[str, _Block] = {}
        # constraints as (per-block row segments, rhs vector); blocks may be
        # declared after earlier constraints, so rows are assembled at compile
        self._constraints: list[tuple[dict, np.ndarray]] = []
        self._n_rows = 0
        self._tags: dict[str, tuple[int, int, str, int]] = {}
        self.sense = "min"
        self._obj_terms: dict[str, np.ndarray] = {}
        self._obj_const = 0.0
        self._n_total = 0
        self._compiled: CompiledSdp | None = None

    # -- structure ---------------------------------------------------------

    def add_block(self, name: str, kind: str, n: int) -> None:
        if kind not in _KIND_CODE:
            raise ValueError(f"unknown block kind {kind!r}")
        if name in self._block_by_name:
            raise ValueError(f"duplicate block {name!r}")
        blk = _Block(name, kind, int(n), offset=self._n_total)
        self.blocks.append(blk)
        self._block_by_name[name] = blk
        self._n_total += blk.size

    def _coeff_segment(self, blk: _Block, coeff) -> np.ndarray:
        if blk.kind in ("psd", "herm"):
            c = require_hermitian(np.asarray(coeff, dtype=complex),
                                  atol=1e-10, what=f"coefficient for {blk.name}")
            if c.shape != (blk.n, blk.n):
                raise ValueError(f"coefficient shape mismatch for block {blk.name}")
            return bk.hvec(c)
        c = np.asarray(coeff, dtype=float).ravel()
        if c.size != blk.n:
            raise ValueError(f"coefficient length mismatch for block {blk.name}")
        return c

    def add_scalar_eq(self, terms: dict, rhs: float, tag: str | None = None) -> None:
        """Constraint sum_b <C_b, X_b> = rhs (Hermitian pairing per block)."""
        segs = {}
        for name, coeff in terms.items():
            blk = self._block_by_name[name]
            segs[name] = self._coeff_segment(blk, coeff)[None, :]
        self._push_rows(segs, np.array([float(rhs)]), tag, "scalar", 1)

    def add_matrix_eq(self, terms: dict, rhs: np.ndarray, tag: str | None = None) -> None:
        """Constraint sum_b L_b(X_b) = rhs with matrix-valued linear maps.

        Each term is ("id",) for X itself, ("scale", s) for s*X, or
        ("op", f) where f maps a (B, n, n) Hermitian stack to a
        (B, n_out, n_out) Hermitian stack.
        """
        rhs = require_hermitian(np.asarray(rhs, dtype=complex), atol=1e-9,
                                what="matrix equality rhs")
        n_out = rhs.shape[0]
        segs = {}
        for name, term in terms.items():
            blk = self._block_by_name[name]
            if blk.kind not in ("psd", "herm"):
                raise ValueError("matrix equalities require matrix blocks")
            if term[0] == "id":
                if blk.n != n_out:
                    raise ValueError("identity term dim mismatch")
                seg = np.eye(blk.size)
            elif term[0] == "scale":
                if blk.n != n_out:
                    raise ValueError("scale term dim mismatch")
                seg = float(term[1]) * np.eye(blk.size)
            elif term[0] == "op":
                out = term[1](_hermitian_basis(blk.n))
                if out.shape[1] != n_out:
                    raise ValueError("operator output dim mismatch")
                seg = bk.hvec_batch(out).T
            else:
                raise ValueError(f"unknown term {term[0]!r}")
            segs[name] = segs[name] + seg if name in segs else seg
        self._push_rows(segs, bk.hvec(rhs), tag, "matrix", n_out)

    def _push_rows(self, segs, rhs_vec, tag, kind, n_out):
        start = self._n_rows
        self._constraints.append((segs, rhs_vec))
        self._n_rows += rhs_vec.size
        if tag is not None:
            if tag in self._tags:
                raise ValueError(f"duplicate constraint tag {tag!r}")
            self._tags[tag] = (start, self._n_rows, kind, n_out)
        self._compiled = None

    def set_objective(self, sense: str, terms: dict, constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.sense = sense
        self._obj_terms = dict(terms)
        self._obj_const = float(constant)
        if self._compiled is not None:
            self._compiled.set_objective(sense, terms, constant)

    def _objective_vector(self) -> np.ndarray:
        c = np.zeros(self._n_total)
        for name, coeff in self._obj_terms.items():
            blk = self._block_by_name[name]
            c[blk.offset : blk.offset + blk.size] = self._coeff_segment(blk, coeff)
        return c

    # -- compile / solve ----------------------------------------------------

    def compile(self) -> "CompiledSdp":
        if self._compiled is None:
            self._compiled = CompiledSdp(self)
        return self._compiled

    def solve(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              warm=None, polish: bool = True) -> SdpSolution:
        return self.compile().solve(tol=tol, max_iter=max_iter, warm=warm,
                                    polish=polish)


class CompiledSdp:
    """Assembled constraint system with a cached affine projector."""

    def __init__(self, problem: SdpProblem):
        self._problem = problem
        self.blocks = list(problem.blocks)
        self.n = problem._n_total
        A = np.zeros((problem._n_rows, self.n))
        b = np.zeros(problem._n_rows)
        pos = 0
        for segs, rhs_vec in problem._constraints:
            nr = rhs_vec.size
            for name, seg in segs.items():
                blk = problem._block_by_name[name]
                A[pos : pos + nr, blk.offset : blk.offset + blk.size] = seg
            b[pos : pos + nr] = rhs_vec
            pos += nr
        # Ruiz equilibration: per-row scaling and one positive scalar per
        # block (uniform within a block so cone membership is untouched)
        self._rrow, self._ecol = _equilibrate(A, self.blocks)
        self.A = A * self._rrow[:, None] * self._ecol[None, :]
        self.b = b * self._rrow
        self._tags = dict(problem._tags)

        kinds = [_KIND_CODE[blk.kind] for blk in self.blocks]
        # free Hermitian blocks are no-ops in the cone projection, same as free
        kinds = [1 if k == 3 else k for k in kinds]
        dims = [blk.n for blk in self.blocks]
        offs = [blk.offset for blk in self.blocks]
        self.layout = bk.ConeLayout(kinds, dims, offs, self.n)

        if self.A.shape[0]:
            U, s, Vt = np.linalg.svd(self.A, full_matrices=False)
            rank = int(np.sum(s > max(s[0], 1e-30) * 1e-12))
            self._Ur = np.ascontiguousarray(U[:, :rank])
            self._sr = s[:rank]
            self._Vr = np.ascontiguousarray(Vt[:rank].T)
            self.P = self._Vr @ self._Vr.T
        else:
            self._Ur = np.zeros((0, 0))
            self._sr = np.zeros(0)
            self._Vr = np.zeros((self.n, 0))
            self.P = np.zeros((self.n, self.n))
        self._refresh_b()
        self.set_objective(problem.sense, problem._obj_terms, problem._obj_const)

    def _refresh_b(self):
        self.xb = self._Vr @ ((self._Ur.T @ self.b) / self._sr) if self._sr.size \
            else np.zeros(self.n)
        self._b_norm = float(np.linalg.norm(self.b / np.maximum(self._rrow, 1e-300)))
        self._b_inconsistency = float(
            np.linalg.norm(self.A @ self.xb - self.b)
        ) / (1.0 + float(np.linalg.norm(self.b)))

    # -- rebinding -----------------------------------------------------------

    def set_rhs(self, tag: str, value) -> None:
        start, end, kind, n_out = self._tags[tag]
        if kind == "scalar":
            seg = np.array([float(value)])
        else:
            seg = bk.hvec(require_hermitian(np.asarray(value, dtype=complex),
                                            atol=1e-9, what="rhs"))
        self.b[start:end] = seg * self._rrow[start:end]
        self._refresh_b()

    def set_objective(self, sense: str, terms: dict, constant: float = 0.0) -> None:
        self.sense = sense
        self._obj_terms = dict(terms)
        self._obj_const = float(constant)
        prob = self._problem
        prob.sense = sense
        prob._obj_terms = dict(terms)
        prob._obj_const = float(constant)
        c = prob._objective_vector()
        self._c_user = c
        self._c_norm = float(np.linalg.norm(c))
        cs = c * self._ecol
        self._c = cs if sense == "min" else -cs

    def _block_value(self, blk: _Block, vec: np.ndarray):
        seg = (self._ecol * vec)[blk.offset : blk.offset + blk.size]
        if blk.kind in ("psd", "herm"):
            return bk.unhvec(seg, blk.n)
        return seg.copy()

    def objective_at(self, vec: np.ndarray) -> float:
        """Objective at a scaled iterate (iterates live in scaled coords)."""
        return float(self._c_user @ (self._ecol * vec)) + self._obj_const

    # -- main loop -----------------------------------------------------------

    def solve(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              warm=None, polish: bool = True, rho0: float = 1.0) -> SdpSolution:
        n = self.n
        c = self._c
        c_scale = max(1.0, float(np.linalg.norm(c)))
        cs = c / c_scale

        if warm is not None:
            x, z, u, rho = (warm[0].copy(), warm[1].copy(), warm[2].copy(), warm[3])
        else:
            z = bk.project_cone(self.xb.copy(), self.layout)
            x = z.copy()
            u = np.zeros(n)
            rho = rho0

        if self._b_inconsistency > 1e-7:
            # equalities have no solution at all; no point iterating
            vals = {blk.name: self._block_value(blk, z) for blk in self.blocks}
            return SdpSolution(vals, self.objective_at(z), self._b_inconsistency,
                               np.inf, np.inf, 0, "infeasible", (x, z, u, rho))

        it = 0
        checks = 0
        next_attempt = 4
        rp = rd = gap = np.inf
        z_report = z
        while it < max_iter:
            chunk = min(CHECK_EVERY, max_iter - it)
            rp_cons, rd_cons = bk.admm_iterate(
                self.P, self.xb, cs, x, z, u, self.layout, rho, RELAX, chunk
            )
            it += chunk
            checks += 1
            rp, rd, gap, _, _ = self._residuals(z, u, rho, c_scale)
            z_report = z
            if max(rp, rd, gap) <= tol:
                break
            if polish and checks >= next_attempt and rp < 3e-2:
                # the active faces usually settle long before the iterates
                # certify; a least-squares refinement on both sides of the
                # detected faces finishes the job at machine precision
                pol = self._polish_pair(z, u, rho, c_scale)
                next_attempt = checks + min(next_attempt * 2, 400)
                if pol is not None and max(pol[1], pol[2], pol[3]) <= tol:
                    z_report, rp, rd, gap = pol
                    break
            if it % BALANCE_EVERY == 0:
                if rp_cons > 10.0 * rd_cons / rho and rho < RHO_MAX:
                    rho *= 2.0
                    u /= 2.0
                elif rd_cons / rho > 10.0 * rp_cons and rho > RHO_MIN:
                    rho /= 2.0
                    u *= 2.0
        else:
            if polish:
                pol = self._polish_pair(z, u, rho, c_scale)
                if pol is not None and max(pol[1], pol[2], pol[3]) <= max(rp, rd, gap):
                    z_report, rp, rd, gap = pol

        if max(rp, rd, gap) <= tol:
            status = "optimal"
        elif rp > 1e-3:
            status = "infeasible"
        else:
            status = "max_iter"

        vals = {blk.name: self._block_value(blk, z_report) for blk in self.blocks}
        return SdpSolution(vals, self.objective_at(z_report), rp, rd, gap, it,
                           status, (x, z, u, rho))

    def _residuals(self, z, u, rho, c_scale):
        """Honest residuals in unscaled units.

        z is cone-feasible and s = -rho*u is dual cone-feasible with
        <s, z> = 0 exactly (projection identities), so the only violations
        are the affine one, the dual equality, and the objective gap; all
        three are unscaled through the equilibration diagonals.
        """
        rz = self.A @ z - self.b if self.A.shape[0] else np.zeros(0)
        rp = float(np.linalg.norm(rz / np.maximum(self._rrow, 1e-300)))
        rp /= 1.0 + self._b_norm
        s = -(rho * c_scale) * u
        cms = self._c - s
        if self._sr.size:
            y = self._Ur @ ((self._Vr.T @ cms) / self._sr)
            rdvec = cms - self.A.T @ y
            dobj = float(self.b @ y)
        else:
            rdvec = cms
            dobj = 0.0
        rd = float(np.linalg.norm(rdvec / self._ecol)) / (1.0 + self._c_norm)
        pobj = float(self._c @ z)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, rd, gap, pobj, dobj

    def _faces(self, z):
        """Active-face data per block from the current cone iterate."""
        faces = []
        for blk in self.blocks:
            sl = slice(blk.offset, blk.offset + blk.size)
            if blk.kind in ("herm", "free"):
                faces.append(("full", None))
            elif blk.kind == "nonneg":
                seg = z[sl]
                active = seg > 1e-8 * max(1.0, float(seg.max(initial=0.0)))
                faces.append(("nonneg", active))
            else:
                H = bk.unhvec(z[sl], blk.n)
                w, V = np.linalg.eigh(H)
                keep = w > max(1e-8, 1e-6 * float(w[-1]))
                faces.append(("psd", (V[:, keep], V[:, ~keep])))
        return faces

    def _polish(self, z, faces=None):
        """Least-squares refinement on the face spanned by the converged iterate.

        Keeps each PSD block inside the span of its significant eigenvectors
        (and each nonneg coordinate at 0 if inactive), then removes the affine
        residual by a minimum-norm correction within that face.
        """
        faces = faces if faces is not None else self._faces(z)
        cols = []
        base = np.zeros(self.n)
        for blk, (kind, fc) in zip(self.blocks, faces):
            sl = slice(blk.offset, blk.offset + blk.size)
            if kind == "full":
                seg_cols = np.zeros((self.n, blk.size))
                seg_cols[sl] = np.eye(blk.size)
                cols.append(seg_cols)
                base[sl] = z[sl]
            elif kind == "nonneg":
                idx = np.where(fc)[0]
                seg_cols = np.zeros((self.n, idx.size))
                for j, i in enumerate(idx):
                    seg_cols[blk.offset + i, j] = 1.0
                cols.append(seg_cols)
                base[sl][fc] = z[sl][fc]
            else:
                Vf = fc[0]
                r = Vf.shape[1]
                if r:
                    H = bk.unhvec(z[sl], blk.n)
                    small = _hermitian_basis(r)
                    lifted = np.einsum("ai,kij,bj->kab", Vf, small, Vf.conj())
                    cols.append(self._place(bk.hvec_batch(lifted), blk))
                    base[sl] = bk.hvec(Vf @ (Vf.conj().T @ H @ Vf) @ Vf.conj().T)
        if not cols:
            return None
        M = np.hstack(cols)
        res = self.b - self.A @ base
        try:
            ds, *_ = np.linalg.lstsq(self.A @ M, res, rcond=None)
        except np.linalg.LinAlgError:
            return None
        cand = base + M @ ds
        if bk.min_eig_blocks(cand, self.layout) < -1e-9:
            return None
        return cand

    def _place(self, seg_rows: np.ndarray, blk: _Block) -> np.ndarray:
        out = np.zeros((self.n, seg_rows.shape[0]))
        out[blk.offset : blk.offset + blk.size] = seg_rows.T
        return out

    def _polish_dual(self, faces):
        """Best dual pair supported on the complementary faces.

        The dual equality A'y + s = c is solved in least squares with s
        restricted to the complementary-face subspace; y is eliminated
        analytically (range(A') is spanned by the cached right singular
        vectors), leaving one small least-squares problem in the face
        coordinates, followed by a PSD clip per block.
        """
        cols = []
        spans = []
        for blk, (kind, fc) in zip(self.blocks, faces):
            if kind == "nonneg":
                idx = np.where(~fc)[0]
                seg_cols = np.zeros((self.n, idx.size))
                for j, i in enumerate(idx):
                    seg_cols[blk.offset + i, j] = 1.0
                cols.append(seg_cols)
                spans.append((blk, kind, idx))
            elif kind == "psd":
                Wc = fc[1]
                rc = Wc.shape[1]
                if rc:
                    small = _hermitian_basis(rc)
                    lifted = np.einsum("ai,kij,bj->kab", Wc, small, Wc.conj())
                    cols.append(self._place(bk.hvec_batch(lifted), blk))
                    spans.append((blk, kind, Wc))
        if cols:
            m_t = np.hstack(cols)
            resid_map = m_t - self._Vr @ (self._Vr.T @ m_t)
            rhs = self._c - self._Vr @ (self._Vr.T @ self._c)
            try:
                t, *_ = np.linalg.lstsq(resid_map, rhs, rcond=None)
            except np.linalg.LinAlgError:
                return None
            s = m_t @ t
        else:
            s = np.zeros(self.n)
        # clip each face component into the cone
        for blk, (kind, fc) in zip(self.blocks, faces):
            sl = slice(blk.offset, blk.offset + blk.size)
            if kind == "nonneg":
                s[sl] = np.maximum(s[sl], 0.0)
            elif kind == "psd" and fc[1].shape[1]:
                R = bk.unhvec(s[sl], blk.n)
                w, V = np.linalg.eigh(R)
                s[sl] = bk.hvec((V * np.maximum(w, 0.0)) @ V.conj().T)
        cms = self._c - s
        y = self._Ur @ ((self._Vr.T @ cms) / self._sr)
        return y, s

    def _polish_pair(self, z, u, rho, c_scale):
        """Certified (primal, dual) refinement; returns (z, rp, rd, gap) or None."""
        if not self._sr.size:
            return None
        faces = self._faces(z)
        z_pol = self._polish(z, faces)
        if z_pol is None:
            return None
        pair = self._polish_dual(faces)
        if pair is None:
            return None
        y, s = pair
        rz = self.A @ z_pol - self.b
        rp = float(np.linalg.norm(rz / np.maximum(self._rrow, 1e-300)))
        rp /= 1.0 + self._b_norm
        rdvec = (self._c - s) - self.A.T @ y
        rd = float(np.linalg.norm(rdvec / self._ecol)) / (1.0 + self._c_norm)
        pobj = float(self._c @ z_pol)
        dobj = float(self.b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        # complementarity of the polished pair is structural (disjoint faces)
        return z_pol, rp, rd, gap


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, polish: bool = True) -> SdpSolution:
    """One-shot convenience wrapper around :meth:`SdpProblem.solve`."""
    return problem.solve(tol=tol, max_iter=max_iter, polish=polish)


def dump_problem(problem: SdpProblem, path) -> None:
    """Write the assembled (A, b, c, cones) in an SDPA-sparse-like text form.

    For offline cross-checking against external solvers; never read back at
    runtime.  Coordinates refer to the isometric Hermitian vectorisation
    documented in :mod:`procap._backend`.
    """
    comp = problem.compile()
    a_raw = comp.A / comp._rrow[:, None] / comp._ecol[None, :]
    b_raw = comp.b / comp._rrow
    with open(path, "w") as fh:
        fh.write(f'* procap sdp dump "{problem.name}"\n')
        fh.write(f"{a_raw.shape[0]} = mDIM\n{len(comp.blocks)} = nBLOCK\n")
        struct = " ".join(
            (str(blk.n) if blk.kind == "psd" else str(-blk.size))
            for blk in comp.blocks
        )
        fh.write(struct + " = bLOCKsTRUCT\n")
        fh.write(" ".join(repr(v) for v in b_raw) + "\n")
        c = comp._c_user
        for i, v in enumerate(c):
            if v != 0.0:
                fh.write(f"0 {i} {v!r}\n")
        rows, colsn = np.nonzero(a_raw)
        for r, cc in zip(rows, colsn):
            fh.write(f"{r + 1} {cc} {a_raw[r, cc]!r}\n")
