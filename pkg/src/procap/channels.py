"""Quantum process representations and synthetic noise models.

A process is carried either as a Kraus operator set or as a process matrix
(chi) over an explicit operator basis.  Conventions, fixed once here and
relied on everywhere else:

* The computational operator basis on a d-dimensional system is the dyad
  family ``E_j = |q><p|`` with ``j = p*d + q`` (input index p major).  In
  this basis the unnormalised chi matrix coincides entry-for-entry with the
  input-first Choi matrix ``sum_{p,r} |p><r| (x) E(|p><r|)``, so
  ``E(rho) = Tr_1[(rho^T (x) 1) chi]`` holds with no prefactor and
  ``Tr chi = d`` for trace-preserving maps.
* Trace-preservation reads ``Tr_2 chi = 1`` (partial trace over the output
  factor); trace-nonincreasing maps satisfy the operator inequality instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionError,
    dagger,
    hermitize,
    kron,
    min_eigenvalue,
    partial_trace,
    project_psd,
    require_hermitian,
)

TP = "tp"
TNI = "tni"

PSD_SLACK = 1e-9
COMPLETENESS_ATOL = 1e-10


def _ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


# ---------------------------------------------------------------------------
# operator bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorBasis:
    """Orthonormal (Hilbert-Schmidt) family of operators on a d-dim system.

    ``elements`` has shape (M, d, d); M = d*d for a full basis or k*k for a
    target-adapted sub-basis.  Target-adapted bases remember the preparation
    and ideal-output state families they were built from.
    """

    dim: int
    elements: np.ndarray
    tag: str
    x_states: np.ndarray | None = None      # (d, k) columns
    y_states: np.ndarray | None = None

    def __post_init__(self):
        g = np.einsum("iab,jab->ij", self.elements.conj(), self.elements)
        if np.max(np.abs(g - np.eye(len(self.elements)))) > 1e-12:
            raise ValueError("operator basis is not orthonormal")

    def __len__(self) -> int:
        return self.elements.shape[0]

    @staticmethod
    def computational(d: int) -> "OperatorBasis":
        els = np.zeros((d * d, d, d), dtype=complex)
        for p in range(d):
            for q in range(d):
                els[p * d + q, q, p] = 1.0
        return OperatorBasis(d, els, "computational")

    @staticmethod
    def target_adapted(target: "TargetOperation") -> "OperatorBasis":
        """Dyads |q_y><p_x| over the target's initial/final state families."""
        d, k = target.initial_basis.shape
        els = np.zeros((k * k, d, d), dtype=complex)
        for p in range(k):
            for q in range(k):
                els[p * k + q] = np.outer(
                    target.final_basis[:, q], target.initial_basis[:, p].conj()
                )
        return OperatorBasis(d, els, "target-adapted",
                             x_states=target.initial_basis,
                             y_states=target.final_basis)


# ---------------------------------------------------------------------------
# Kraus sets and process matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KrausSet:
    dim_in: int
    operators: tuple

    def __post_init__(self):
        acc = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for a in self.operators:
            if a.shape != (self.dim_in, self.dim_in):
                raise DimensionError("Kraus operator shape mismatch")
            acc += dagger(a) @ a
        excess = min_eigenvalue(np.eye(self.dim_in) - acc)
        if excess < -COMPLETENESS_ATOL:
            raise ValueError(
                f"Kraus completeness violated: sum A†A exceeds 1 by {-excess:.2e}"
            )
        object.__setattr__(self, "_completeness", acc)

    @property
    def trace_preserving(self) -> bool:
        return bool(
            np.max(np.abs(self._completeness - np.eye(self.dim_in)))
            <= COMPLETENESS_ATOL
        )

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(rho, dtype=complex))
        for a in self.operators:
            out += a @ rho @ dagger(a)
        return out


@dataclass
class ProcessMatrix:
    basis: OperatorBasis
    chi: np.ndarray
    tp_mode: str = TP

    def __post_init__(self):
        self.chi = require_hermitian(self.chi, atol=1e-9, what="chi")
        if self.chi.shape[0] != len(self.basis):
            raise DimensionError("chi dimension does not match basis size")
        if min_eigenvalue(self.chi) < -PSD_SLACK:
            raise ValueError("chi has an eigenvalue below -1e-9")
        if self.tp_mode not in (TP, TNI):
            raise ValueError(f"unknown tp_mode {self.tp_mode!r}")
        d = self.basis.dim
        if self.basis.tag == "computational":
            red = partial_trace(self.chi, (d, d), which=1)
            if self.tp_mode == TP:
                if np.max(np.abs(red - np.eye(d))) > 1e-8:
                    raise ValueError("chi is not trace-preserving")
            elif min_eigenvalue(np.eye(d) - red) < -1e-8:
                raise ValueError("chi exceeds trace-nonincreasing bound")

    @property
    def dim(self) -> int:
        return self.basis.dim

    @classmethod
    def _raw(cls, basis, chi, tp_mode) -> "ProcessMatrix":
        """Construct without physicality checks (basis compressions etc.)."""
        out = cls.__new__(cls)
        out.basis = basis
        out.chi = chi
        out.tp_mode = tp_mode
        return out


def kraus_to_chi(k: KrausSet, basis: OperatorBasis) -> ProcessMatrix:
    """Expand each Kraus operator in the basis and accumulate chi = a a†."""
    if basis.dim != k.dim_in:
        raise DimensionError("basis dim does not match Kraus dim")
    a = np.einsum("mab,kab->km", basis.elements.conj(), np.stack(k.operators))
    chi = np.einsum("km,kn->mn", a, a.conj())
    mode = TP if k.trace_preserving else TNI
    return ProcessMatrix(basis, hermitize(chi), mode)


def apply_process(p: ProcessMatrix, rho: np.ndarray) -> np.ndarray:
    """Channel action sum_{mn} chi_mn E_m rho E_n†."""
    rho = np.asarray(rho, dtype=complex)
    d = p.dim
    if rho.shape != (d, d):
        raise DimensionError("state dimension mismatch")
    if p.basis.tag == "computational":
        t = p.chi.reshape(d, d, d, d)
        return np.einsum("pr,pqrs->qs", rho, t)
    e = p.basis.elements
    return np.einsum("mn,mab,bc,ndc->ad", p.chi, e, rho, e.conj())


def choi_apply(chi_comp: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Channel action d * Tr_1[(rho^T (x) 1) chi] for a trace-one-normalised
    chi in the computational dyad basis (i.e. chi of a TP map divided by d)."""
    chi_comp = np.asarray(chi_comp)
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    if chi_comp.shape != (d * d, d * d):
        raise DimensionError("chi/state dimension mismatch")
    t = chi_comp.reshape(d, d, d, d)
    return d * np.einsum("pr,pqrs->qs", rho, t)


def convert_basis(p: ProcessMatrix, new_basis: OperatorBasis) -> ProcessMatrix:
    """Re-express chi in another orthonormal operator basis.

    For a full basis this is a unitary congruence (eigenvalues preserved);
    for a target-adapted sub-basis it is the compression onto that operator
    subspace, which is exactly what the two transition matrices probe.
    """
    if new_basis.dim != p.dim:
        raise DimensionError("basis dimension mismatch")
    u = np.einsum("jab,iab->ji", p.basis.elements.conj(), new_basis.elements)
    chi = dagger(u) @ p.chi @ u
    chi = hermitize(chi)
    if min_eigenvalue(chi) < 0.0:
        chi = project_psd(chi)
    return ProcessMatrix._raw(new_basis, chi, p.tp_mode)


def incoherent_part(p: ProcessMatrix) -> ProcessMatrix:
    """Drop all off-diagonal chi entries (target-adapted basis required).

    The result reproduces the same direct-setting transition matrix while
    destroying every interference term the complementary setting is
    sensitive to.
    """
    if p.basis.tag != "target-adapted":
        raise ValueError("incoherent_part requires a target-adapted basis")
    chi = np.diag(np.diag(p.chi).real).astype(complex)
    return ProcessMatrix._raw(p.basis, chi, p.tp_mode)


# ---------------------------------------------------------------------------
# target operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetOperation:
    """Ideal operation: a partial isometry with named initial/final bases."""

    name: str
    kraus: np.ndarray              # (d, d) single operator
    initial_basis: np.ndarray      # (d, k) columns spanning the initial space
    final_basis: np.ndarray        # (d, k) columns, final_basis = S @ initial

    def __post_init__(self):
        s = self.kraus
        proj = dagger(s) @ s
        if np.max(np.abs(proj @ proj - proj)) > 1e-10:
            raise ValueError("kraus operator is not a partial isometry")
        mapped = s @ self.initial_basis
        if np.max(np.abs(mapped - self.final_basis)) > 1e-10:
            raise ValueError("final basis is not the image of the initial basis")

    @property
    def dim(self) -> int:
        return self.kraus.shape[0]

    @property
    def subspace_dim(self) -> int:
        return self.initial_basis.shape[1]

    @property
    def is_unitary(self) -> bool:
        return self.subspace_dim == self.dim

    def ideal_kraus_set(self) -> KrausSet:
        return KrausSet(self.dim, (self.kraus,))

    def ideal_chi(self, basis: OperatorBasis | None = None) -> ProcessMatrix:
        basis = basis or OperatorBasis.computational(self.dim)
        return kraus_to_chi(self.ideal_kraus_set(), basis)


def builtin_cnot() -> TargetOperation:
    s = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]]
    comp = np.eye(4, dtype=complex)
    return TargetOperation("cnot", s, comp, s @ comp)


def builtin_fusion() -> TargetOperation:
    """Two-photon fusion: coherent projection onto span{|00>, |11>}."""
    s = np.zeros((4, 4), dtype=complex)
    s[0, 0] = 1.0
    s[3, 3] = 1.0
    init = np.stack([_ket(4, 0), _ket(4, 3)], axis=1)
    return TargetOperation("fusion", s, init, s @ init)


def identity_target(d: int) -> TargetOperation:
    eye = np.eye(d, dtype=complex)
    return TargetOperation("identity", eye, eye, eye)


def builtin_target(name: str) -> TargetOperation:
    try:
        return {"cnot": builtin_cnot, "fusion": builtin_fusion}[name]()
    except KeyError:
        raise ValueError(f"unknown builtin target {name!r}") from None


# ---------------------------------------------------------------------------
# noise models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """One noise channel applied after the target operation.

    kinds: "none", "depolarizing" (global, strength p), "dephasing" and
    "amplitude_damping" (per qubit), or "composite" (sequence).
    """

    kind: str
    param: float = 0.0
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "depolarizing", "dephasing",
                             "amplitude_damping", "composite"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind not in ("none", "composite") and not 0.0 <= self.param <= 1.0:
            raise ValueError(f"noise parameter must be in [0, 1], got {self.param}")

    @staticmethod
    def parse(text: str) -> "NoiseSpec":
        """Parse e.g. "none", "depolarizing:0.05", "dephasing:0.1+depolarizing:0.02"."""
        text = text.strip()
        if text in ("", "none"):
            return NoiseSpec("none")
        parts = []
        for piece in text.split("+"):
            kind, _, val = piece.partition(":")
            parts.append(NoiseSpec(kind.strip(), float(val) if val else 0.0))
        if len(parts) == 1:
            return parts[0]
        return NoiseSpec("composite", parts=tuple(parts))

    def label(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "composite":
            return "+".join(p.label() for p in self.parts)
        return f"{self.kind}:{self.param:g}"


def _qubit_noise_ops(kind: str, p: float) -> list[np.ndarray]:
    if kind == "dephasing":
        return [
            np.sqrt(1.0 - p) * np.eye(2, dtype=complex),
            np.sqrt(p) * np.diag([1.0, 0.0]).astype(complex),
            np.sqrt(p) * np.diag([0.0, 1.0]).astype(complex),
        ]
    if kind == "amplitude_damping":
        k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex)
        k1 = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex)
        return [k0, k1]
    raise ValueError(kind)


def noise_kraus_ops(noise: NoiseSpec, d: int) -> list[np.ndarray]:
    """Kraus operators of the noise channel alone, on dimension d."""
    if noise.kind == "none":
        return [np.eye(d, dtype=complex)]
    if noise.kind == "depolarizing":
        p = noise.param
        ops = [np.sqrt(1.0 - p) * np.eye(d, dtype=complex)]
        if p > 0.0:
            w = np.sqrt(p / d)
            for i in range(d):
                for j in range(d):
                    m = np.zeros((d, d), dtype=complex)
                    m[i, j] = w
                    ops.append(m)
        return ops
    if noise.kind == "composite":
        ops = [np.eye(d, dtype=complex)]
        for part in noise.parts:
            ops = [b @ a for a in ops for b in noise_kraus_ops(part, d)]
        return ops
    # per-qubit channels
    n_qubits = int(round(np.log2(d)))
    if 2**n_qubits != d:
        raise DimensionError(f"{noise.kind} noise needs a qubit register, d={d}")
    single = _qubit_noise_ops(noise.kind, noise.param)
    ops = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        ops = [kron(a, s) for a in ops for s in single]
    return ops


def make_noisy(target: TargetOperation, noise: NoiseSpec) -> KrausSet:
    """Noise composed after the target: Kraus set {N_i S}."""
    s = target.kraus
    ops = [n @ s for n in noise_kraus_ops(noise, target.dim)]
    ops = [o for o in ops if np.max(np.abs(o)) > 1e-300]
    return KrausSet(target.dim, tuple(ops))


def random_channel(d: int, seed: int, depol: float = 0.1) -> KrausSet:
    """Haar-random unitary mixed with depolarizing noise (test oracle family)."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    ops = [np.sqrt(1.0 - depol) * u]
    if depol > 0.0:
        w = np.sqrt(depol / d)
        for i in range(d):
            for j in range(d):
                m = np.zeros((d, d), dtype=complex)
                m[i, j] = w
                ops.append(m)
    return KrausSet(d, tuple(ops))


# ---------------------------------------------------------------------------
# chi-v1 file format
# ---------------------------------------------------------------------------


def chi_to_json(p: ProcessMatrix) -> dict:
    entries = [[z.real, z.imag] for z in p.chi.ravel()]
    return {
        "format": "chi-v1",
        "dim": int(p.chi.shape[0]),
        "basis_tag": p.basis.tag,
        "tp_mode": p.tp_mode,
        "entries": entries,
    }


def chi_from_json(doc: dict, basis: OperatorBasis | None = None) -> ProcessMatrix:
    if doc.get("format") != "chi-v1":
        raise ValueError("not a chi-v1 document")
    n = int(doc["dim"])
    flat = np.array([complex(re, im) for re, im in doc["entries"]])
    chi = flat.reshape(n, n)
    if basis is None:
        if doc["basis_tag"] != "computational":
            raise ValueError(
                "chi-v1 payloads in a non-computational basis need the basis object"
            )
        d = int(round(np.sqrt(n)))
        basis = OperatorBasis.computational(d)
    return ProcessMatrix(basis, chi, doc["tp_mode"])


def save_chi(p: ProcessMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(chi_to_json(p), fh, sort_keys=True)
        fh.write("\n")


def load_chi(path, basis: OperatorBasis | None = None) -> ProcessMatrix:
    with open(path) as fh:
        return chi_from_json(json.load(fh), basis)
