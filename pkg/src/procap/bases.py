"""Preparation/measurement basis families and the experimental-settings planner.

Two complementary-basis constructions are provided: the cyclic discrete-
Fourier family (the natural choice on a k-dimensional target subspace, e.g.
the Bell pair over the fusion subspace), and the per-qubit Hadamard family
(the X...X product basis, mutually unbiased with the computational basis and
realisable in a single Pauli setting).

Settings are counted in Pauli units: a setting is an assignment of one
non-identity Pauli letter per addressed qubit, identity factors acting as
wildcards.  Preparation or measurement of entangled basis states is expanded
through the Pauli decomposition of their projectors.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .channels import TargetOperation
from .linalg import kron, require_hermitian

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit eigenvectors, index 0 -> eigenvalue +1, index 1 -> -1
_EIGVECS = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def pauli_matrix(string: str) -> np.ndarray:
    m = np.eye(1, dtype=complex)
    for ch in string:
        m = kron(m, PAULI[ch])
    return m


def pauli_strings(n_qubits: int, letters: str = "XYZ") -> list[str]:
    strings = [""]
    for _ in range(n_qubits):
        strings = [s + ch for s in strings for ch in letters]
    return strings


def pauli_eigenbasis(string: str) -> tuple[np.ndarray, np.ndarray]:
    """Joint eigenbasis of a non-identity Pauli string.

    Returns (states, signs): states is (d, d) with columns indexed by the
    outcome bitstring (bit b_i = 1 means qubit i in the -1 eigenstate), and
    signs[j] is the product eigenvalue of column j.
    """
    states = np.eye(1, dtype=complex)
    for ch in string:
        states = kron(states, _EIGVECS[ch])
    d = states.shape[0]
    signs = np.ones(d)
    n = len(string)
    for j in range(d):
        bits = [(j >> (n - 1 - i)) & 1 for i in range(n)]
        signs[j] = (-1) ** sum(bits)
    return states, signs


def pauli_decompose(projector: np.ndarray, tol: float = 1e-12) -> list[tuple[str, float]]:
    """Exact expansion of a Hermitian operator over the N-qubit Pauli basis.

    Returns the nonzero (string, coefficient) pairs; coefficients are real
    and reconstruct the input to within 1e-12.
    """
    m = require_hermitian(projector, atol=1e-10, what="pauli_decompose input")
    d = m.shape[0]
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError("operator dimension is not a power of two")
    out = []
    for s in pauli_strings(n, "IXYZ"):
        c = np.trace(pauli_matrix(s) @ m).real / d
        if abs(c) > tol:
            out.append((s, float(c)))
    return out


# ---------------------------------------------------------------------------
# basis families
# ---------------------------------------------------------------------------


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(v) > 1e-12))
    ph = v[idx] / abs(v[idx])
    return v / ph


@dataclass(frozen=True)
class BasisFamily:
    """k orthonormal states in a d-dimensional ambient space."""

    label: str
    states: np.ndarray                # (d, k) columns

    def __post_init__(self):
        g = self.states.conj().T @ self.states
        if np.max(np.abs(g - np.eye(self.k))) > 1e-12:
            raise ValueError("basis family is not orthonormal")

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def k(self) -> int:
        return self.states.shape[1]

    def state(self, m: int) -> np.ndarray:
        return self.states[:, m]

    def projector(self, m: int) -> np.ndarray:
        v = self.states[:, m]
        return np.outer(v, v.conj())


def computational_family(d: int, label: str = "x") -> BasisFamily:
    return BasisFamily(label, np.eye(d, dtype=complex))


def family_from_target(target: TargetOperation, side: str) -> BasisFamily:
    if side == "x":
        return BasisFamily("x", target.initial_basis)
    if side == "y":
        return BasisFamily("y", target.final_basis)
    raise ValueError(side)


def fourier_basis(base: BasisFamily, label: str | None = None) -> BasisFamily:
    """Cyclic discrete-Fourier complement of a k-state family.

    New states are (1/sqrt k) sum_j w^{-jm} |j>, w = exp(2 pi i / k); every
    pair of old/new states overlaps with squared modulus 1/k.  Global phases
    are fixed by making the first significant amplitude real positive.
    """
    k = base.k
    j = np.arange(k)
    w = np.exp(-2j * np.pi * np.outer(j, j) / k) / np.sqrt(k)
    states = base.states @ w
    states = np.stack([_canonical_phase(states[:, m]) for m in range(k)], axis=1)
    if label is None:
        label = {"x": "u", "y": "v"}.get(base.label, base.label + "_f")
    return BasisFamily(label, states)


def hadamard_basis(base: BasisFamily, label: str | None = None) -> BasisFamily:
    """Per-qubit Hadamard complement of a full computational-type family."""
    d = base.dim
    n = int(round(np.log2(d)))
    if 2**n != d or base.k != d:
        raise ValueError("per-qubit complement needs a full qubit-register basis")
    h = np.eye(1, dtype=complex)
    for _ in range(n):
        h = kron(h, _EIGVECS["X"])
    states = base.states @ h
    states = np.stack([_canonical_phase(states[:, m]) for m in range(d)], axis=1)
    if label is None:
        label = {"x": "u", "y": "v"}.get(base.label, base.label + "_h")
    return BasisFamily(label, states)


def _is_computational(family: BasisFamily) -> bool:
    """True when every state is a standard basis vector (up to phase)."""
    if family.k != family.dim:
        return False
    a = np.abs(family.states)
    return bool(np.max(np.abs(a - np.round(a))) < 1e-12)


def complementary_family(base: BasisFamily, label: str | None = None) -> BasisFamily:
    """Default complement: per-qubit Hadamard family for a full computational
    register, cyclic Fourier on the subspace otherwise."""
    if _is_computational(base):
        return hadamard_basis(base, label)
    return fourier_basis(base, label)


def aoqpt_families(target: TargetOperation):
    """The four families (x, y, u, v) used by the two-setting scheme."""
    x = family_from_target(target, "x")
    y = family_from_target(target, "y")
    u = complementary_family(x, "u")
    v = BasisFamily("v", np.stack(
        [_canonical_phase(target.kraus @ u.state(m)) for m in range(u.k)], axis=1
    ))
    return x, y, u, v


# ---------------------------------------------------------------------------
# settings planning
# ---------------------------------------------------------------------------

SQPT = "SQPT"
AOQPT = "AOQPT"


def _strings_of_family(family: BasisFamily) -> list[str]:
    """Merged non-identity Pauli strings needed to prepare or measure every
    state of the family (identity letters act as wildcards)."""
    n = int(round(np.log2(family.dim)))
    raw: list[str] = []
    for m in range(family.k):
        for s, _ in pauli_decompose(family.projector(m)):
            if set(s) != {"I"} and s not in raw:
                raw.append(s)
    merged: list[str] = []
    for s in sorted(raw):
        for i, t in enumerate(merged):
            if all(a == "I" or b == "I" or a == b for a, b in zip(s, t)):
                merged[i] = "".join(
                    b if a == "I" else a for a, b in zip(s, t)
                )
                break
        else:
            merged.append(s)
    return ["".join(ch if ch != "I" else "Z" for ch in s) for s in merged]


@dataclass(frozen=True)
class SettingsPlan:
    n_qubits: int
    scheme: str
    pauli_settings: tuple            # ((prep_string, meas_string), ...)
    n_xy: int                        # leading settings feeding the direct matrix
    families: tuple = ()             # (x, y, u, v) for AOQPT plans

    @property
    def total(self) -> int:
        return len(self.pauli_settings)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,prep_string,meas_string\n")
        for i, (p, q) in enumerate(self.pauli_settings):
            buf.write(f"{i},{p},{q}\n")
        return buf.getvalue()


def plan_settings(target: TargetOperation, scheme: str) -> SettingsPlan:
    """Enumerate the Pauli experimental settings a scheme needs.

    Full process tomography uses every (prep, meas) pair of {X,Y,Z} strings,
    3^(2N) in total.  The two-setting scheme needs one group of settings per
    transition matrix; groups are de-duplicated internally but kept separate
    between the two matrices, which is the counting the headline reduction
    figures use.
    """
    n = int(round(np.log2(target.dim)))
    if 2**n != target.dim:
        raise ValueError("settings planning needs a qubit register")
    if scheme == SQPT:
        strings = pauli_strings(n)
        pairs = tuple((p, q) for p in strings for q in strings)
        return SettingsPlan(n, SQPT, pairs, n_xy=len(pairs))
    if scheme != AOQPT:
        raise ValueError(f"unknown scheme {scheme!r}")
    x, y, u, v = aoqpt_families(target)
    xy = tuple((p, q) for p in _strings_of_family(x) for q in _strings_of_family(y))
    uv = tuple((p, q) for p in _strings_of_family(u) for q in _strings_of_family(v))
    return SettingsPlan(n, AOQPT, xy + uv, n_xy=len(xy), families=(x, y, u, v))
