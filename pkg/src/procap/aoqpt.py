"""Two-setting transition matrices and the decision-matrix feasible set.

The decision variable used by every bound computation is the *frame matrix*:
the input-restricted Choi matrix on C^k (x) C^d (input coordinates in the
target's initial basis, output in the computational basis), normalised by the
initial-subspace dimension k so that an ideal implementation has unit trace.
For unitary targets (k = d, computational initial basis) this is exactly the
computational-basis chi of :mod:`procap.channels` divided by d.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bases import (
    BasisFamily,
    aoqpt_families,
    fourier_basis,
    pauli_decompose,
    pauli_eigenbasis,
)
from .channels import (
    TNI,
    TP,
    OperatorBasis,
    ProcessMatrix,
    TargetOperation,
    apply_process,
)
from .linalg import DimensionError, kron, partial_trace

ROW_TOL = 1e-9


@dataclass(frozen=True)
class TransitionMatrix:
    """Stochastic matrix of Born probabilities between two basis families."""

    setting: str                  # "xy" | "uv"
    rows: np.ndarray              # (k, k), rows indexed by preparation
    trace_preserving: bool = True

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError("transition matrix must be square")
        if r.min() < -ROW_TOL or r.max() > 1.0 + ROW_TOL:
            raise ValueError("transition probabilities outside [0, 1]")
        sums = r.sum(axis=1)
        if sums.max() > 1.0 + ROW_TOL:
            raise ValueError("row sums exceed 1")
        if self.trace_preserving and np.max(np.abs(sums - 1.0)) > ROW_TOL:
            raise ValueError("row sums must equal 1 for a trace-preserving setting")

    @property
    def k(self) -> int:
        return self.rows.shape[0]


def transition_from_process(
    p: ProcessMatrix, setting: tuple[BasisFamily, BasisFamily]
) -> TransitionMatrix:
    """Exact Born-rule probabilities T[m, n] = <n| E(|m><m|) |n>."""
    prep, meas = setting
    if prep.dim != p.dim or meas.dim != p.dim:
        raise DimensionError("basis families do not match process dimension")
    if prep.k != meas.k:
        raise DimensionError("prep and meas families must share k")
    k = prep.k
    rows = np.empty((k, k))
    for m in range(k):
        out = apply_process(p, prep.projector(m))
        for n in range(k):
            rows[m, n] = float(np.real(np.vdot(meas.state(n), out @ meas.state(n))))
    label = "xy" if {prep.label, meas.label} <= {"x", "y"} else "uv"
    tp = bool(np.max(np.abs(rows.sum(axis=1) - 1.0)) <= ROW_TOL)
    return TransitionMatrix(label, np.clip(rows, 0.0, 1.0), trace_preserving=tp)


# ---------------------------------------------------------------------------
# chi identities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChiIdentityReport:
    direct_error: float        # |T_xy - diag identity| elementwise max
    fourier_error: float       # |T_uv - double Fourier sum| elementwise max
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return max(self.direct_error, self.fourier_error) <= self.tol


def verify_chi_identity(p: ProcessMatrix, tol: float = 1e-10) -> ChiIdentityReport:
    """Check both closed forms tying the transition matrices to chi entries.

    Requires a target-adapted basis.  The direct setting must reproduce the
    chi diagonal, and the complementary (cyclic Fourier) setting must equal
    the phase-weighted double sum over all chi entries; both are compared
    against honest Born-rule evaluation.
    """
    if p.basis.tag != "target-adapted" or p.basis.x_states is None:
        raise ValueError("verify_chi_identity needs a target-adapted basis")
    x = BasisFamily("x", p.basis.x_states)
    y = BasisFamily("y", p.basis.y_states)
    u = fourier_basis(x, "u")
    v = fourier_basis(y, "v")
    k = x.k
    t_xy = transition_from_process(p, (x, y)).rows
    t_uv = transition_from_process(p, (u, v)).rows

    chi4 = p.chi.reshape(k, k, k, k)
    pred_xy = np.einsum("pqpq->pq", chi4).real
    w = np.exp(-2j * np.pi * np.outer(np.arange(k), np.arange(k)) / k)
    pred_uv = np.einsum(
        "mp,mr,nq,ns,pqrs->mn", w, w.conj(), w.conj(), w, chi4
    ).real / k**2
    return ChiIdentityReport(
        float(np.max(np.abs(t_xy - pred_xy))),
        float(np.max(np.abs(t_uv - pred_uv))),
        tol,
    )


# ---------------------------------------------------------------------------
# estimated transition matrices
# ---------------------------------------------------------------------------


def _project_row(row: np.ndarray, tp: bool) -> np.ndarray:
    """Nearest point with entries >= 0 and row sum == 1 (tp) or <= 1."""
    if not tp:
        clipped = np.clip(row, 0.0, 1.0)
        if clipped.sum() <= 1.0:
            return clipped
    # Euclidean projection onto the probability simplex
    u = np.sort(row)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, row.size + 1)
    cond = u - css / idx > 0
    rho = int(idx[cond][-1])
    theta = css[rho - 1] / rho
    return np.maximum(row - theta, 0.0)


def transition_from_counts(
    freqs: np.ndarray, setting: str = "xy", tp: bool = True
) -> TransitionMatrix:
    """Physicalise a raw frequency table into a valid transition matrix.

    Rows are independently projected (Frobenius-nearest) onto the simplex
    (trace-preserving) or the sub-simplex with sum <= 1.  Idempotent on
    already-valid tables.
    """
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 2 or freqs.shape[0] != freqs.shape[1]:
        raise DimensionError("frequency table must be square")
    if tp and bool(np.any(np.all(freqs <= 0.0, axis=1))):
        raise ValueError("a preparation has no recorded data")
    rows = np.stack([_project_row(r, tp) for r in freqs])
    return TransitionMatrix(setting, rows, trace_preserving=tp)


def _pauli_weights(projector: np.ndarray) -> list[tuple[str, float]]:
    return pauli_decompose(projector)


def _setting_for(string: str, available: tuple[str, ...]) -> str:
    for s in available:
        if all(a == "I" or a == b for a, b in zip(string, s)):
            return s
    raise KeyError(f"no planned setting covers Pauli string {string}")


def _string_signs(string: str, n: int) -> np.ndarray:
    """Eigenvalue of the (possibly identity-padded) string on each outcome."""
    d = 2**n
    signs = np.ones(d)
    for j in range(d):
        s = 1.0
        for i, ch in enumerate(string):
            if ch != "I" and (j >> (n - 1 - i)) & 1:
                s = -s
        signs[j] = s
    return signs


def assemble_transition_table(records: dict, prep_family: BasisFamily,
                              meas_family: BasisFamily,
                              settings: tuple) -> np.ndarray:
    """Raw transition frequencies from per-setting Pauli data.

    ``records`` maps (prep_string, prep_index, meas_string) to outcome
    frequency vectors (length d, click outcomes only).  Both the prepared
    states and measured projectors are expanded over Pauli operators; each
    operator expectation is read from the planned setting covering it, so
    entangled basis states (e.g. Bell pairs) are assembled from the product
    settings actually run.
    """
    n = int(round(np.log2(prep_family.dim)))
    d = prep_family.dim
    preps = tuple(sorted({p for p, _ in settings}))
    meads = tuple(sorted({q for _, q in settings}))
    k = prep_family.k
    table = np.zeros((k, k))

    def op_moment(prep_string, prep_idx_weights, meas_op_string):
        """sum_j w_j * Tr[Q E(prep_j)] for one prepared-setting family."""
        qhat = _setting_for(meas_op_string, meads)
        signs = _string_signs(meas_op_string, n)
        acc = 0.0
        for j, wj in prep_idx_weights:
            freq = records[(prep_string, j, qhat)]
            acc += wj * float(signs @ freq)
        return acc

    for m in range(k):
        prep_terms = _pauli_weights(prep_family.projector(m))
        for nn in range(k):
            meas_terms = _pauli_weights(meas_family.projector(nn))
            val = 0.0
            for ps, pw in prep_terms:
                phat = _setting_for(ps, preps)
                psigns = _string_signs(ps, n)
                prep_idx_weights = [(j, pw * psigns[j]) for j in range(d)]
                for qs, qw in meas_terms:
                    # Tr[qs * E(ps)] assembled from eigenstate preparations
                    val += qw * op_moment(phat, prep_idx_weights, qs)
            table[m, nn] = val
    return table


# ---------------------------------------------------------------------------
# working frame and feasible set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorkFrame:
    """Input-restricted, k-normalised Choi frame for a target operation."""

    target: TargetOperation

    @property
    def k(self) -> int:
        return self.target.subspace_dim

    @property
    def d(self) -> int:
        return self.target.dim

    @property
    def dim(self) -> int:
        return self.k * self.d

    @property
    def vin(self) -> np.ndarray:
        return self.target.initial_basis

    def chi_frame(self, p: ProcessMatrix) -> np.ndarray:
        """Normalised frame matrix of a computational-basis process."""
        if p.basis.tag != "computational":
            p = _to_computational(p)
        w = kron(self.vin.T, np.eye(self.d))
        return (w @ p.chi @ w.conj().T) / self.k

    def ideal_chi_frame(self) -> np.ndarray:
        return self.chi_frame(self.target.ideal_chi())

    def trace_out_input(self, chif: np.ndarray) -> np.ndarray:
        return partial_trace(chif, (self.k, self.d), which=0)

    def trace_out_output(self, chif: np.ndarray) -> np.ndarray:
        return partial_trace(chif, (self.k, self.d), which=1)

    def frame_coords(self, state: np.ndarray) -> np.ndarray:
        return self.vin.conj().T @ state

    def apply_frame(self, chif: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Channel action k * Tr_1[(sigma^T (x) 1) chif] on a k-dim input."""
        t = chif.reshape(self.k, self.d, self.k, self.d)
        return self.k * np.einsum("pr,pqrs->qs", sigma, t)


def _to_computational(p: ProcessMatrix) -> ProcessMatrix:
    from .channels import convert_basis

    return convert_basis(p, OperatorBasis.computational(p.dim))


@dataclass(frozen=True)
class FeasibleSetSpec:
    """Affine description of all frame matrices consistent with the data.

    ``constraints`` lists (C, value) pairs with C Hermitian on the frame and
    the scalar equality Tr(C @ chif) = value; there are exactly 2 k^2 of
    them, one per transition-matrix entry.  PSD is implicit; the
    trace-preservation mode adds the matrix constraint on top.
    """

    target: TargetOperation
    t_xy: TransitionMatrix
    t_uv: TransitionMatrix
    tp_mode: str
    constraints: tuple = field(default=())
    frame: WorkFrame = None

    @staticmethod
    def build(t_xy, t_uv, target, tp_mode) -> "FeasibleSetSpec":
        return build_feasible_set(t_xy, t_uv, target, tp_mode)

    def residual(self, chif: np.ndarray) -> float:
        return max(
            abs(float(np.real(np.trace(c @ chif))) - v)
            for c, v in self.constraints
        )


def build_feasible_set(
    t_xy: TransitionMatrix,
    t_uv: TransitionMatrix,
    target: TargetOperation,
    tp_mode: str | None = None,
) -> FeasibleSetSpec:
    """Map the two transition matrices onto affine constraints on the frame.

    Each entry pins one Born probability of the decision process; the
    preparation state enters through its frame coordinates and the measured
    projector through the full output space.
    """
    if t_xy.k != t_uv.k:
        raise DimensionError("transition matrices disagree on k")
    k = target.subspace_dim
    if t_xy.k != k:
        raise DimensionError("transition matrices do not match the target subspace")
    if tp_mode is None:
        tp_mode = TP if target.is_unitary else TNI
    frame = WorkFrame(target)
    x, y, u, v = aoqpt_families(target)
    cons = []
    for tmat, prep, meas in ((t_xy, x, y), (t_uv, u, v)):
        for m in range(k):
            w = frame.frame_coords(prep.state(m))
            sigma = np.outer(w, w.conj())
            for n in range(k):
                pi = np.outer(meas.state(n), meas.state(n).conj())
                c = k * kron(sigma.conj(), pi)
                cons.append((c, float(tmat.rows[m, n])))
    return FeasibleSetSpec(target, t_xy, t_uv, tp_mode, tuple(cons), frame)


# ---------------------------------------------------------------------------
# tmat-v1 file format
# ---------------------------------------------------------------------------


def tmat_to_json(t: TransitionMatrix) -> dict:
    return {
        "format": "tmat-v1",
        "k": int(t.k),
        "setting": t.setting,
        "tp": bool(t.trace_preserving),
        "rows": [[float(x) for x in row] for row in t.rows],
    }


def tmat_from_json(doc: dict) -> TransitionMatrix:
    if doc.get("format") != "tmat-v1":
        raise ValueError("not a tmat-v1 document")
    rows = np.array(doc["rows"], dtype=float)
    if rows.shape != (doc["k"], doc["k"]):
        raise ValueError("tmat-v1 row shape mismatch")
    return TransitionMatrix(doc["setting"], rows, trace_preserving=doc.get("tp", True))


def save_tmat(t: TransitionMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(tmat_to_json(t), fh, sort_keys=True)
        fh.write("\n")


def load_tmat(path) -> TransitionMatrix:
    with open(path) as fh:
        return tmat_from_json(json.load(fh))
