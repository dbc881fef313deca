"""Standard process tomography on synthetic data.

The full pipeline is: sample (or exactly evaluate) Pauli-setting statistics,
rebuild every output state by Pauli readout, recombine the dyad-basis input
responses through the per-qubit four-state identity, extract the expansion
coefficients, invert the structure tensor to get the raw process matrix, and
finally project onto the physical (PSD + trace-condition) set.  Serves as the
independent reference that the two-setting bounds are validated against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bases import SettingsPlan, pauli_eigenbasis, pauli_matrix, pauli_strings
from .channels import (
    TNI,
    TP,
    KrausSet,
    OperatorBasis,
    ProcessMatrix,
    apply_process,
    hermitize,
)
from .linalg import DimensionError, partial_trace, project_psd, require_hermitian


@dataclass(frozen=True)
class SqptRecord:
    prep_string: str
    prep_index: int
    meas_string: str
    counts: np.ndarray          # length d+1; last column counts lost shots


@dataclass
class SqptDataset:
    """Per-setting outcome statistics plus the derived expansion coefficients.

    ``shots`` of None marks exact mode: ``counts`` then holds probabilities
    summing to 1 instead of integers summing to ``shots``.  ``lam`` is filled
    by the reconstruction step (or directly in exact mode).
    """

    n_qubits: int
    shots: int | None
    records: list
    seed: int | None = None
    lam: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def input_labels(self) -> list[str]:
        seen = []
        for r in self.records:
            lab = f"{r.prep_string}/{r.prep_index}"
            if lab not in seen:
                seen.append(lab)
        return seen

    def frequencies(self) -> dict:
        """(prep_string, prep_index, meas_string) -> click-outcome frequencies."""
        total = 1.0 if self.shots is None else float(self.shots)
        return {
            (r.prep_string, r.prep_index, r.meas_string): r.counts[:-1] / total
            for r in self.records
        }


def _apply(process, rho):
    if isinstance(process, KrausSet):
        return process.apply(rho)
    return apply_process(process, rho)


def simulate_counts(process, plan: SettingsPlan, shots: int | None,
                    seed: int | None = None) -> SqptDataset:
    """Sample multinomial outcome counts for every planned setting.

    Every eigenstate of each preparation setting is prepared; outcomes are
    the d projective results of the measurement setting plus an explicit
    no-click column absorbing any trace loss, so each record sums to
    ``shots``.  ``shots=None`` records exact probabilities.  Sampling is
    reproducible: record i uses the stream spawned from (seed, i).
    """
    if shots is not None:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        if seed is None:
            raise ValueError("finite-shot simulation requires a seed")
    d = 2**plan.n_qubits
    records = []
    idx = 0
    for prep_string, meas_string in plan.pauli_settings:
        prep_states, _ = pauli_eigenbasis(prep_string)
        meas_states, _ = pauli_eigenbasis(meas_string)
        for m in range(d):
            v = prep_states[:, m]
            out = _apply(process, np.outer(v, v.conj()))
            probs = np.real(np.einsum("id,de,ei->i",
                                      meas_states.conj().T, out, meas_states))
            probs = np.clip(probs, 0.0, 1.0)
            loss = max(0.0, 1.0 - probs.sum())
            full = np.append(probs, loss)
            if shots is None:
                counts = full
            else:
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(idx,))
                )
                counts = rng.multinomial(shots, full / full.sum()).astype(float)
            records.append(SqptRecord(prep_string, m, meas_string, counts))
            idx += 1
    return SqptDataset(plan.n_qubits, shots, records, seed=seed)


# ---------------------------------------------------------------------------
# output-state readout and dyad recombination
# ---------------------------------------------------------------------------


def _pauli_readout(freq_by_meas: dict, n: int) -> np.ndarray:
    """Reconstruct an (unnormalised) output operator from Pauli-basis counts.

    freq_by_meas maps each {X,Y,Z}^n measurement string to its d click
    frequencies; expectations of identity-padded strings are read from the
    setting that substitutes Z at identity positions.
    """
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    for s in pauli_strings(n, "IXYZ"):
        hat = s.replace("I", "Z")
        freq = freq_by_meas[hat]
        signs = np.ones(d)
        for j in range(d):
            sign = 1.0
            for i, ch in enumerate(s):
                if ch != "I" and (j >> (n - 1 - i)) & 1:
                    sign = -sign
            signs[j] = sign
        out += (float(signs @ freq) / d) * pauli_matrix(s)
    return out


_DYAD_COEFFS = {
    # single-qubit dyad |a><b| as weights over (letter, eigenstate index)
    (0, 0): {("Z", 0): 1.0},
    (1, 1): {("Z", 1): 1.0},
    (0, 1): {("X", 0): 1.0, ("Y", 0): 1.0j,
             ("Z", 0): -0.5 * (1 + 1j), ("Z", 1): -0.5 * (1 + 1j)},
    (1, 0): {("X", 0): 1.0, ("Y", 0): -1.0j,
             ("Z", 0): -0.5 * (1 - 1j), ("Z", 1): -0.5 * (1 - 1j)},
}


def _dyad_expansion(a: int, b: int, n: int) -> list[tuple[str, int, complex]]:
    """|a><b| on n qubits as a combination of prepared product eigenstates.

    Returns (prep_string, prep_index, weight) triples; the single-qubit
    four-state identity is tensored across qubits.
    """
    terms = [("", 0, 1.0 + 0.0j)]
    for i in range(n):
        ai = (a >> (n - 1 - i)) & 1
        bi = (b >> (n - 1 - i)) & 1
        new = []
        for string, idx, w in terms:
            for (letter, e), c in _DYAD_COEFFS[(ai, bi)].items():
                new.append((string + letter, (idx << 1) | e, w * c))
        terms = new
    return terms


def reconstructed_outputs(data: SqptDataset) -> dict:
    """E(prepared state) for every prepared product eigenstate."""
    n = data.n_qubits
    freqs = data.frequencies()
    by_prep: dict = {}
    for (p, m, q), f in freqs.items():
        by_prep.setdefault((p, m), {})[q] = f
    return {
        key: _pauli_readout(fm, n) for key, fm in sorted(by_prep.items())
    }


# ---------------------------------------------------------------------------
# structure tensor inversion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionKernel:
    """Structure tensor B of the operator basis over the state basis, and a
    generalized inverse K recovering chi entries from expansion coefficients.
    """

    basis: OperatorBasis
    rho_basis: np.ndarray           # (M, d, d)
    b_tensor: np.ndarray            # (M*M, M*M): rows (j,k), cols (m,n)
    k_tensor: np.ndarray            # (M*M, M*M): rows (m,n), cols (j,k)

    def delta_residual(self) -> float:
        ident = self.k_tensor @ self.b_tensor
        return float(np.max(np.abs(ident - np.eye(ident.shape[0]))))


def build_inversion_kernel(basis: OperatorBasis,
                           rho_basis: np.ndarray) -> InversionKernel:
    """Expand E_m rho_j E_n† over the state basis and pseudo-invert.

    The state basis must be linearly independent; expansion coefficients are
    obtained through its Gram matrix, so non-orthogonal choices work too.
    """
    rho_basis = np.asarray(rho_basis, dtype=complex)
    m_ops = len(basis)
    if rho_basis.shape[0] != m_ops:
        raise DimensionError("state basis size must match operator basis size")
    gram = np.einsum("kab,lab->kl", rho_basis.conj(), rho_basis)
    if np.linalg.matrix_rank(gram, tol=1e-10) < m_ops:
        raise ValueError("state basis is rank deficient")
    e = basis.elements
    # prod[m, n, j] = E_m rho_j E_n†
    left = np.einsum("mab,jbc->mjac", e, rho_basis)
    prod = np.einsum("mjac,ndc->mnjad", left, e.conj())
    raw = np.einsum("kad,mnjad->mnjk", rho_basis.conj(), prod)
    coeff = np.linalg.solve(gram.T, raw.reshape(-1, m_ops).T).T
    b4 = coeff.reshape(m_ops, m_ops, m_ops, m_ops)       # [m, n, j, k]
    b_mat = b4.transpose(2, 3, 0, 1).reshape(m_ops**2, m_ops**2)
    k_mat = np.linalg.pinv(b_mat, rcond=1e-12)
    return InversionKernel(basis, rho_basis, b_mat, k_mat)


def dyad_state_basis(d: int) -> np.ndarray:
    """The d^2 dyads |a><b| ordered to match the computational operator basis."""
    out = np.zeros((d * d, d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            out[a * d + b, a, b] = 1.0
    return out


def lambda_from_outputs(outputs: dict, n: int) -> np.ndarray:
    """Expansion coefficients lam[j, k]: E(rho_j) = sum_k lam[j,k] rho_k.

    rho_j runs over the dyad basis; dyad outputs are recombined from the
    recorded product-state outputs via the tensored four-state identity.
    """
    d = 2**n
    lam = np.empty((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            acc = np.zeros((d, d), dtype=complex)
            for prep_string, idx, w in _dyad_expansion(a, b, n):
                acc += w * outputs[(prep_string, idx)]
            # dyads are Hilbert-Schmidt orthonormal: lam_k = Tr(rho_k† acc),
            # which for rho_k = |a><b| is just the (a, b) entry
            lam[a * d + b] = acc.ravel()
    return lam


def exact_lambda(process, d: int) -> np.ndarray:
    """lam computed by applying the process directly (shots -> infinity)."""
    lam = np.empty((d * d, d * d), dtype=complex)
    dyads = dyad_state_basis(d)
    for j in range(d * d):
        lam[j] = _apply(process, dyads[j]).ravel()
    return lam


def reconstruct_chi(data: SqptDataset, kernel: InversionKernel,
                    tp_mode: str | None = None) -> tuple[ProcessMatrix, dict]:
    """Linear-inversion chi from the dataset, then physical projection.

    Returns the physical process and a diagnostics dict (projection distance,
    raw non-Hermiticity).
    """
    d = data.dim
    if len(kernel.basis) != d * d:
        raise DimensionError("kernel does not match dataset dimension")
    needed = set(pauli_strings(data.n_qubits))
    have_meas = {r.meas_string for r in data.records}
    have_prep = {r.prep_string for r in data.records}
    if not (needed <= have_meas and needed <= have_prep):
        raise ValueError("dataset lacks the settings for full reconstruction")
    outputs = reconstructed_outputs(data)
    lam = lambda_from_outputs(outputs, data.n_qubits)
    data.lam = lam
    chi_raw = (kernel.k_tensor @ lam.ravel()).reshape(d * d, d * d)
    herm_dev = float(np.max(np.abs(chi_raw - chi_raw.conj().T)))
    chi_raw = hermitize(chi_raw)
    if tp_mode is None:
        row_tp = abs(float(np.trace(chi_raw).real) - d) < 0.1
        tp_mode = TP if row_tp else TNI
    phys, dist = physicalize(chi_raw, tp_mode)
    return phys, {"distance": dist, "hermiticity_deviation": herm_dev}


# ---------------------------------------------------------------------------
# physical projection
# ---------------------------------------------------------------------------


def _project_trace_condition(chi: np.ndarray, d: int, tp_mode: str) -> np.ndarray:
    red = partial_trace(chi, (d, d), which=1)
    if tp_mode == TP:
        target = np.eye(d)
    else:
        w, v = np.linalg.eigh(red)
        target = (v * np.minimum(w, 1.0)) @ v.conj().T
    corr = (target - red) / d
    return chi + np.kron(corr, np.eye(d))


def physicalize(chi_raw: np.ndarray, tp_mode: str = TP, tol: float = 1e-9,
                max_sweeps: int = 10_000) -> tuple[ProcessMatrix, float]:
    """Frobenius-nearest physical chi via Dykstra alternating projections.

    Alternates between the PSD cone and the trace condition (equality for
    trace-preserving maps, operator inequality otherwise) with Dykstra
    corrections, so the limit is the projection onto the intersection.
    Returns the physical process and the Frobenius distance moved.
    """
    chi_raw = require_hermitian(np.asarray(chi_raw, dtype=complex), atol=1e-8,
                                what="chi_raw")
    d = int(round(np.sqrt(chi_raw.shape[0])))
    x = chi_raw.copy()
    inc_p = np.zeros_like(x)
    inc_t = np.zeros_like(x)
    for _ in range(max_sweeps):
        y = project_psd(x + inc_p)
        inc_p = x + inc_p - y
        x2 = _project_trace_condition(y + inc_t, d, tp_mode)
        inc_t = y + inc_t - x2
        delta = float(np.linalg.norm(x2 - x))
        x = x2
        if delta <= tol and _physical_residual(x, d, tp_mode) <= 10 * tol:
            break
    x = project_psd(x)
    dist = float(np.linalg.norm(x - chi_raw))
    basis = OperatorBasis.computational(d)
    chi = hermitize(x)
    proc = ProcessMatrix._raw(basis, chi, tp_mode)
    return proc, dist


def _physical_residual(chi: np.ndarray, d: int, tp_mode: str) -> float:
    w = np.linalg.eigvalsh(chi)
    res = max(0.0, -float(w[0]))
    red = partial_trace(chi, (d, d), which=1)
    if tp_mode == TP:
        res = max(res, float(np.max(np.abs(red - np.eye(d)))))
    else:
        res = max(res, max(0.0, -float(np.linalg.eigvalsh(np.eye(d) - red)[0])))
    return res


# ---------------------------------------------------------------------------
# sqpt-v1 file format
# ---------------------------------------------------------------------------


def dataset_to_json(data: SqptDataset) -> dict:
    return {
        "format": "sqpt-v1",
        "n_qubits": data.n_qubits,
        "shots": data.shots,
        "seed": data.seed,
        "records": [
            {
                "prep": f"{r.prep_string}/{r.prep_index}",
                "meas": r.meas_string,
                "counts": [float(c) for c in r.counts],
            }
            for r in data.records
        ],
    }


def dataset_from_json(doc: dict) -> SqptDataset:
    if doc.get("format") != "sqpt-v1":
        raise ValueError("not a sqpt-v1 document")
    records = []
    for rec in doc["records"]:
        prep_string, _, idx = rec["prep"].partition("/")
        records.append(
            SqptRecord(prep_string, int(idx), rec["meas"],
                       np.array(rec["counts"], dtype=float))
        )
    return SqptDataset(int(doc["n_qubits"]), doc["shots"], records,
                       seed=doc.get("seed"))


def save_dataset(data: SqptDataset, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_json(data), fh, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> SqptDataset:
    with open(path) as fh:
        return dataset_from_json(json.load(fh))
