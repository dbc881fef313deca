"""Capability measures and their two-setting bounds.

Two dynamical resources are quantified for a process, each through two
measures:

* ``dyn`` -- ability to exhibit genuinely quantum dynamics.  The incapable
  set consists of processes whose action on a tomographically complete set
  of Pauli eigenstate inputs is reproduced by deterministic classical
  assignments feeding unnormalised output states (one per assignment).
* ``cre`` -- ability to create entanglement.  Incapable processes keep every
  product-state input positive under partial transposition of the output.

``alpha_*`` (composition) is the minimal capable weight in any convex split
of the process; ``beta_*`` (robustness) the minimal noise admixture that
renders it incapable.  Both come as a primal minimisation over the
unnormalised incapable matrix and as a dual maximisation over a certificate
pair, which agree under strong duality and power the heuristic see-saw used
for the data-driven upper bounds.

All measures operate on the k-normalised frame matrix of
:class:`procap.aoqpt.WorkFrame`; a process is compared against its target's
frame, which for partial-isometry targets restricts inputs to the initial
subspace and normalises traces by k.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .aoqpt import FeasibleSetSpec, WorkFrame
from .channels import (
    TNI,
    TP,
    ProcessMatrix,
    TargetOperation,
    identity_target,
)
from .bases import pauli_eigenbasis, pauli_strings
from .linalg import DimensionError, hermitize, project_psd
from .sdp import SdpProblem

MEASURES = ("alpha_dyn", "beta_dyn", "alpha_cre", "beta_cre", "fidelity")

_SINGLE_STATES = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2),
    "-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2),
    "+i": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2),
}


def default_tol() -> float:
    return float(os.environ.get("PROCAP_SDP_TOL", "1e-7"))


class SolverFailure(RuntimeError):
    """An SDP required by a measure did not reach the requested accuracy."""


@dataclass
class MeasureResult:
    measure: str
    value: float | None = None
    lower: float | None = None
    upper: float | None = None
    witnesses: dict = field(default_factory=dict)
    pieces: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# classical realism model (dyn incapable set)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalRealismModel:
    """Deterministic single-system assignments behind the dyn incapable set.

    ``sigma[x, a]`` is the input eigenprojector of outcome a for Pauli-string
    setting x; ``response[x, a, mu]`` is the 0/1 indicator that assignment mu
    answers a on setting x.  Assignments factorise over qubits, giving
    8^n of them.
    """

    n_qubits: int
    settings: tuple
    sigma: np.ndarray              # (n_settings, n_outcomes, k, k)
    response: np.ndarray           # (n_settings, n_outcomes, n_objects)

    @property
    def n_objects(self) -> int:
        return self.response.shape[2]


def build_realism_model(n_qubits: int) -> ClassicalRealismModel:
    if n_qubits not in (1, 2):
        raise ValueError("realism model supports 1 or 2 qubits only")
    settings = tuple(pauli_strings(n_qubits))
    k = 2**n_qubits
    n_set = len(settings)
    sigma = np.empty((n_set, k, k, k), dtype=complex)
    for xi, s in enumerate(settings):
        states, _ = pauli_eigenbasis(s)
        for a in range(k):
            v = states[:, a]
            sigma[xi, a] = np.outer(v, v.conj())
    # per-qubit assignments: outcome bit for each of X, Y, Z
    n_obj = 8**n_qubits
    response = np.zeros((n_set, k, n_obj))
    for mu in range(n_obj):
        bits = []
        m = mu
        for _ in range(n_qubits):
            bits.append((m & 4) >> 2)   # X answer
            bits.append((m & 2) >> 1)   # Y answer
            bits.append(m & 1)          # Z answer
            m >>= 3
        per_qubit = [bits[3 * q : 3 * q + 3] for q in range(n_qubits)]
        for xi, s in enumerate(settings):
            a = 0
            for q, ch in enumerate(s):
                a = (a << 1) | per_qubit[q]["XYZ".index(ch)]
            response[xi, a, mu] = 1.0
    return ClassicalRealismModel(n_qubits, settings, sigma, response)


# ---------------------------------------------------------------------------
# measure context: cached SDP structures for one frame
# ---------------------------------------------------------------------------


def _tr_input_op(sigma: np.ndarray, k: int, d: int):
    """Batched X -> Tr_1[(sigma^T (x) 1) X] on the frame."""

    def op(xs: np.ndarray) -> np.ndarray:
        t = xs.reshape(-1, k, d, k, d)
        return np.einsum("pr,bpqrs->bqs", sigma, t)

    return op


def _pt_out(ms: np.ndarray) -> np.ndarray:
    """Partial transpose of the first output qubit, batched over axis 0."""
    b, d, _ = ms.shape
    t = ms.reshape(b, 2, 2, 2, 2)
    return np.ascontiguousarray(t.transpose(0, 3, 2, 1, 4)).reshape(b, d, d)


def _tr_input_pt_op(sigma: np.ndarray, k: int, d: int):
    base = _tr_input_op(sigma, k, d)

    def op(xs: np.ndarray) -> np.ndarray:
        return _pt_out(base(xs))

    return op


def _kron_cert_op(sigma: np.ndarray, d: int, sign: float, pt: bool):
    """Batched K -> sign * sigma^T (x) (K or K^PT) on the frame."""
    sc = sigma.conj()

    def op(ks: np.ndarray) -> np.ndarray:
        kk = _pt_out(ks) if pt else ks
        out = np.einsum("pr,bqs->bpqrs", sc, kk)
        b = ks.shape[0]
        dim = sc.shape[0] * d
        return sign * out.reshape(b, dim, dim)

    return op


class MeasureContext:
    """Frame-bound assembly cache: one instance per (target, tp_mode)."""

    def __init__(self, target: TargetOperation, tp_mode: str | None = None):
        self.frame = WorkFrame(target)
        self.tp_mode = tp_mode or (TP if target.is_unitary else TNI)
        self.k = self.frame.k
        self.d = self.frame.d
        self.dim = self.frame.dim
        self._model = None
        self._cre = None
        self._problems: dict = {}
        self._states: dict = {}

    # -- ingredients ------------------------------------------------------

    @property
    def model(self) -> ClassicalRealismModel:
        if self._model is None:
            n = int(round(np.log2(self.k)))
            if 2**n != self.k:
                raise DimensionError("dyn measure needs a qubit-register subspace")
            self._model = build_realism_model(n)
        return self._model

    @property
    def cre_states(self) -> np.ndarray:
        """Pure product inputs compressed to frame coordinates, deduplicated."""
        if self._cre is None:
            if self.d != 4:
                raise DimensionError("cre measure is defined for two-qubit outputs")
            seen = {}
            for l1 in _SINGLE_STATES:
                for l2 in _SINGLE_STATES:
                    psi = np.kron(_SINGLE_STATES[l1], _SINGLE_STATES[l2])
                    w = self.frame.frame_coords(psi)
                    nrm = np.linalg.norm(w)
                    if nrm < 1e-9:
                        continue
                    w = w / nrm
                    w = w * np.exp(-1j * np.angle(w[np.argmax(np.abs(w) > 1e-12)]))
                    seen[tuple(np.round(w, 10))] = np.outer(w, w.conj())
            self._cre = np.stack(list(seen.values()))
        return self._cre

    # -- constraint groups --------------------------------------------------

    def _add_incapable(self, prob: SdpProblem, kind: str, var: str) -> None:
        k, d = self.k, self.d
        if kind == "dyn":
            model = self.model
            n_set, n_out, n_obj = model.response.shape
            for mu in range(n_obj):
                prob.add_block(f"out{mu}", "psd", d)
            for xi in range(n_set):
                for a in range(n_out):
                    terms = {var: ("op", _tr_input_op(model.sigma[xi, a], k, d))}
                    for mu in range(n_obj):
                        r = model.response[xi, a, mu]
                        if r:
                            terms[f"out{mu}"] = ("scale", -float(r))
                    prob.add_matrix_eq(terms, np.zeros((d, d)))
        elif kind == "cre":
            states = self.cre_states
            for mi, sig in enumerate(states):
                prob.add_block(f"pt{mi}", "psd", d)
                prob.add_matrix_eq(
                    {var: ("op", _tr_input_pt_op(sig, k, d)),
                     f"pt{mi}": ("scale", -1.0)},
                    np.zeros((d, d)),
                )
        else:
            raise ValueError(f"unknown resource kind {kind!r}")

    def _add_data_var(self, prob: SdpProblem, feas: FeasibleSetSpec | None) -> None:
        """The decision variable with physicality and (optionally) data rows."""
        prob.add_block("chi", "psd", self.dim)
        tr2 = lambda xs: np.einsum(  # noqa: E731 - one-line contraction
            "bpqrq->bpr", xs.reshape(-1, self.k, self.d, self.k, self.d)
        )
        if self.tp_mode == TP:
            prob.add_matrix_eq({"chi": ("op", lambda xs: self.k * tr2(xs))},
                               np.eye(self.k))
        else:
            prob.add_block("tni_slack", "psd", self.k)
            prob.add_matrix_eq(
                {"chi": ("op", lambda xs: self.k * tr2(xs)),
                 "tni_slack": ("id",)},
                np.eye(self.k),
            )
        if feas is not None:
            for i, (cmat, val) in enumerate(feas.constraints):
                prob.add_scalar_eq({"chi": cmat}, val, tag=f"data{i}")

    def _bind_data(self, compiled, feas: FeasibleSetSpec) -> None:
        for i, (_, val) in enumerate(feas.constraints):
            compiled.set_rhs(f"data{i}", val)

    # -- problem builders (compiled once per structure) ----------------------

    def direct_primal(self, kind: str, measure: str):
        key = ("primal", kind, measure)
        if key not in self._problems:
            prob = SdpProblem(f"{measure}_{kind}_primal")
            prob.add_block("chi_inc", "psd", self.dim)
            prob.add_block("slack", "psd", self.dim)
            sign = 1.0 if measure == "alpha" else -1.0
            prob.add_matrix_eq(
                {"chi_inc": ("id",), "slack": ("scale", sign)},
                np.eye(self.dim) / self.dim,
                tag="chibar",
            )
            self._add_incapable(prob, kind, "chi_inc")
            eye = np.eye(self.dim, dtype=complex)
            if measure == "alpha":
                prob.set_objective("min", {"chi_inc": -eye}, 1.0)
            else:
                prob.set_objective("min", {"chi_inc": eye}, -1.0)
            self._problems[key] = prob.compile()
        return self._problems[key]

    def direct_dual(self, kind: str, measure: str):
        # alpha: cert - sum sigma^T (x) K - slack = 1   (cert is F)
        # beta:  cert + sum sigma^T (x) K + slack = 1   (cert is G)
        key = ("dual", kind, measure)
        if key not in self._problems:
            d = self.d
            sign = -1.0 if measure == "alpha" else 1.0
            prob = SdpProblem(f"{measure}_{kind}_dual")
            prob.add_block("cert", "psd", self.dim)
            prob.add_block("slack", "psd", self.dim)
            terms = {"cert": ("id",), "slack": ("scale", sign)}
            if kind == "dyn":
                model = self.model
                n_set, n_out, n_obj = model.response.shape
                for xi in range(n_set):
                    for a in range(n_out):
                        name = f"mult{xi}_{a}"
                        prob.add_block(name, "herm", d)
                        terms[name] = ("op", _kron_cert_op(
                            model.sigma[xi, a], d, sign, pt=False))
                prob.add_matrix_eq(terms, np.eye(self.dim))
                # response-weighted multiplier sums stay PSD
                for mu in range(n_obj):
                    prob.add_block(f"pos{mu}", "psd", d)
                    mt = {f"pos{mu}": ("scale", -1.0)}
                    for xi in range(n_set):
                        for a in range(n_out):
                            if model.response[xi, a, mu]:
                                mt[f"mult{xi}_{a}"] = (
                                    "scale", float(model.response[xi, a, mu]))
                    prob.add_matrix_eq(mt, np.zeros((d, d)))
            else:
                for mi, sig in enumerate(self.cre_states):
                    name = f"mult{mi}"
                    prob.add_block(name, "psd", d)
                    terms[name] = ("op", _kron_cert_op(sig, d, sign, pt=True))
                prob.add_matrix_eq(terms, np.eye(self.dim))
            zero = np.zeros((self.dim, self.dim), dtype=complex)
            const = 1.0 if measure == "alpha" else -1.0
            prob.set_objective("max", {"cert": zero}, const)
            self._problems[key] = prob.compile()
        return self._problems[key]

    def bind_dual_objective(self, compiled, measure: str, chif: np.ndarray):
        if measure == "alpha":
            compiled.set_objective("max", {"cert": -hermitize(chif)}, 1.0)
        else:
            compiled.set_objective("max", {"cert": hermitize(chif)}, -1.0)

    def data_problem(self, feas: FeasibleSetSpec):
        key = ("data",)
        if key not in self._problems:
            prob = SdpProblem("data_feasible")
            self._add_data_var(prob, feas)
            prob.set_objective("min",
                               {"chi": np.zeros((self.dim, self.dim))}, 0.0)
            self._problems[key] = prob.compile()
        compiled = self._problems[key]
        self._bind_data(compiled, feas)
        return compiled

    def joint_lower(self, kind: str, measure: str, feas: FeasibleSetSpec):
        key = ("lower", kind, measure)
        if key not in self._problems:
            prob = SdpProblem(f"{measure}_{kind}_lower")
            self._add_data_var(prob, feas)
            prob.add_block("chi_inc", "psd", self.dim)
            prob.add_block("slack", "psd", self.dim)
            sign = 1.0 if measure == "alpha" else -1.0
            prob.add_matrix_eq(
                {"chi_inc": ("id",), "slack": ("scale", sign),
                 "chi": ("scale", -1.0)},
                np.zeros((self.dim, self.dim)),
            )
            self._add_incapable(prob, kind, "chi_inc")
            eye = np.eye(self.dim, dtype=complex)
            if measure == "alpha":
                prob.set_objective("min", {"chi_inc": -eye}, 1.0)
            else:
                prob.set_objective("min", {"chi_inc": eye}, -1.0)
            self._problems[key] = prob.compile()
        compiled = self._problems[key]
        self._bind_data(compiled, feas)
        return compiled


_CONTEXTS: dict = {}


def get_context(target: TargetOperation, tp_mode: str | None = None) -> MeasureContext:
    key = (target.initial_basis.tobytes(), target.kraus.tobytes(),
           tp_mode or (TP if target.is_unitary else TNI))
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = MeasureContext(target, tp_mode)
        _CONTEXTS[key] = ctx
    return ctx


# ---------------------------------------------------------------------------
# direct measures
# ---------------------------------------------------------------------------


def _frame_of(chi: ProcessMatrix, target: TargetOperation | None) -> MeasureContext:
    target = target or identity_target(chi.dim)
    return get_context(target)


def _solve(compiled, tol, warm=None):
    sol = compiled.solve(tol=tol, warm=warm)
    if sol.status == "infeasible":
        raise SolverFailure(f"SDP reported infeasible (residual {sol.primal_residual:.2e})")
    return sol


def _solver_diag(sol) -> dict:
    return {
        "iters": sol.iterations,
        "status": sol.status,
        "residuals": {
            "primal": sol.primal_residual,
            "dual": sol.dual_residual,
            "gap": sol.gap_estimate,
        },
    }


def alpha_direct(chi: ProcessMatrix, kind: str,
                 target: TargetOperation | None = None,
                 tol: float | None = None) -> MeasureResult:
    """Composition: minimal capable weight, by the primal minimisation."""
    return _direct(chi, kind, "alpha", target, tol)


def beta_direct(chi: ProcessMatrix, kind: str,
                target: TargetOperation | None = None,
                tol: float | None = None) -> MeasureResult:
    """Robustness: minimal incapacitating noise weight, primal form."""
    return _direct(chi, kind, "beta", target, tol)


def _direct(chi, kind, measure, target, tol):
    tol = tol if tol is not None else default_tol()
    ctx = _frame_of(chi, target)
    chif = ctx.frame.chi_frame(chi)
    compiled = ctx.direct_primal(kind, measure)
    compiled.set_rhs("chibar", chif)
    sol = _solve(compiled, tol)
    val = float(sol.objective_value)
    inc = sol.values["chi_inc"]
    pieces = {}
    tr = float(np.trace(inc).real)
    if measure == "alpha":
        pieces["c"] = val
        if tr > 1e-9:
            pieces["chi_incapable"] = inc / tr
        if val > 1e-9:
            pieces["chi_capable"] = (chif - inc) / val
    else:
        pieces["r"] = val
        pieces["chi_incapable"] = inc / max(tr, 1e-300)
        if val > 1e-9:
            pieces["chi_noise"] = (inc - chif) / val
    return MeasureResult(
        measure=f"{measure}_{kind}",
        value=val,
        witnesses={"chi_inc_unnormalized": inc},
        pieces=pieces,
        solver=_solver_diag(sol),
    )


def alpha_dual(chi: ProcessMatrix, kind: str,
               target: TargetOperation | None = None,
               tol: float | None = None) -> MeasureResult:
    """Composition via the certificate maximisation (strong dual)."""
    return _dual(chi, kind, "alpha", target, tol)


def beta_dual(chi: ProcessMatrix, kind: str,
              target: TargetOperation | None = None,
              tol: float | None = None) -> MeasureResult:
    return _dual(chi, kind, "beta", target, tol)


def _dual(chi, kind, measure, target, tol):
    tol = tol if tol is not None else default_tol()
    ctx = _frame_of(chi, target)
    chif = ctx.frame.chi_frame(chi)
    compiled = ctx.direct_dual(kind, measure)
    ctx.bind_dual_objective(compiled, measure, chif)
    sol = _solve(compiled, tol)
    cert_name = "F" if measure == "alpha" else "G"
    wit = {cert_name: sol.values["cert"]}
    for name, v in sol.values.items():
        if name.startswith("mult"):
            wit[name.replace("mult", "K_")] = v
    return MeasureResult(
        measure=f"{measure}_{kind}",
        value=float(sol.objective_value),
        witnesses=wit,
        solver=_solver_diag(sol),
    )


def process_fidelity(chi_a: ProcessMatrix | np.ndarray,
                     chi_b: ProcessMatrix | np.ndarray) -> float:
    """Overlap Tr(a b) of the trace-normalised process matrices.

    Both arguments must live in the same operator basis; for a rank-one
    (ideal target) argument this is the usual process fidelity in [0, 1].
    """
    a = chi_a.chi if isinstance(chi_a, ProcessMatrix) else np.asarray(chi_a)
    b = chi_b.chi if isinstance(chi_b, ProcessMatrix) else np.asarray(chi_b)
    if a.shape != b.shape:
        raise DimensionError("process matrices differ in dimension")
    ta, tb = float(np.trace(a).real), float(np.trace(b).real)
    if ta <= 1e-12 or tb <= 1e-12:
        raise ValueError("process matrix has (near-)zero trace")
    return float(np.real(np.trace(a @ b)) / (ta * tb))


# ---------------------------------------------------------------------------
# data-driven bounds
# ---------------------------------------------------------------------------


def aoqpt_lower(feas: FeasibleSetSpec, measure: str,
                tol: float | None = None) -> MeasureResult:
    """Certified lower bound: joint minimisation over all data-consistent
    decision matrices and the measure's own auxiliary variables."""
    tol = tol if tol is not None else default_tol()
    ctx = get_context(feas.target, feas.tp_mode)
    if measure == "fidelity":
        compiled = ctx.data_problem(feas)
        ideal = ctx.frame.ideal_chi_frame()
        compiled.set_objective("min", {"chi": hermitize(ideal)}, 0.0)
        sol = _solve(compiled, tol)
        chi_w = sol.values["chi"]
        return MeasureResult("fidelity", lower=float(sol.objective_value),
                             witnesses={"chi_worst": chi_w},
                             solver=_solver_diag(sol))
    m, kind = measure.split("_")
    compiled = ctx.joint_lower(kind, m, feas)
    sol = _solve(compiled, tol)
    return MeasureResult(
        measure,
        lower=float(sol.objective_value),
        witnesses={"chi_worst": sol.values["chi"]},
        solver=_solver_diag(sol),
    )


def _least_squares_start(ctx: MeasureContext, feas: FeasibleSetSpec) -> np.ndarray:
    """Minimum-norm solution of the data system, pushed into the PSD cone."""
    from . import _backend as bk

    compiled = ctx.data_problem(feas)
    blk = next(b for b in compiled.blocks if b.name == "chi")
    seg = compiled.xb[blk.offset : blk.offset + blk.size]
    return project_psd(bk.unhvec(seg, ctx.dim))


def _random_psd(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return m / np.linalg.norm(m)


def aoqpt_upper(feas: FeasibleSetSpec, measure: str, restarts: int = 5,
                seesaw_tol: float = 1e-6, max_rounds: int = 100,
                tol: float | None = None) -> MeasureResult:
    """Heuristic upper bound by alternating certificate / decision-matrix
    maximisation.

    Each round evaluates the measure exactly at the current decision matrix
    (dual solve), then reoptimises the matrix against the frozen certificate
    over the data-feasible set; the value sequence is nondecreasing.  The
    returned bound is the best value over restarts, a certified lower
    estimate of the true maximum (the scheme is a local search).  Fidelity
    is linear, so its maximum is one exact solve.
    """
    tol = tol if tol is not None else default_tol()
    ctx = get_context(feas.target, feas.tp_mode)
    if measure == "fidelity":
        compiled = ctx.data_problem(feas)
        ideal = ctx.frame.ideal_chi_frame()
        compiled.set_objective("max", {"chi": hermitize(ideal)}, 0.0)
        sol = _solve(compiled, tol)
        return MeasureResult("fidelity", upper=float(sol.objective_value),
                             witnesses={"chi_best": sol.values["chi"]},
                             solver=_solver_diag(sol))
    m, kind = measure.split("_")
    data = ctx.data_problem(feas)
    dual = ctx.direct_dual(kind, m)
    chi0 = _least_squares_start(ctx, feas)
    eps_scale = 0.1

    best_val = -np.inf
    best_chi = chi0
    rounds_log = []
    for r in range(restarts):
        chi_cur = chi0
        warm_dual = None
        warm_data = None
        val_prev = -np.inf
        vals = []
        try:
            for it in range(max_rounds):
                ctx.bind_dual_objective(dual, m, chi_cur)
                dsol = _solve(dual, tol, warm=warm_dual)
                warm_dual = dsol.state
                cert = dsol.values["cert"]
                val = float(dsol.objective_value)
                perturbed = r > 0 and it == 0
                if not perturbed:
                    # monotone ascent holds from the first unperturbed round on
                    vals.append(val)
                if val > best_val:
                    best_val = val
                    best_chi = chi_cur
                if it > 0 and abs(val - val_prev) < seesaw_tol:
                    break
                val_prev = val
                if perturbed:
                    cert = cert + eps_scale * np.linalg.norm(cert) * _random_psd(
                        ctx.dim, seed=1000 + r
                    )
                    val_prev = -np.inf
                if m == "alpha":
                    data.set_objective("min", {"chi": hermitize(cert)}, 0.0)
                else:
                    data.set_objective("max", {"chi": hermitize(cert)}, 0.0)
                csol = _solve(data, tol, warm=warm_data)
                warm_data = csol.state
                chi_cur = project_psd(csol.values["chi"])
        except SolverFailure:
            continue
        if vals:
            rounds_log.append(vals)
    if not np.isfinite(best_val):
        raise SolverFailure(f"all see-saw restarts failed for {measure}")
    return MeasureResult(
        measure,
        upper=best_val,
        witnesses={"chi_best": best_chi},
        pieces={},
        solver={"rounds": rounds_log},
    )


# ---------------------------------------------------------------------------
# measures-v1 report format
# ---------------------------------------------------------------------------


def _chi_payload(ctx_or_none, arr: np.ndarray) -> dict:
    return {
        "format": "chi-v1",
        "dim": int(arr.shape[0]),
        "basis_tag": "frame",
        "tp_mode": "tp",
        "entries": [[z.real, z.imag] for z in np.asarray(arr).ravel()],
    }


def results_to_json(results: dict) -> dict:
    doc = {"format": "measures-v1", "measures": {}}
    for name, res in sorted(results.items()):
        entry: dict = {}
        if res.lower is not None:
            entry["lower"] = res.lower
        if res.upper is not None:
            entry["upper"] = res.upper
        if res.value is not None:
            entry["direct"] = res.value
        entry["solver"] = res.solver
        entry["witnesses"] = {
            k: _chi_payload(None, v)
            for k, v in res.witnesses.items()
            if isinstance(v, np.ndarray) and v.ndim == 2
        }
        doc["measures"][name] = entry
    return doc


def save_results(results: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(results_to_json(results), fh, sort_keys=True)
        fh.write("\n")
