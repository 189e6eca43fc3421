"""Order of complexity, regularity of equilibria and null-eigenvalue counts.

Topological quantities come from exact kernel dimensions of the loop and
cutset matrices; every verdict is cross-checked against the numerical corank
of the Jacobian of the semistate model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import newton
from .devices import (
    DEFAULT_DEFINITENESS_TOL,
    CharacteristicMatrices,
    characteristic_matrices,
    is_positive_definite,
)
from .errors import (
    ConsistencyError,
    IllPosedCircuitError,
    NonConvergenceError,
    PencilReductionError,
    UnsupportedAnalysisError,
)
from .graph import TopologyMatrices, configuration_count, configuration_flags, normal_tree
from .model import SemistateModel, assemble, equilibrium_point, find_equilibrium, jacobian_K
from .netlist import Circuit, DeviceClass

C = DeviceClass
DEFAULT_RANK_TOL = 1e-10
SCHEMA_VERSION = 1


def corank(matrix, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of columns minus the numerical rank.

    Singular values at or below ``rel_tol * sigma_max`` count as zero; a zero
    matrix has full corank. For square matrices this is the number of small
    singular values.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2:
        A = np.atleast_2d(A)
    if A.shape[1] == 0:
        return 0
    if A.shape[0] == 0:
        return A.shape[1]
    s = np.linalg.svd(A, compute_uv=False)
    smax = s.max()
    if smax == 0.0:
        return A.shape[1]
    return A.shape[1] - int(np.count_nonzero(s > rel_tol * smax))


def _nonsingular_diag(d, tol):
    return bool(np.all(np.abs(d) > tol))


def _vanishing_diag(d, tol):
    return bool(np.all(np.abs(d) <= tol))


def _count(circuit, *classes):
    return sum(circuit.count(c) for c in classes)


# -- order of complexity --------------------------------------------------------

@dataclass
class NondegeneracyVerdict:
    applicable: bool
    nondegenerate: Optional[bool]
    state_dimension: Optional[int]
    hypotheses: dict
    failed: list
    jred_corank: Optional[int] = None


def jacobian_J(model: SemistateModel, cm: CharacteristicMatrices) -> np.ndarray:
    """Partial derivatives of rows (c)-(f) with respect to the branch variables."""
    from .model import assemble_K

    return assemble_K(model, cm)[model.alg_rows, model.layout.branch_cols]


def reduced_J(model: SemistateModel, cm: CharacteristicMatrices) -> np.ndarray:
    """Schur reduction ``[[B_q M_q, B_phi], [D_q, D_phi W_phi]]`` of J."""
    counts = model.layout.counts
    n_m, n_c, n_r = counts[C.QMEMRISTOR], counts[C.CAPACITOR], counts[C.RRESISTOR]
    n_w, n_l, n_g = counts[C.PHIMEMRISTOR], counts[C.INDUCTOR], counts[C.GRESISTOR]
    M_q = np.zeros(model.layout.n_q)
    M_q[:n_m] = cm.M
    M_q[n_m + n_c: n_m + n_c + n_r] = cm.R
    W_phi = np.zeros(model.layout.n_phi)
    W_phi[:n_w] = cm.W
    W_phi[n_w + n_l: n_w + n_l + n_g] = cm.G
    top = np.hstack([model.B_q * M_q, model.B_phi])
    bottom = np.hstack([model.D_q, model.D_phi * W_phi])
    return np.vstack([top, bottom])


def check_nondegenerate(circuit: Circuit, tm: TopologyMatrices, point,
                        tol: float = DEFAULT_DEFINITENESS_TOL,
                        rank_tol: float = DEFAULT_RANK_TOL) -> NondegeneracyVerdict:
    """Apply the strict-passivity criterion for a state dimension equal to the
    number of memristors, capacitors and inductors."""
    cm = characteristic_matrices(circuit, point)
    hyp = {
        "M positive definite": is_positive_definite(cm.matrix("M"), tol),
        "R positive definite": is_positive_definite(cm.matrix("R"), tol),
        "W positive definite": is_positive_definite(cm.matrix("W"), tol),
        "G positive definite": is_positive_definite(cm.matrix("G"), tol),
        "no VC-loop": configuration_count(tm, "VC-loop") == 0,
        "no IL-cutset": configuration_count(tm, "IL-cutset") == 0,
    }
    failed = [name for name, ok in hyp.items() if not ok]
    if failed:
        return NondegeneracyVerdict(False, None, None, hyp, failed)
    model = SemistateModel(circuit, tm)
    c = corank(reduced_J(model, cm), rank_tol)
    if c != 0:
        raise ConsistencyError(f"hypotheses hold but the reduced J has corank {c}")
    dim = _count(circuit, C.QMEMRISTOR, C.PHIMEMRISTOR, C.CAPACITOR, C.INDUCTOR)
    return NondegeneracyVerdict(True, True, dim, hyp, [], c)


def normal_tree_counts(circuit: Circuit, tm: TopologyMatrices) -> dict:
    g = tm.graph
    tree = set(normal_tree(g))
    caps = g.branches_of([C.CAPACITOR])
    inds = g.branches_of([C.INDUCTOR])
    return {
        "capacitors_in_tree": sum(1 for j in caps if j in tree),
        "inductors_in_cotree": sum(1 for j in inds if j not in tree),
    }


def order_of_complexity(circuit: Circuit, tm: TopologyMatrices) -> int:
    """Memristors plus capacitors in a normal tree plus inductors in its cotree."""
    for name in ("V-loop", "I-cutset"):
        if configuration_count(tm, name):
            raise IllPosedCircuitError(f"circuit has a {name}; no normal tree exists")
    nt = normal_tree_counts(circuit, tm)
    return (_count(circuit, C.QMEMRISTOR, C.PHIMEMRISTOR)
            + nt["capacitors_in_tree"] + nt["inductors_in_cotree"])


# -- equilibria -------------------------------------------------------------------

@dataclass
class RegularityVerdict:
    applicable: bool
    regular: Optional[bool]
    conditions: dict
    failed: list
    corank_K: int


def _equilibrium_matrices(model, eq):
    K, _ = jacobian_K(model, eq)
    cm = characteristic_matrices(model.circuit, equilibrium_point(model, eq))
    return K, cm


def _passive_resistors(cm, tol):
    return {
        "R positive definite": is_positive_definite(cm.matrix("R"), tol),
        "G positive definite": is_positive_definite(cm.matrix("G"), tol),
    }


def check_regular_equilibrium(model: SemistateModel, eq, tol: float = DEFAULT_DEFINITENESS_TOL,
                              rank_tol: float = DEFAULT_RANK_TOL) -> RegularityVerdict:
    """Decide regularity (non-singular K) from device data and topology."""
    K, cm = _equilibrium_matrices(model, eq)
    c = corank(K, rank_tol)
    pre = _passive_resistors(cm, tol)
    if not all(pre.values()):
        return RegularityVerdict(False, None, pre, [k for k, v in pre.items() if not v], c)
    conditions = dict(pre)
    for name in ("E_m", "E_c", "R_w", "R_l"):
        conditions[f"{name} non-singular"] = _nonsingular_diag(getattr(cm, name), tol)
    conditions["no VLW-loop"] = configuration_count(model.tm, "VLW-loop") == 0
    conditions["no ICM-cutset"] = configuration_count(model.tm, "ICM-cutset") == 0
    failed = [k.replace("no ", "").replace("non-singular", "singular") for k, v in conditions.items() if not v]
    regular = not failed
    if regular != (c == 0):
        raise ConsistencyError(
            f"topological verdict regular={regular} disagrees with numerical corank(K)={c}")
    return RegularityVerdict(True, regular, conditions, failed, c)


@dataclass
class MultiplicityResult:
    applicable: bool
    value: Optional[int]
    decomposition: dict
    failed: list
    corank_K: int
    theorem: str


def null_multiplicity_chua(model: SemistateModel, eq, tol: float = DEFAULT_DEFINITENESS_TOL,
                           rank_tol: float = DEFAULT_RANK_TOL) -> MultiplicityResult:
    """Memristors + independent VL-loops + independent IC-cutsets, for
    memristors whose elastance/reluctance vanish at the equilibrium."""
    K, cm = _equilibrium_matrices(model, eq)
    c = corank(K, rank_tol)
    pre = _passive_resistors(cm, tol)
    pre["E_m vanishes"] = _vanishing_diag(cm.E_m, tol)
    pre["R_w vanishes"] = _vanishing_diag(cm.R_w, tol)
    pre["E_c non-singular"] = _nonsingular_diag(cm.E_c, tol)
    pre["R_l non-singular"] = _nonsingular_diag(cm.R_l, tol)
    failed = [k for k, v in pre.items() if not v]
    if failed:
        return MultiplicityResult(False, None, {}, failed, c, "chua")
    circuit = model.circuit
    dec = {
        "q-memristors": circuit.count(C.QMEMRISTOR),
        "phi-memristors": circuit.count(C.PHIMEMRISTOR),
        "VL-loops": configuration_count(model.tm, "VL-loop"),
        "IC-cutsets": configuration_count(model.tm, "IC-cutset"),
    }
    value = sum(dec.values())
    if value != c:
        raise ConsistencyError(f"topological null multiplicity {value} disagrees with corank(K)={c}")
    return MultiplicityResult(True, value, dec, [], c, "chua")


def null_multiplicity_general(model: SemistateModel, eq, tol: float = DEFAULT_DEFINITENESS_TOL,
                              rank_tol: float = DEFAULT_RANK_TOL) -> MultiplicityResult:
    """Independent VLW-loops + independent ICM-cutsets, for non-singular
    elastances and reluctances."""
    K, cm = _equilibrium_matrices(model, eq)
    c = corank(K, rank_tol)
    pre = _passive_resistors(cm, tol)
    for name in ("E_m", "E_c", "R_w", "R_l"):
        pre[f"{name} non-singular"] = _nonsingular_diag(getattr(cm, name), tol)
    failed = [k for k, v in pre.items() if not v]
    if failed:
        return MultiplicityResult(False, None, {}, failed, c, "general")
    dec = {
        "VLW-loops": configuration_count(model.tm, "VLW-loop"),
        "ICM-cutsets": configuration_count(model.tm, "ICM-cutset"),
    }
    value = sum(dec.values())
    if value != c:
        raise ConsistencyError(f"topological null multiplicity {value} disagrees with corank(K)={c}")
    return MultiplicityResult(True, value, dec, [], c, "general")


def finite_spectrum(model: SemistateModel, eq, rank_tol: float = DEFAULT_RANK_TOL) -> list:
    """Finite eigenvalues of ``lambda H - K`` via the Schur complement onto the
    charge/flux block, sorted by (real, imag)."""
    K, _ = jacobian_K(model, eq)
    n = model.layout.n_diff
    K11, K12 = K[:n, :n], K[:n, n:]
    K21, K22 = K[n:, :n], K[n:, n:]
    c = corank(K22, rank_tol)
    if c:
        raise PencilReductionError(
            f"algebraic block of K is singular (corank {c}); the finite spectrum is not "
            "defined by this reduction (higher index or singular pencil)")
    if n == 0:
        return []
    A = K11 - K12 @ np.linalg.solve(K22, K21)
    eig = np.linalg.eigvals(A)
    return sorted((complex(z) for z in eig), key=lambda z: (z.real, z.imag))


# -- full report --------------------------------------------------------------------

@dataclass
class AnalysisReport:
    circuit: str
    topology: dict
    equilibrium: dict
    state_dimension: Optional[int]
    state_dimension_method: Optional[str]
    order_of_complexity: Optional[int]
    nondegenerate: Optional[bool]
    nondegenerate_ledger: dict
    regular_equilibrium: Optional[bool]
    regular_equilibrium_ledger: dict
    null_multiplicity: Optional[int]
    null_multiplicity_decomposition: dict
    corank_K: Optional[int]
    finite_spectrum: Optional[list]
    finite_spectrum_error: Optional[str]
    tolerances: dict
    schema_version: int = SCHEMA_VERSION

    @property
    def ok(self):
        return self.equilibrium.get("status") == "ok"

    def to_dict(self):
        d = asdict(self)
        d = {"schema_version": d.pop("schema_version"), **d}
        return d


def topology_summary(circuit: Circuit, tm: TopologyMatrices) -> dict:
    g = tm.graph
    return {
        "n": g.n,
        "m": g.m,
        "k": g.k,
        "counts": {c.token: circuit.count(c) for c in DeviceClass},
        "flags": configuration_flags(tm),
    }


def _ledger(verdict, status_ok="holds"):
    status = status_ok if verdict.applicable else "not-applicable"
    out = {"status": status}
    for key, value in asdict(verdict).items():
        if key != "applicable":
            out[key] = value
    return out


def _solve_equilibrium(model, guess, newton_tol):
    try:
        return find_equilibrium(model, guess, tol=newton_tol)
    except NonConvergenceError:
        counts = model.layout.counts
        if not (counts[C.QMEMRISTOR] or counts[C.PHIMEMRISTOR]):
            raise
    return find_equilibrium(model, guess, tol=newton_tol, free_memristors=True)


def analyze_circuit(circuit: Circuit, guess=None, newton_tol: float = newton.DEFAULT_TOL,
                    rank_tol: float = DEFAULT_RANK_TOL,
                    definiteness_tol: float = DEFAULT_DEFINITENESS_TOL) -> AnalysisReport:
    """Equilibrium search followed by every applicable analysis.

    The guess may map device ids to charges/fluxes. Memristor states are held
    at the guess; when no equilibrium exists at those values they are freed.
    """
    model = assemble(circuit)
    tm = model.tm
    tolerances = {"rank_rel_tol": rank_tol, "newton_tol": newton_tol,
                  "definiteness_tol": definiteness_tol}
    report = AnalysisReport(
        circuit=circuit.name, topology=topology_summary(circuit, tm), equilibrium={},
        state_dimension=None, state_dimension_method=None, order_of_complexity=None,
        nondegenerate=None, nondegenerate_ledger={}, regular_equilibrium=None,
        regular_equilibrium_ledger={}, null_multiplicity=None, null_multiplicity_decomposition={},
        corank_K=None, finite_spectrum=None, finite_spectrum_error=None, tolerances=tolerances)

    try:
        report.order_of_complexity = order_of_complexity(circuit, tm)
    except IllPosedCircuitError as err:
        report.nondegenerate_ledger["normal_tree"] = str(err)

    try:
        eq = _solve_equilibrium(model, guess, newton_tol)
    except (NonConvergenceError, UnsupportedAnalysisError) as err:
        report.equilibrium = {"status": "failed", "error": str(err)}
        return report

    report.equilibrium = {
        "status": "ok",
        "iterations": eq.iterations,
        "residual_norm": eq.residual_norm,
        "newton_corank": eq.newton_corank,
        "memristor_states": "free" if eq.free_memristors else "pinned",
        "state": dict(zip(model.names(), (float(v) for v in eq.x.values))),
    }

    point = equilibrium_point(model, eq)
    nd = check_nondegenerate(circuit, tm, point, definiteness_tol, rank_tol)
    report.nondegenerate = nd.nondegenerate
    report.nondegenerate_ledger.update(_ledger(nd))
    if nd.applicable:
        report.state_dimension, report.state_dimension_method = nd.state_dimension, "strict-passivity"
    elif report.order_of_complexity is not None:
        cm = characteristic_matrices(circuit, point)
        if (is_positive_definite(cm.matrix("E_c"), definiteness_tol)
                and is_positive_definite(cm.matrix("R_l"), definiteness_tol)):
            report.state_dimension = report.order_of_complexity
            report.state_dimension_method = "normal-tree"

    reg = check_regular_equilibrium(model, eq, definiteness_tol, rank_tol)
    report.regular_equilibrium = reg.regular
    report.regular_equilibrium_ledger = _ledger(reg)
    report.corank_K = reg.corank_K

    cm = characteristic_matrices(circuit, point)
    if circuit.count(C.QMEMRISTOR) + circuit.count(C.PHIMEMRISTOR) and not (
            _vanishing_diag(cm.E_m, definiteness_tol) and _vanishing_diag(cm.R_w, definiteness_tol)):
        mult = null_multiplicity_general(model, eq, definiteness_tol, rank_tol)
    else:
        mult = null_multiplicity_chua(model, eq, definiteness_tol, rank_tol)
    if mult.applicable:
        report.null_multiplicity = mult.value
        report.null_multiplicity_decomposition = {"theorem": mult.theorem, **mult.decomposition}
    else:
        report.null_multiplicity = reg.corank_K
        report.null_multiplicity_decomposition = {
            "theorem": "numerical", "not_applicable": mult.theorem, "failed": mult.failed}

    try:
        report.finite_spectrum = [[z.real, z.imag] for z in finite_spectrum(model, eq, rank_tol)]
    except PencilReductionError as err:
        report.finite_spectrum_error = str(err)
    return report
