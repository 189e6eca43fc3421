"""Semistate DAE of a circuit, its Jacobian, and DC equilibria.

Unknowns are ordered ``(q_mc, phi_wl, v_q, i_q, v_phi, i_phi)`` and the rows
of the model are

    (a) q_mc'   = i_mc
    (b) phi_wl' = v_wl
    (c) 0 = v_q   - f(q_mc, i_q, t)
    (d) 0 = i_phi - g(phi_wl, v_phi, t)
    (e) 0 = B_q v_q + B_phi v_phi
    (f) 0 = D_q i_q + D_phi i_phi

Charges of resistors and voltage sources and fluxes of conductors and current
sources are decoupled from the dynamics and are not part of the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional, Union

import numpy as np

from . import expr as ex
from . import newton
from .devices import CharacteristicMatrices, CharacteristicPoint, characteristic_matrices
from .errors import ExpressionDomainError, InvalidCircuitError, UnsupportedAnalysisError
from .graph import TopologyMatrices, topology
from .netlist import Circuit, DeviceClass, errors_only, is_time_invariant, validate

C = DeviceClass
Q_CLASSES = (C.QMEMRISTOR, C.CAPACITOR, C.RRESISTOR, C.VSOURCE)
PHI_CLASSES = (C.PHIMEMRISTOR, C.INDUCTOR, C.GRESISTOR, C.ISOURCE)


@dataclass(frozen=True)
class Layout:
    counts: dict  # DeviceClass -> number of devices

    @cached_property
    def n_q(self):
        return sum(self.counts[c] for c in Q_CLASSES)

    @cached_property
    def n_phi(self):
        return sum(self.counts[c] for c in PHI_CLASSES)

    @cached_property
    def n_mc(self):
        return self.counts[C.QMEMRISTOR] + self.counts[C.CAPACITOR]

    @cached_property
    def n_wl(self):
        return self.counts[C.PHIMEMRISTOR] + self.counts[C.INDUCTOR]

    @cached_property
    def n_diff(self):
        return self.n_mc + self.n_wl

    @cached_property
    def dim(self):
        return self.n_diff + 2 * (self.n_q + self.n_phi)

    def _sl(self, start, size):
        return slice(start, start + size)

    @cached_property
    def q_mc(self):
        return self._sl(0, self.n_mc)

    @cached_property
    def phi_wl(self):
        return self._sl(self.n_mc, self.n_wl)

    @cached_property
    def v_q(self):
        return self._sl(self.n_diff, self.n_q)

    @cached_property
    def i_q(self):
        return self._sl(self.n_diff + self.n_q, self.n_q)

    @cached_property
    def v_phi(self):
        return self._sl(self.n_diff + 2 * self.n_q, self.n_phi)

    @cached_property
    def i_phi(self):
        return self._sl(self.n_diff + 2 * self.n_q + self.n_phi, self.n_phi)

    @cached_property
    def branch_cols(self):
        return slice(self.n_diff, self.dim)


@dataclass(frozen=True)
class SemistateVector:
    layout: Layout
    values: np.ndarray

    def __getattr__(self, name):
        if name in ("q_mc", "phi_wl", "v_q", "i_q", "v_phi", "i_phi"):
            return self.values[getattr(self.layout, name)]
        raise AttributeError(name)

    @property
    def i_mc(self):
        return self.i_q[: self.layout.n_mc]

    @property
    def v_wl(self):
        return self.v_phi[: self.layout.n_wl]


@dataclass(frozen=True)
class EquilibriumPoint:
    x: SemistateVector
    residual_norm: float
    iterations: int
    newton_corank: int = 0
    free_memristors: bool = False


class SemistateModel:
    """Residual and Jacobian evaluators for one circuit."""

    def __init__(self, circuit: Circuit, tm: TopologyMatrices):
        self.circuit = circuit
        self.tm = tm
        self.branches = circuit.branches
        self.layout = Layout({c: circuit.count(c) for c in DeviceClass})
        lay = self.layout
        self.q_devices = self.branches[: lay.n_q]
        self.phi_devices = self.branches[lay.n_q:]
        self.B_q, self.B_phi = tm.B[:, : lay.n_q], tm.B[:, lay.n_q:]
        self.D_q, self.D_phi = tm.D[:, : lay.n_q], tm.D[:, lay.n_q:]
        self.time_invariant = is_time_invariant(circuit)
        n_b, n_d = tm.B.shape[0], tm.D.shape[0]
        start = lay.n_diff
        self.rows = {
            "a": slice(0, lay.n_mc),
            "b": slice(lay.n_mc, lay.n_diff),
            "c": slice(start, start + lay.n_q),
            "d": slice(start + lay.n_q, start + lay.n_q + lay.n_phi),
            "e": slice(start + lay.n_q + lay.n_phi, start + lay.n_q + lay.n_phi + n_b),
            "f": slice(start + lay.n_q + lay.n_phi + n_b, start + lay.n_q + lay.n_phi + n_b + n_d),
        }
        self.alg_rows = slice(lay.n_diff, lay.dim)

    @property
    def dim(self):
        return self.layout.dim

    @property
    def H(self):
        lay = self.layout
        H = np.zeros((lay.dim, lay.dim))
        H[: lay.n_diff, : lay.n_diff] = np.eye(lay.n_diff)
        return H

    def names(self):
        lay = self.layout
        ids = [d.id for d in self.branches]
        q_ids, phi_ids = ids[: lay.n_q], ids[lay.n_q:]
        return (
            [f"q:{i}" for i in q_ids[: lay.n_mc]]
            + [f"phi:{i}" for i in phi_ids[: lay.n_wl]]
            + [f"v:{i}" for i in q_ids]
            + [f"i:{i}" for i in q_ids]
            + [f"v:{i}" for i in phi_ids]
            + [f"i:{i}" for i in phi_ids]
        )

    def vector(self, values) -> SemistateVector:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} values, got shape {values.shape}")
        return SemistateVector(self.layout, values)

    def zeros(self):
        return self.vector(np.zeros(self.dim))

    def state_index(self, device_id) -> int:
        """Index in the unknown vector of the charge/flux of a dynamic device."""
        lay = self.layout
        for k, d in enumerate(self.q_devices[: lay.n_mc]):
            if d.id == device_id:
                return lay.q_mc.start + k
        for k, d in enumerate(self.phi_devices[: lay.n_wl]):
            if d.id == device_id:
                return lay.phi_wl.start + k
        raise KeyError(f"{device_id} has no charge/flux state")

    def point(self, x, t=0.0) -> CharacteristicPoint:
        x = _values(x)
        lay = self.layout
        state, flow = {}, {}
        q_mc, phi_wl = x[lay.q_mc], x[lay.phi_wl]
        for k, d in enumerate(self.q_devices):
            if k < lay.n_mc:
                state[d.id] = q_mc[k]
            flow[d.id] = x[lay.i_q][k]
        for k, d in enumerate(self.phi_devices):
            if k < lay.n_wl:
                state[d.id] = phi_wl[k]
            flow[d.id] = x[lay.v_phi][k]
        return CharacteristicPoint(state, flow, t)

    def _characteristic_values(self, devices, point):
        out = np.empty(len(devices))
        for k, d in enumerate(devices):
            try:
                out[k] = ex.eval(d.ast, point.assignment(d))
            except ExpressionDomainError as err:
                raise ExpressionDomainError("cannot evaluate", err.subexpression, d.id) from None
        return out

    def rhs(self, x, t=0.0) -> np.ndarray:
        """Right-hand side of the model; rows (c)-(f) vanish on solutions."""
        x = _values(x)
        lay = self.layout
        point = self.point(x, t)
        v = np.concatenate([x[lay.v_q], x[lay.v_phi]])
        i = np.concatenate([x[lay.i_q], x[lay.i_phi]])
        return np.concatenate([
            x[lay.i_q][: lay.n_mc],
            x[lay.v_phi][: lay.n_wl],
            x[lay.v_q] - self._characteristic_values(self.q_devices, point),
            x[lay.i_phi] - self._characteristic_values(self.phi_devices, point),
            self.tm.B @ v,
            self.tm.D @ i,
        ])

    def residual(self, x, xdot, t=0.0) -> np.ndarray:
        """Residual of the semistate model.

        ``xdot`` holds the derivatives of ``(q_mc, phi_wl)`` only.
        """
        r = self.rhs(x, t)
        xdot = np.asarray(xdot, dtype=float)
        n = self.layout.n_diff
        if xdot.shape != (n,):
            raise ValueError(f"expected {n} derivative values, got shape {xdot.shape}")
        r[:n] = xdot - r[:n]
        return r

    def jacobian(self, x, t=0.0) -> np.ndarray:
        """d rhs / dx at any point."""
        return assemble_K(self, characteristic_matrices(self.circuit, self.point(x, t)))

    def alg_residual_norm(self, x, t=0.0) -> float:
        r = self.rhs(x, t)[self.alg_rows]
        return float(np.max(np.abs(r))) if r.size else 0.0


def _values(x):
    return x.values if isinstance(x, SemistateVector) else np.asarray(x, dtype=float)


def assemble(circuit: Circuit, tm: Optional[TopologyMatrices] = None) -> SemistateModel:
    errors = errors_only(validate(circuit))
    if errors:
        raise InvalidCircuitError(errors)
    return SemistateModel(circuit, tm if tm is not None else topology(circuit))


def assemble_K(model: SemistateModel, cm: CharacteristicMatrices) -> np.ndarray:
    """Block assembly of the Jacobian from the characteristic matrices."""
    lay = model.layout
    counts = lay.counts
    K = np.zeros((lay.dim, lay.dim))
    rows = model.rows
    n_m, n_c, n_w, n_l = (counts[C.QMEMRISTOR], counts[C.CAPACITOR],
                          counts[C.PHIMEMRISTOR], counts[C.INDUCTOR])
    n_r, n_g = counts[C.RRESISTOR], counts[C.GRESISTOR]

    K[rows["a"], lay.i_q.start: lay.i_q.start + lay.n_mc] = np.eye(lay.n_mc)
    K[rows["b"], lay.v_phi.start: lay.v_phi.start + lay.n_wl] = np.eye(lay.n_wl)

    M_q = np.zeros(lay.n_q)
    M_q[:n_m] = cm.M
    M_q[n_m + n_c: n_m + n_c + n_r] = cm.R
    E_mc = np.zeros((lay.n_q, lay.n_mc))
    E_mc[:n_m, :n_m] = np.diag(cm.E_m)
    E_mc[n_m:n_m + n_c, n_m:] = np.diag(cm.E_c)
    K[rows["c"], lay.q_mc] = -E_mc
    K[rows["c"], lay.v_q] = np.eye(lay.n_q)
    K[rows["c"], lay.i_q] = -np.diag(M_q)

    W_phi = np.zeros(lay.n_phi)
    W_phi[:n_w] = cm.W
    W_phi[n_w + n_l: n_w + n_l + n_g] = cm.G
    R_wl = np.zeros((lay.n_phi, lay.n_wl))
    R_wl[:n_w, :n_w] = np.diag(cm.R_w)
    R_wl[n_w:n_w + n_l, n_w:] = np.diag(cm.R_l)
    K[rows["d"], lay.phi_wl] = -R_wl
    K[rows["d"], lay.v_phi] = -np.diag(W_phi)
    K[rows["d"], lay.i_phi] = np.eye(lay.n_phi)

    K[rows["e"], lay.v_q] = model.B_q
    K[rows["e"], lay.v_phi] = model.B_phi
    K[rows["f"], lay.i_q] = model.D_q
    K[rows["f"], lay.i_phi] = model.D_phi
    return K


def _require_dc(model):
    if not model.time_invariant:
        raise UnsupportedAnalysisError("equilibrium analysis needs a time-invariant circuit (DC sources)")


def equilibrium_point(model, eq) -> CharacteristicPoint:
    return model.point(eq.x if isinstance(eq, EquilibriumPoint) else eq, 0.0)


def jacobian_K(model: SemistateModel, eq) -> tuple:
    """Return ``(K, H)`` of the pencil ``lambda H - K`` at an equilibrium."""
    _require_dc(model)
    cm = characteristic_matrices(model.circuit, equilibrium_point(model, eq))
    return assemble_K(model, cm), model.H


Guess = Union[None, SemistateVector, np.ndarray, Mapping[str, float]]


def initial_vector(model: SemistateModel, guess: Guess = None) -> np.ndarray:
    """Unknown vector from a full vector or from per-device charge/flux values."""
    if guess is None:
        return np.zeros(model.dim)
    if isinstance(guess, Mapping):
        x = np.zeros(model.dim)
        for device_id, value in guess.items():
            x[model.state_index(device_id)] = float(value)
        return x
    return _values(guess).copy()


def find_equilibrium(model: SemistateModel, guess: Guess = None, tol: float = newton.DEFAULT_TOL,
                     maxiter: int = newton.DEFAULT_MAXITER, free_memristors: bool = False) -> EquilibriumPoint:
    """Solve the algebraic rows with zero derivatives.

    ``i_mc`` and ``v_wl`` are set to zero exactly. Memristor charges and fluxes
    keep their guess values unless ``free_memristors`` is set, in which case
    they become unknowns and the least-squares steps keep them near the guess.
    """
    _require_dc(model)
    lay = model.layout
    counts = lay.counts
    x0 = initial_vector(model, guess)
    fixed = np.zeros(model.dim, dtype=bool)
    fixed[lay.i_q.start: lay.i_q.start + lay.n_mc] = True
    fixed[lay.v_phi.start: lay.v_phi.start + lay.n_wl] = True
    x0[fixed] = 0.0
    if not free_memristors:
        fixed[lay.q_mc.start: lay.q_mc.start + counts[C.QMEMRISTOR]] = True
        fixed[lay.phi_wl.start: lay.phi_wl.start + counts[C.PHIMEMRISTOR]] = True
    free = ~fixed

    def full(z):
        x = x0.copy()
        x[free] = z
        return x

    def fun(z):
        return model.rhs(full(z))[model.alg_rows]

    def jac(z):
        return model.jacobian(full(z))[model.alg_rows][:, free]

    res = newton.solve(fun, jac, x0[free], tol=tol, maxiter=maxiter)
    return EquilibriumPoint(model.vector(full(res.x)), res.residual_norm, res.iterations,
                            res.corank, free_memristors)
