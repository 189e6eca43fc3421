"""Incremental characteristic matrices and local passivity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import ExpressionDomainError
from .netlist import Circuit, DeviceClass

C = DeviceClass

DEFAULT_DEFINITENESS_TOL = 1e-10

# matrix name -> (device class, variable the characteristic is differentiated by)
MATRIX_SPECS = {
    "M": (C.QMEMRISTOR, "i"),
    "E_m": (C.QMEMRISTOR, "q"),
    "E_c": (C.CAPACITOR, "q"),
    "R": (C.RRESISTOR, "i"),
    "W": (C.PHIMEMRISTOR, "v"),
    "R_w": (C.PHIMEMRISTOR, "phi"),
    "R_l": (C.INDUCTOR, "phi"),
    "G": (C.GRESISTOR, "v"),
}


@dataclass(frozen=True)
class CharacteristicPoint:
    """Per-device state (q or phi) and flow (i or v) values, plus time.

    Devices missing from either map are taken at zero.
    """

    state: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    t: float = 0.0

    def assignment(self, device):
        cls = device.cls
        return {
            cls.state_var: float(self.state.get(device.id, 0.0)),
            cls.flow_var: float(self.flow.get(device.id, 0.0)),
            "t": float(self.t),
        }


@dataclass(frozen=True)
class CharacteristicMatrices:
    """Diagonal characteristic matrices, stored as their diagonals."""

    M: np.ndarray
    E_m: np.ndarray
    E_c: np.ndarray
    R: np.ndarray
    W: np.ndarray
    R_w: np.ndarray
    R_l: np.ndarray
    G: np.ndarray

    def matrix(self, name):
        return np.diag(getattr(self, name))

    @property
    def C(self):
        """Incremental capacitance, or None when E_c is singular."""
        return None if np.any(self.E_c == 0.0) else np.diag(1.0 / self.E_c)

    @property
    def L(self):
        """Incremental inductance, or None when R_l is singular."""
        return None if np.any(self.R_l == 0.0) else np.diag(1.0 / self.R_l)


def characteristic_matrices(circuit: Circuit, point: CharacteristicPoint) -> CharacteristicMatrices:
    diagonals = {}
    branches = circuit.branches
    for name, (cls, var) in MATRIX_SPECS.items():
        values = []
        for d in branches:
            if d.cls is not cls:
                continue
            try:
                values.append(ex.partial(d.ast, var, point.assignment(d)))
            except ExpressionDomainError as err:
                raise ExpressionDomainError("cannot differentiate", err.subexpression, d.id) from None
        diagonals[name] = np.array(values, dtype=float)
    return CharacteristicMatrices(**diagonals)


def _min_sym_eig(P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.size == 0:
        return np.inf
    if P.shape[0] != P.shape[1]:
        raise ValueError(f"matrix must be square, got shape {P.shape}")
    return float(np.linalg.eigvalsh((P + P.T) / 2.0).min())


def is_positive_definite(P, tol: float = DEFAULT_DEFINITENESS_TOL) -> bool:
    """u^T P u > 0 for all u != 0, decided on the symmetric part of P."""
    return _min_sym_eig(P) > tol


def is_positive_semidefinite(P, tol: float = DEFAULT_DEFINITENESS_TOL) -> bool:
    return _min_sym_eig(P) >= -tol


# passivity is judged on these matrices
PASSIVITY_MATRICES = {
    C.QMEMRISTOR: "M",
    C.CAPACITOR: "E_c",
    C.RRESISTOR: "R",
    C.PHIMEMRISTOR: "W",
    C.INDUCTOR: "R_l",
    C.GRESISTOR: "G",
}


def passivity_report(circuit: Circuit, point: CharacteristicPoint, tol=DEFAULT_DEFINITENESS_TOL) -> dict:
    """Per device class: "strictly passive", "passive" or "neither".

    Classes without devices are omitted. Memristor elastance and reluctance
    carry no passivity condition and are not judged. Inductors are judged on
    the reluctance, whose definiteness matches that of the inductance.
    """
    cm = characteristic_matrices(circuit, point)
    report = {}
    for cls, name in PASSIVITY_MATRICES.items():
        P = cm.matrix(name)
        if P.size == 0:
            continue
        if is_positive_definite(P, tol):
            report[cls.token] = "strictly passive"
        elif is_positive_semidefinite(P, tol):
            report[cls.token] = "passive"
        else:
            report[cls.token] = "neither"
    return report
