"""Consistent initialization and fixed-step implicit Euler integration."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import newton
from .errors import ExpressionDomainError, InconsistentInitialDataError, NonConvergenceError
from .model import SemistateModel, SemistateVector


class DegenerateConfigurationWarning(UserWarning):
    pass


def consistent_initialization(model: SemistateModel, q_mc0=None, phi_wl0=None, t0: float = 0.0,
                              tol: float = newton.DEFAULT_TOL) -> SemistateVector:
    """Branch voltages and currents consistent with given charges and fluxes."""
    lay = model.layout
    x0 = np.zeros(model.dim)
    if q_mc0 is not None:
        x0[lay.q_mc] = np.asarray(q_mc0, dtype=float)
    if phi_wl0 is not None:
        x0[lay.phi_wl] = np.asarray(phi_wl0, dtype=float)
    cols = lay.branch_cols

    def full(z):
        x = x0.copy()
        x[cols] = z
        return x

    def fun(z):
        return model.rhs(full(z), t0)[model.alg_rows]

    def jac(z):
        return model.jacobian(full(z), t0)[model.alg_rows, cols]

    try:
        res = newton.solve(fun, jac, x0[cols], tol=tol)
    except NonConvergenceError as err:
        raise InconsistentInitialDataError(
            f"no branch solution for the given charges/fluxes: {err}") from err
    if res.corank:
        warnings.warn(f"branch Jacobian is singular at the initial point (corank {res.corank})",
                      DegenerateConfigurationWarning, stacklevel=2)
    return model.vector(full(res.x))


@dataclass
class Trajectory:
    names: list
    times: np.ndarray
    states: np.ndarray  # one row per sample
    residual_norms: np.ndarray
    failure_index: Optional[int] = None
    failure: Optional[str] = None

    @property
    def ok(self):
        return self.failure_index is None

    def column(self, name):
        return self.states[:, self.names.index(name)]

    def write_csv(self, handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", *self.names, "residual"])
        for t, row, r in zip(self.times, self.states, self.residual_norms):
            writer.writerow([format(v, ".17g") for v in (t, *row, r)])


def _time_grid(t0, t1, h):
    n = max(1, math.ceil((t1 - t0) / h - 1e-9))
    grid = t0 + h * np.arange(n + 1)
    grid[-1] = min(grid[-1], t1)
    return grid


def integrate(model: SemistateModel, x0, t_span, h: float,
              tol: float = newton.DEFAULT_TOL, maxiter: int = newton.DEFAULT_MAXITER) -> Trajectory:
    """Implicit Euler with step ``h`` over ``t_span = (t0, t1)``.

    Each step solves the charge/flux update together with the algebraic rows
    at the new time, warm-started from the previous sample. On a Newton
    failure the samples computed so far are returned with ``failure_index``
    set to the step that failed.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    grid = _time_grid(t0, t1, h)
    n = model.layout.n_diff
    x = np.array(x0.values if isinstance(x0, SemistateVector) else x0, dtype=float)
    states = [x.copy()]
    norms = [model.alg_residual_norm(x, t0)]
    H = model.H
    for k in range(1, len(grid)):
        t_new, step = grid[k], grid[k] - grid[k - 1]
        x_prev = x

        def fun(z, x_prev=x_prev, t_new=t_new, step=step):
            r = model.rhs(z, t_new)
            r[:n] = (z[:n] - x_prev[:n]) - step * r[:n]
            return r

        def jac(z, t_new=t_new, step=step):
            K = model.jacobian(z, t_new)
            K[:n] = H[:n] - step * K[:n]
            return K

        try:
            res = newton.solve(fun, jac, x_prev, tol=tol, maxiter=maxiter, final_corank=False)
        except (NonConvergenceError, ExpressionDomainError) as err:
            return Trajectory(model.names(), grid[:k], np.array(states), np.array(norms), k, str(err))
        x = res.x
        states.append(x.copy())
        norms.append(model.alg_residual_norm(x, t_new))
    return Trajectory(model.names(), grid, np.array(states), np.array(norms))
