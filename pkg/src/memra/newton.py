"""Damped Gauss-Newton iteration shared by equilibrium, initialization and stepping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExpressionDomainError, NonConvergenceError, SingularJacobianError

DEFAULT_TOL = 1e-10
DEFAULT_MAXITER = 50
MAX_HALVINGS = 20
STEP_RANK_TOL = 1e-10


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    corank: int  # rank deficiency of the last Newton matrix


def _norm(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def _step(J, r):
    if J.size == 0:
        return np.zeros(J.shape[1]), J.shape[1]
    dx, _, rank, _ = np.linalg.lstsq(J, -r, rcond=STEP_RANK_TOL)
    return dx, J.shape[1] - int(rank)


def solve(fun, jac, x0, tol=DEFAULT_TOL, maxiter=DEFAULT_MAXITER, final_corank=True) -> NewtonResult:
    """Drive ``fun(x)`` to ``||.||_inf <= tol`` from ``x0``.

    Steps are minimum-norm least-squares solutions, so the iteration also
    works on consistent overdetermined or rank-deficient systems. Each step is
    halved up to ``MAX_HALVINGS`` times until the residual norm decreases.

    Raises :class:`SingularJacobianError` when the iteration stalls on a
    rank-deficient Newton matrix, :class:`NonConvergenceError` otherwise.
    With ``final_corank`` the corank of the Newton matrix at the solution is
    reported; otherwise that of the last step taken.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    norm = _norm(r)
    corank = 0
    it = 0
    while norm > tol:
        if it >= maxiter:
            exc = SingularJacobianError if corank else NonConvergenceError
            raise exc("Newton iteration did not converge", norm, it, corank)
        dx, corank = _step(np.asarray(jac(x), dtype=float), r)
        it += 1
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_try = x + alpha * dx
            try:
                r_try = np.asarray(fun(x_try), dtype=float)
            except ExpressionDomainError:
                alpha *= 0.5
                continue
            n_try = _norm(r_try)
            if np.isfinite(n_try) and n_try < norm:
                break
            alpha *= 0.5
        else:
            exc = SingularJacobianError if corank else NonConvergenceError
            raise exc("Newton step failed to reduce the residual", norm, it, corank)
        x, r, norm = x_try, r_try, n_try
    if final_corank:
        J = np.asarray(jac(x), dtype=float)
        corank = _step(J, np.zeros(J.shape[0]))[1]
    return NewtonResult(x, norm, it, corank)
