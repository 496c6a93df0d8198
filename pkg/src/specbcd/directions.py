"""Stationarity measures and their minimizing directions.

Each measure is the optimal value of a linearized descent subproblem over the
unit ball: minimize <grad f, d> subject to zero inner products with equality
gradients and nonpositive inner products with almost-active inequality
gradients.  By strong duality the value equals

    min || grad f + sum lam_i grad c_i + sum mu_j grad g_j ||,  mu >= 0,

a small dense nonnegative least-squares problem, and the minimizing direction
is the negated normalized residual.  Factor-block gradients enter after
tangent projection, so plain Euclidean inner products of the stacked vectors
realize the block metric.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lsq
from .exceptions import LicqError
from .manifold import ManifoldPoint, TangentVector, project_array

DEGENERATE_RESIDUAL = 1e-14


@dataclass(frozen=True)
class DirectionResult:
    """Measure value, certified descent direction, and multipliers.

    ``direction_x`` is None for the y-block measure and ``direction_y`` is
    None for the x-block measure; the joint measure fills both.  The
    inequality multipliers are indexed over the full inequality vector and
    vanish off the almost-active set.
    """

    measure: float
    direction_x: Optional[TangentVector]
    direction_y: Optional[np.ndarray]
    multipliers_eq: np.ndarray
    multipliers_ineq: np.ndarray
    active_set: np.ndarray


def active_set(gvals, delta):
    """Indices of the delta-almost-active inequalities: g_j >= -delta.

    Slightly positive values (feasibility-tolerance violations) count as
    active as well.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    gvals = np.asarray(gvals, dtype=float)
    return np.flatnonzero(gvals >= -delta)


def _nnls_cap(n_eq, n_active):
    return max(50, 10 * (n_eq + n_active) ** 2)


def _normalize(r, measure):
    if measure <= DEGENERATE_RESIDUAL:
        return np.zeros_like(r), 0.0
    return -r / measure, measure


def measure_x(problem, q, lam) -> DirectionResult:
    """Factor-block stationarity: descent over the tangent space subject to
    zero inner products with the projected equality gradients."""
    qa = q.factor if isinstance(q, ManifoldPoint) else np.asarray(q, dtype=float)
    gq_amb, _ = problem.grad_f(qa, lam)
    b = project_array(qa, gq_amb).ravel()
    if problem.p:
        gq, _ = problem.c_jac(qa, lam)
        cols = np.stack([project_array(qa, gq[i]) for i in range(problem.p)])
        cmat = cols.reshape(problem.p, -1).T
        sv = np.linalg.svd(cmat, compute_uv=False)
        if sv.size and sv[-1] <= sv[0] * 1e-12:
            raise LicqError(
                "equality gradients are dependent on the tangent space",
                lsq.dependency_indices(cmat.T),
            )
    else:
        cmat = None
    r, mult, _ = lsq.residual_min(b, cmat, None)
    measure = float(np.linalg.norm(r))
    d, measure = _normalize(r, measure)
    # exact arithmetic leaves d tangent already; re-projecting scrubs roundoff
    d = project_array(qa, d.reshape(qa.shape))
    point = q if isinstance(q, ManifoldPoint) else ManifoldPoint(qa)
    return DirectionResult(
        measure=measure,
        direction_x=TangentVector(d, point),
        direction_y=None,
        multipliers_eq=mult,
        multipliers_ineq=np.zeros(0),
        active_set=np.zeros(0, dtype=int),
    )


def measure_y(problem, q, lam, delta) -> DirectionResult:
    """Eigenvalue-block stationarity with delta-almost-active inequalities."""
    qa = q.factor if isinstance(q, ManifoldPoint) else np.asarray(q, dtype=float)
    _, gy = problem.grad_f(qa, lam)
    b = np.asarray(gy, dtype=float)
    cmat = None
    if problem.p:
        _, gy_c = problem.c_jac(qa, lam)
        cmat = gy_c.T
    act = np.zeros(0, dtype=int)
    nmat = None
    mu_full = np.zeros(problem.n_ineq)
    if problem.n_ineq:
        act = active_set(problem.g_values(qa, lam), delta)
        if act.size:
            _, hy = problem.g_jac(qa, lam)
            nmat = hy[act].T
    cap = _nnls_cap(problem.p, act.size)
    r, mult, mu = lsq.residual_min(b, cmat, nmat, maxiter=cap)
    measure = float(np.linalg.norm(r))
    d, measure = _normalize(r, measure)
    if act.size:
        mu_full[act] = mu
    return DirectionResult(
        measure=measure,
        direction_x=None,
        direction_y=d,
        multipliers_eq=mult,
        multipliers_ineq=mu_full,
        active_set=act,
    )


def measure_kkt(problem, q, lam, delta) -> DirectionResult:
    """Joint stationarity over the product of the tangent space and R^n."""
    qa = q.factor if isinstance(q, ManifoldPoint) else np.asarray(q, dtype=float)
    gq_amb, gy = problem.grad_f(qa, lam)
    b = np.concatenate([project_array(qa, gq_amb).ravel(), gy])
    k = qa.size

    cmat = None
    if problem.p:
        gq, gy_c = problem.c_jac(qa, lam)
        cmat = np.empty((b.size, problem.p))
        for i in range(problem.p):
            cmat[:k, i] = project_array(qa, gq[i]).ravel()
            cmat[k:, i] = gy_c[i]

    act = np.zeros(0, dtype=int)
    nmat = None
    mu_full = np.zeros(problem.n_ineq)
    if problem.n_ineq:
        act = active_set(problem.g_values(qa, lam), delta)
        if act.size:
            hq, hy = problem.g_jac(qa, lam)
            nmat = np.empty((b.size, act.size))
            for j, row in enumerate(act):
                nmat[:k, j] = project_array(qa, hq[row]).ravel()
                nmat[k:, j] = hy[row]

    cap = _nnls_cap(problem.p, act.size)
    r, mult, mu = lsq.residual_min(b, cmat, nmat, maxiter=cap)
    measure = float(np.linalg.norm(r))
    d, measure = _normalize(r, measure)
    dxb = project_array(qa, d[:k].reshape(qa.shape))
    if act.size:
        mu_full[act] = mu
    point = q if isinstance(q, ManifoldPoint) else ManifoldPoint(qa)
    return DirectionResult(
        measure=measure,
        direction_x=TangentVector(dxb, point),
        direction_y=d[k:],
        multipliers_eq=mult,
        multipliers_ineq=mu_full,
        active_set=act,
    )
