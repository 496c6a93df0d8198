"""Feasibility restoration onto the constraint slices.

Three projections back up the solver's line searches:

* ``project_y``: nearest point in the eigenvalue-block feasible slice with
  the factor fixed.  When every row is affine in lam the projection is solved
  exactly as one least-distance problem; otherwise linearized corrections are
  iterated.
* ``project_x``: factor-block restoration with lam fixed, alternating a
  least-norm linearized correction in ambient space with the exact polar
  projection back onto the manifold.
* ``project_joint``: the same alternation over the product space.

All successful reports certify residuals at or below ``tol_feas``; failures
signal the caller to shrink its trial step.  ``penalty_project`` is the
gradient-descent fallback on the squared equality residual.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lsq
from .exceptions import NumericError
from .manifold import ManifoldPoint, nearest_orthogonal, project_array, retract_array

TOL_FEAS = 1e-9
MAX_RESTORE = 200


@dataclass(frozen=True)
class ProjectionReport:
    """Outcome of one restoration call.

    ``ok`` is True only when both residuals meet ``tol_feas``; ``moved`` is
    the distance from the query point in the blocks the call was allowed to
    change.
    """

    q: Optional[np.ndarray]
    lam: np.ndarray
    residual_eq: float
    residual_ineq: float
    moved: float
    iterations: int
    method: str
    ok: bool


def _factor(x):
    return x.factor if isinstance(x, ManifoldPoint) else np.asarray(x, dtype=float)


def _project_rows(q, mats):
    """Tangent-project a stack of ambient factor-block gradients at q.

    Correction steps are built from these rows so they stay tangent: a step
    with a normal component would be wiped by the later manifold projection,
    which can stall the alternation entirely.
    """
    qtm = np.einsum("ij,kil->kjl", q, mats)
    sym_part = 0.5 * (qtm + np.transpose(qtm, (0, 2, 1)))
    return mats - np.einsum("ij,kjl->kil", q, sym_part)


def project_y(y, x, problem, fallback=None, tol_feas=TOL_FEAS,
              max_restore=MAX_RESTORE) -> ProjectionReport:
    """Project ``y`` onto the eigenvalue-block feasible slice at fixed ``x``.

    With affine rows this is the exact polyhedral projection; otherwise
    linearized least-norm corrections run until the residuals clear
    ``tol_feas``.  If a ``fallback`` (the caller's last feasible y) is closer
    to the query than the computed point, the fallback is returned with the
    rejection flag set.
    """
    q = _factor(x)
    y = np.asarray(y, dtype=float).copy()
    y2 = y.copy()
    iters = 0
    if problem.y_affine is not None:
        aff = problem.y_affine(q)
        y2, feasible = lsq.project_polyhedron(
            y, aff.eq_mat, aff.eq_rhs, aff.ineq_mat, aff.ineq_rhs
        )
        iters = 1
        method = "polyhedral"
        if not feasible:
            return _rejected_y(q, y, fallback, problem, iters, method)
    else:
        method = "alternating"
        for iters in range(1, max_restore + 1):
            cv = problem.c_values(q, y2)
            gv = problem.g_values(q, y2)
            req = float(np.linalg.norm(cv)) if cv.size else 0.0
            rin = float(gv.max(initial=0.0))
            if req <= tol_feas and rin <= tol_feas:
                break
            jeq = problem.c_jac(q, y2)[1] if problem.p else None
            jin = problem.g_jac(q, y2)[1] if problem.n_ineq else None
            u = lsq.least_norm_correction(
                jeq, -cv if cv.size else np.zeros(0),
                jin, -gv if gv.size else None,
            )
            if u is None:
                return _rejected_y(q, y, fallback, problem, iters, method)
            y2 = y2 + u
        else:
            return _rejected_y(q, y, fallback, problem, iters, method)

    req, rin = problem.residuals(q, y2)
    ok = req <= tol_feas and rin <= tol_feas
    if not ok:
        return _rejected_y(q, y, fallback, problem, iters, method)
    moved = float(np.linalg.norm(y2 - y))
    if fallback is not None:
        fb = np.asarray(fallback, dtype=float)
        if moved > np.linalg.norm(fb - y) + 1e-12:
            return _rejected_y(q, y, fb, problem, iters, method)
    return ProjectionReport(None, y2, req, rin, moved, iters, method, True)


def _rejected_y(q, y, fallback, problem, iters, method):
    pt = np.asarray(fallback, dtype=float) if fallback is not None else y
    req, rin = problem.residuals(q, pt)
    return ProjectionReport(
        None, pt.copy(), req, rin, float(np.linalg.norm(pt - y)), iters, method, False
    )


def _licq_guard_rows(jac, indices):
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv.size and sv[-1] <= sv[0] * 1e-12:
        raise NumericError(
            f"restoration Jacobian is rank deficient on rows {list(indices)}"
        )


def project_x(x_query, y, problem, tol_feas=TOL_FEAS,
              max_restore=MAX_RESTORE) -> ProjectionReport:
    """Restore factor-block feasibility at fixed ``y``.

    Alternates a least-norm linearized correction for the equality rows (and
    any factor-dependent inequality rows) with the exact polar projection
    back onto the manifold.
    """
    q0 = _factor(x_query)
    lam = np.asarray(y, dtype=float)
    q = nearest_orthogonal(q0)
    n = q.shape[0]
    xdep = np.asarray(problem.x_dep_rows, dtype=int)
    prev_res = np.inf
    rising = 0
    iters = 0
    for iters in range(max_restore + 1):
        cv = problem.c_values(q, lam)
        gv = problem.g_values(q, lam)
        gx = gv[xdep] if xdep.size else np.zeros(0)
        res = max(
            float(np.linalg.norm(cv)) if cv.size else 0.0,
            float(gx.max(initial=0.0)),
        )
        if res <= tol_feas:
            break
        if res > prev_res:
            rising += 1
            if rising >= 3:
                break
        else:
            rising = 0
        prev_res = res
        jeq = None
        if problem.p:
            gq, _ = problem.c_jac(q, lam)
            jeq = _project_rows(q, gq).reshape(problem.p, -1)
            _licq_guard_rows(jeq, range(problem.p))
        jin = None
        bin_rhs = None
        if xdep.size:
            hq, _ = problem.g_jac(q, lam)
            jin = _project_rows(q, hq[xdep]).reshape(xdep.size, -1)
            bin_rhs = -gv[xdep]
        d = lsq.least_norm_correction(
            jeq, -cv if cv.size else np.zeros(0), jin, bin_rhs
        )
        if d is None:
            break
        q = nearest_orthogonal(q + d.reshape(n, n))
    req, rin = problem.residuals(q, lam)
    ok = req <= tol_feas and rin <= tol_feas
    moved = float(np.linalg.norm(q - q0))
    return ProjectionReport(q, lam.copy(), req, rin, moved, iters, "alternating", ok)


def project_joint(x_query, y_query, problem, tol_feas=TOL_FEAS,
                  max_restore=MAX_RESTORE) -> ProjectionReport:
    """Restore joint feasibility over the product space.

    Each pass computes the least-norm ambient correction that solves the
    linearized equality rows and keeps every linearized inequality row
    nonpositive, then projects the factor back onto the manifold.
    """
    q0 = _factor(x_query)
    y0 = np.asarray(y_query, dtype=float)
    q = nearest_orthogonal(q0)
    lam = y0.copy()
    n = q.shape[0]
    k = q.size
    prev_res = np.inf
    rising = 0
    iters = 0
    for iters in range(max_restore + 1):
        cv = problem.c_values(q, lam)
        gv = problem.g_values(q, lam)
        req = float(np.linalg.norm(cv)) if cv.size else 0.0
        rin = float(gv.max(initial=0.0)) if gv.size else 0.0
        res = max(req, rin)
        if res <= tol_feas:
            break
        if res > prev_res:
            rising += 1
            if rising >= 3:
                break
        else:
            rising = 0
        prev_res = res
        jeq = None
        if problem.p:
            gq, gy = problem.c_jac(q, lam)
            jeq = np.hstack([_project_rows(q, gq).reshape(problem.p, -1), gy])
            _licq_guard_rows(jeq, range(problem.p))
        jin = None
        if problem.n_ineq:
            hq, hy = problem.g_jac(q, lam)
            jin = np.hstack(
                [_project_rows(q, hq).reshape(problem.n_ineq, -1), hy]
            )
        d = lsq.least_norm_correction(
            jeq, -cv if cv.size else np.zeros(0),
            jin, -gv if gv.size else None,
        )
        if d is None:
            break
        q = nearest_orthogonal(q + d[:k].reshape(n, n))
        lam = lam + d[k:]
    req, rin = problem.residuals(q, lam)
    ok = req <= tol_feas and rin <= tol_feas
    moved = float(np.sqrt(np.linalg.norm(q - q0) ** 2 + np.linalg.norm(lam - y0) ** 2))
    return ProjectionReport(q, lam, req, rin, moved, iters, "alternating", ok)


def penalty_project(x_query, y, problem, pen=None, pen_grad=None,
                    tol_feas=TOL_FEAS, max_iter=MAX_RESTORE) -> ProjectionReport:
    """Fallback restoration: descend a penalty on the equality residual.

    Runs Riemannian gradient descent with Armijo backtracking on
    P(c(x, y)) over the manifold, starting from the query factor.  The
    default penalty is half the squared norm.
    """
    if pen is None:
        pen = lambda cv: 0.5 * float(cv @ cv)
        pen_grad = lambda cv: cv
    elif pen_grad is None:
        raise ValueError("a custom penalty needs its gradient")
    q0 = _factor(x_query)
    lam = np.asarray(y, dtype=float)
    q = nearest_orthogonal(q0)
    n = q.shape[0]
    iters = 0
    for iters in range(max_iter + 1):
        cv = problem.c_values(q, lam)
        if float(np.linalg.norm(cv)) <= tol_feas:
            break
        val = pen(cv)
        gq, _ = problem.c_jac(q, lam)
        amb = np.einsum("i,ijk->jk", pen_grad(cv), gq)
        grad = project_array(q, amb)
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 <= 1e-30:
            break
        t = 1.0
        accepted = False
        for _ in range(60):
            qt = retract_array(q, -t * grad, "qr")
            if pen(problem.c_values(qt, lam)) <= val - 1e-4 * t * gnorm2:
                q = qt
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    req, rin = problem.residuals(q, lam)
    ok = req <= tol_feas and rin <= tol_feas
    moved = float(np.linalg.norm(q - q0))
    return ProjectionReport(q, lam.copy(), req, rin, moved, iters, "penalty", ok)
