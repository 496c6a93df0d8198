"""Dense least-squares kernels shared by the measure and projection code.

Three building blocks:

* ``residual_min`` solves min ||b + C lam + N mu|| over free lam and mu >= 0,
  which is the dual of the unit-ball linearized descent subproblems.  The
  nonnegative part goes through the Lawson-Hanson active-set solver after the
  free columns are eliminated.
* ``ldp`` solves the least-distance problem min ||u|| s.t. G u >= h via the
  classical single-NNLS reduction (Lawson & Hanson, Ch. 23).
* ``least_norm_correction`` solves min ||u|| s.t. Aeq u = beq, Ain u <= bin,
  the workhorse of feasibility restoration and polyhedral projection.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import nnls

from .exceptions import LicqError, NumericError

_RANK_RTOL = 1e-12


def _as_cols(mat, nrows):
    if mat is None:
        return np.zeros((nrows, 0))
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != nrows:
        raise ValueError(f"expected column matrix with {nrows} rows, got {mat.shape}")
    return mat


def residual_min(b, C=None, N=None, maxiter=None, cert_tol=1e-8):
    """Minimize ||b + C lam + N mu|| over lam free and mu >= 0.

    Parameters
    ----------
    b : (k,) array
    C : (k, p) array or None
        Columns multiplied by the free coefficients.
    N : (k, m) array or None
        Columns multiplied by the nonnegative coefficients.
    maxiter : int, optional
        Pivot cap handed to the active-set solver.

    Returns
    -------
    r, lam, mu : residual vector and the optimal coefficients.

    Raises
    ------
    NumericError
        If the returned point fails the first-order certificate (C'r = 0,
        N'r >= 0, complementary slackness), which covers pivot-cap overruns.
    """
    b = np.asarray(b, dtype=float).ravel()
    k = b.size
    C = _as_cols(C, k)
    N = _as_cols(N, k)
    scale = max(
        1.0,
        float(np.linalg.norm(b)),
        float(np.abs(C).max(initial=0.0)),
        float(np.abs(N).max(initial=0.0)),
    )

    if C.shape[1]:
        u, s, _ = np.linalg.svd(C, full_matrices=False)
        keep = s > s[0] * _RANK_RTOL if s.size else np.zeros(0, bool)
        basis = u[:, keep]
    else:
        basis = np.zeros((k, 0))

    def perp(m):
        return m - basis @ (basis.T @ m) if basis.shape[1] else m

    pb = perp(b)
    if N.shape[1]:
        pn = perp(N)
        try:
            mu, _ = nnls(pn, -pb, maxiter=maxiter)
        except Exception as exc:  # scipy raises RuntimeError on pivot overrun
            raise NumericError(f"nonnegative least squares failed: {exc}") from exc
        r = pb + pn @ mu
    else:
        mu = np.zeros(0)
        r = pb

    if C.shape[1]:
        lam, *_ = np.linalg.lstsq(C, r - b - N @ mu, rcond=None)
    else:
        lam = np.zeros(0)

    tol = cert_tol * scale * max(1.0, float(np.linalg.norm(r)))
    if C.shape[1] and float(np.abs(C.T @ r).max()) > tol:
        raise NumericError("dual certificate failed on the equality block")
    if N.shape[1]:
        ntr = N.T @ r
        if float(ntr.min()) < -tol or float(np.abs(mu * ntr).max()) > tol:
            raise NumericError("dual certificate failed on the inequality block")
    return r, lam, mu


def ldp(G, h, maxiter=None):
    """Least-distance problem: min ||u|| subject to G u >= h.

    Returns the minimizer, or None when the constraint system is
    (numerically) infeasible.  Solved via NNLS on [G'; h'] per Lawson-Hanson.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float).ravel()
    m, k = G.shape
    if m == 0:
        return np.zeros(k)
    if np.all(h <= 0):
        return np.zeros(k)
    e = np.vstack([G.T, h[None, :]])
    f = np.zeros(k + 1)
    f[k] = 1.0
    try:
        w, _ = nnls(e, f, maxiter=maxiter)
    except Exception as exc:
        raise NumericError(f"LDP inner solve failed: {exc}") from exc
    r = e @ w - f
    rnorm = float(np.linalg.norm(r))
    if rnorm <= 1e-10 or r[k] >= 0:
        return None  # incompatible inequalities
    u = -r[:k] / r[k]
    slack = G @ u - h
    if float(slack.min()) < -1e-7 * max(1.0, float(np.abs(h).max())):
        return None
    return u


def _rank_split(aeq, rtol=_RANK_RTOL):
    u, s, vt = np.linalg.svd(aeq, full_matrices=False)
    if s.size == 0:
        rank = 0
    else:
        rank = int(np.sum(s > s[0] * max(rtol, aeq.shape[0] * np.finfo(float).eps)))
    return u, s, vt, rank


def dependency_indices(aeq, rtol=_RANK_RTOL):
    """Row indices implicated in a rank deficiency of ``aeq`` (empty if full rank)."""
    u, s, vt, rank = _rank_split(aeq, rtol)
    p = aeq.shape[0]
    if rank >= p:
        return ()
    unull = u[:, rank:]
    weight = np.abs(unull).max(axis=1)
    return tuple(np.flatnonzero(weight > 1e-6).tolist())


def least_norm_correction(aeq, beq, ain=None, bin=None, licq_check=False,
                          feas_tol=1e-8):
    """min ||u|| s.t. Aeq u = beq and Ain u <= bin.

    Returns the minimizer or None when the system is infeasible.  The
    inequality block is handled by an LDP solve restricted (implicitly) to the
    null space of Aeq; the returned vector therefore satisfies the equalities
    to working precision.

    With ``licq_check`` a rank-deficient equality block raises
    :class:`LicqError` naming the dependent rows.
    """
    if aeq is None:
        if ain is None:
            raise ValueError("need at least one constraint block")
        aeq = np.zeros((0, np.asarray(ain).shape[1]))
        beq = np.zeros(0)
    aeq = np.asarray(aeq, dtype=float)
    beq = np.asarray(beq, dtype=float).ravel()
    p, k = aeq.shape

    if p:
        u, s, vt, rank = _rank_split(aeq)
        if rank < p and licq_check:
            raise LicqError(
                f"equality constraint gradients are dependent (rank {rank} < {p})",
                dependency_indices(aeq),
            )
        v = vt[:rank].T
        u0 = v @ ((u[:, :rank].T @ beq) / s[:rank])
        resid = float(np.linalg.norm(aeq @ u0 - beq))
        if resid > feas_tol * max(1.0, float(np.linalg.norm(beq))):
            return None  # inconsistent equalities
    else:
        v = np.zeros((k, 0))
        u0 = np.zeros(k)

    if ain is None or np.asarray(ain).shape[0] == 0:
        return u0

    ain = np.asarray(ain, dtype=float)
    bin = np.asarray(bin, dtype=float).ravel()
    # Project the inequality rows onto null(Aeq); the LDP solution then lies in
    # the span of those projected rows, hence in null(Aeq) automatically.
    if v.shape[1]:
        ain_null = ain - (ain @ v) @ v.T
    else:
        ain_null = ain
    w = ldp(-ain_null, (ain @ u0) - bin)
    if w is None:
        return None
    if v.shape[1]:
        w = w - v @ (v.T @ w)
    return u0 + w


def project_polyhedron(y, aeq, beq, ain, bin):
    """Euclidean projection of ``y`` onto {x : Aeq x = beq, Ain x <= bin}.

    Returns (point, True) or (y, False) when the polyhedron is empty.
    """
    y = np.asarray(y, dtype=float)
    rhs_eq = beq - aeq @ y if aeq is not None and len(aeq) else np.zeros(0)
    rhs_in = bin - ain @ y if ain is not None and len(ain) else None
    u = least_norm_correction(
        aeq if aeq is not None and len(aeq) else None,
        rhs_eq,
        ain if ain is not None and len(ain) else None,
        rhs_in,
    )
    if u is None:
        return y, False
    return y + u, True
