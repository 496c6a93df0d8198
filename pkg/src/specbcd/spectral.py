"""Symmetric-matrix decomposition layer.

Rewrites a problem over symmetric matrices as a problem over an orthogonal
factor Q and an ordered eigenvalue vector lam, with X = Q Diag(lam) Q'.  The
chain rule gives the block gradients of any matrix function through its
Euclidean gradient:

* d/d lam_i  F(Q Diag(lam) Q') = q_i' (grad F) q_i
* ambient d/dQ F(Q Diag(lam) Q') = 2 (grad F) Q Diag(lam)   (grad F symmetric)

The decomposed problem carries the user's spectral inequalities, the ordering
rows lam_{i+1} - lam_i <= 0, and (optionally) coordinate inequality rows that
stay affine in lam for fixed Q.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import NumericError
from .manifold import ManifoldPoint, TangentVector, fix_column_signs, project_array, sym

SYM_TOL = 1e-12
ORDER_TOL = 1e-12


class SymmetricMatrix:
    """A validated real symmetric matrix; symmetrized on construction."""

    __slots__ = ("data",)

    def __init__(self, data):
        a = np.asarray(data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        self.data = sym(a)

    @property
    def n(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"SymmetricMatrix(n={self.n})"


def _mat(x):
    return x.data if isinstance(x, SymmetricMatrix) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SpectralPoint:
    """Orthogonal factor plus eigenvalues in non-increasing order."""

    q: ManifoldPoint
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        if lam.size != self.q.n or self.q.n != self.q.k:
            raise ValueError("need a square factor and a matching eigenvalue vector")
        if np.any(np.diff(lam) > ORDER_TOL):
            raise ValueError("eigenvalues must be sorted in non-increasing order")
        object.__setattr__(self, "lam", lam)

    @property
    def n(self):
        return self.lam.size

    @classmethod
    def from_blocks(cls, q_array, lam):
        """Build from raw blocks, re-sorting jointly if lam has tiny ordering slips.

        Column permutations leave Q Diag(lam) Q' unchanged, so sorting here is
        a pure representation change.
        """
        q_array = np.asarray(q_array, dtype=float)
        lam = np.asarray(lam, dtype=float).ravel()
        if np.any(np.diff(lam) > 0):
            order = np.argsort(-lam, kind="stable")
            lam = lam[order]
            q_array = q_array[:, order]
        return cls(ManifoldPoint(q_array), lam)


def eig_sorted(x) -> SpectralPoint:
    """Spectral decomposition with eigenvalues sorted non-increasing.

    Eigenvector columns get the deterministic sign convention; ties between
    repeated eigenvalues are broken by ascending column index.
    """
    a = _mat(x)
    a = sym(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    w = w[::-1]
    v = fix_column_signs(v[:, ::-1])
    return SpectralPoint(ManifoldPoint(v), w)


def reconstruct(p: SpectralPoint) -> SymmetricMatrix:
    """Q Diag(lam) Q' as a symmetric matrix."""
    return SymmetricMatrix(reconstruct_array(p.q.factor, p.lam))


def reconstruct_array(q, lam):
    return sym((q * lam) @ q.T)


def grad_lambda(nabla_f, q) -> np.ndarray:
    """Eigenvalue-block gradient: component i is q_i' (grad F) q_i."""
    g = sym(_mat(nabla_f))
    qa = q.factor if isinstance(q, ManifoldPoint) else np.asarray(q, dtype=float)
    return np.einsum("ij,ij->j", qa, g @ qa)


def grad_q_ambient(nabla_f, q, lam):
    """Ambient factor-block gradient 2 (grad F) Q Diag(lam)."""
    g = sym(_mat(nabla_f))
    qa = q.factor if isinstance(q, ManifoldPoint) else np.asarray(q, dtype=float)
    return 2.0 * (g @ qa) * np.asarray(lam, dtype=float)


def grad_q_riemannian(nabla_f, p: SpectralPoint) -> TangentVector:
    """Tangent-space gradient of lam-weighted factor dependence at ``p``."""
    amb = grad_q_ambient(nabla_f, p.q, p.lam)
    return TangentVector(project_array(p.q.factor, amb), p.q)


# ---------------------------------------------------------------------------
# Problem containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixMap:
    """Scalar function of a symmetric matrix with its Euclidean gradient.

    ``linear = (M, rhs)`` marks the affine form <M, X> - rhs, which unlocks
    the exact polyhedral projection path after decomposition.
    """

    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    linear: Optional[tuple] = None

    @staticmethod
    def linear_form(mat, rhs) -> "MatrixMap":
        mat = sym(np.asarray(mat, dtype=float))
        rhs = float(rhs)
        return MatrixMap(
            fn=lambda x, _m=mat, _r=rhs: float(np.sum(_m * x)) - _r,
            grad=lambda x, _m=mat: _m,
            linear=(mat, rhs),
        )


@dataclass(frozen=True)
class SpectralMap:
    """Scalar function of the ordered eigenvalue vector with its gradient.

    ``linear = (a, rhs)`` marks the affine form a'lam - rhs.
    """

    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    linear: Optional[tuple] = None

    @staticmethod
    def linear_form(coef, rhs) -> "SpectralMap":
        coef = np.asarray(coef, dtype=float).ravel()
        rhs = float(rhs)
        return SpectralMap(
            fn=lambda lam, _a=coef, _r=rhs: float(_a @ lam) - _r,
            grad=lambda lam, _a=coef: _a,
            linear=(coef, rhs),
        )


@dataclass(frozen=True)
class MatrixProblem:
    """Problem over symmetric matrices: objective, coordinate equalities,
    spectral inequalities, and optional affine coordinate inequalities."""

    n: int
    objective: MatrixMap
    equalities: Sequence[MatrixMap] = ()
    spectral_ineqs: Sequence[SpectralMap] = ()
    coord_ineqs: Sequence[MatrixMap] = ()

    @property
    def p(self):
        return len(self.equalities)

    @property
    def s(self):
        return len(self.spectral_ineqs)

    def audit_gradients(self, rng=0, cases=5, step=1e-6, rtol=1e-5):
        """Central finite-difference check of every gradient callback."""
        rng = np.random.default_rng(rng)
        maps = [self.objective, *self.equalities, *self.coord_ineqs]
        for _ in range(cases):
            x = sym(rng.standard_normal((self.n, self.n)))
            for m in maps:
                g = sym(np.asarray(m.grad(x), dtype=float))
                d = sym(rng.standard_normal((self.n, self.n)))
                d /= np.linalg.norm(d)
                fd = (m.fn(x + step * d) - m.fn(x - step * d)) / (2 * step)
                an = float(np.sum(g * d))
                if abs(fd - an) > rtol * max(1.0, abs(fd)):
                    raise NumericError(
                        f"matrix gradient audit failed: fd={fd:.6e} analytic={an:.6e}"
                    )
            lam = rng.standard_normal(self.n)
            for m in self.spectral_ineqs:
                g = np.asarray(m.grad(lam), dtype=float)
                d = rng.standard_normal(self.n)
                d /= np.linalg.norm(d)
                fd = (m.fn(lam + step * d) - m.fn(lam - step * d)) / (2 * step)
                an = float(g @ d)
                if abs(fd - an) > rtol * max(1.0, abs(fd)):
                    raise NumericError(
                        f"spectral gradient audit failed: fd={fd:.6e} analytic={an:.6e}"
                    )


class YAffine:
    """Affine description of the lam-block constraints for a fixed factor.

    Equality rows E lam = d and inequality rows A lam <= b, with the
    inequality rows ordered exactly like the stacked inequality vector.
    """

    __slots__ = ("eq_mat", "eq_rhs", "ineq_mat", "ineq_rhs")

    def __init__(self, eq_mat, eq_rhs, ineq_mat, ineq_rhs):
        self.eq_mat = eq_mat
        self.eq_rhs = eq_rhs
        self.ineq_mat = ineq_mat
        self.ineq_rhs = ineq_rhs


@dataclass
class BlockProblem:
    """Decomposed problem over (Q, y) with stacked constraint callbacks.

    Jacobian callbacks return ambient factor-block gradients; callers project
    onto the tangent space where Riemannian quantities are needed.  Inequality
    rows are stacked [user spectral rows; ordering rows; coordinate rows] and
    ``x_dep_rows`` lists the rows whose factor-block gradient can be nonzero.
    """

    n: int
    dim_y: int
    f: Callable
    grad_f: Callable
    p: int = 0
    c: Optional[Callable] = None
    c_jac: Optional[Callable] = None
    n_ineq: int = 0
    g: Optional[Callable] = None
    g_jac: Optional[Callable] = None
    x_dep_rows: tuple = ()
    y_affine: Optional[Callable] = None
    n_spectral: int = 0
    n_ordering: int = 0
    n_coord: int = 0

    def c_values(self, q, lam):
        if self.p == 0:
            return np.zeros(0)
        return np.asarray(self.c(q, lam), dtype=float).ravel()

    def g_values(self, q, lam):
        if self.n_ineq == 0:
            return np.zeros(0)
        return np.asarray(self.g(q, lam), dtype=float).ravel()

    def residuals(self, q, lam):
        """(equality norm, positive-part max of the inequalities)."""
        cv = self.c_values(q, lam)
        gv = self.g_values(q, lam)
        req = float(np.linalg.norm(cv)) if cv.size else 0.0
        rin = float(np.max(gv.clip(min=0.0))) if gv.size else 0.0
        return req, rin

    def is_feasible(self, q, lam, tol):
        req, rin = self.residuals(q, lam)
        return req <= tol and rin <= tol


def _ordering_rows(n):
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d


def decompose(mp: MatrixProblem) -> BlockProblem:
    """Rewrite a matrix problem over the factor/eigenvalue blocks.

    All gradients are wired through the chain rule above.  When every
    constraint carries affine data the result exposes ``y_affine`` so
    projections can use the exact polyhedral path.
    """
    n = mp.n
    s = mp.s
    n_coord = len(mp.coord_ineqs)
    order = _ordering_rows(n) if n > 1 else np.zeros((0, n))
    n_ord = order.shape[0]
    m = s + n_ord + n_coord

    all_linear = (
        all(e.linear is not None for e in mp.equalities)
        and all(g.linear is not None for g in mp.spectral_ineqs)
        and all(h.linear is not None for h in mp.coord_ineqs)
    )

    obj = mp.objective

    def f(q, lam):
        return float(obj.fn(reconstruct_array(q, lam)))

    def grad_f(q, lam):
        gmat = sym(np.asarray(obj.grad(reconstruct_array(q, lam)), dtype=float))
        return grad_q_ambient(gmat, q, lam), grad_lambda(gmat, q)

    if all_linear:
        eq_mats = np.array([e.linear[0] for e in mp.equalities]).reshape(mp.p, n, n)
        eq_rhs = np.array([e.linear[1] for e in mp.equalities], dtype=float)
        spec_mat = (
            np.array([g.linear[0] for g in mp.spectral_ineqs]).reshape(s, n)
            if s else np.zeros((0, n))
        )
        spec_rhs = np.array([g.linear[1] for g in mp.spectral_ineqs], dtype=float)
        co_mats = (
            np.array([h.linear[0] for h in mp.coord_ineqs]).reshape(n_coord, n, n)
            if n_coord else np.zeros((0, n, n))
        )
        co_rhs = np.array([h.linear[1] for h in mp.coord_ineqs], dtype=float)

        def coeffs(q, mats):
            # row k, column j: q_j' M_k q_j
            return np.einsum("ij,kij->kj", q, mats @ q) if len(mats) else np.zeros((0, n))

        def c(q, lam):
            return coeffs(q, eq_mats) @ lam - eq_rhs

        def c_jac(q, lam):
            mq = eq_mats @ q
            gq = 2.0 * mq * lam[None, None, :]
            gy = np.einsum("ij,kij->kj", q, mq)
            return gq, gy

        def g(q, lam):
            parts = [spec_mat @ lam - spec_rhs, order @ lam]
            if n_coord:
                parts.append(coeffs(q, co_mats) @ lam - co_rhs)
            return np.concatenate(parts)

        def g_jac(q, lam):
            hq = np.zeros((m, n, n))
            hy = np.vstack([spec_mat, order]) if s + n_ord else np.zeros((0, n))
            if n_coord:
                mq = co_mats @ q
                hq[s + n_ord:] = 2.0 * mq * lam[None, None, :]
                hy = np.vstack([hy, np.einsum("ij,kij->kj", q, mq)])
            return hq, hy

        def y_affine(q):
            a_rows = [spec_mat, order]
            b_rows = [spec_rhs, np.zeros(n_ord)]
            if n_coord:
                a_rows.append(coeffs(q, co_mats))
                b_rows.append(co_rhs)
            return YAffine(
                coeffs(q, eq_mats), eq_rhs.copy(),
                np.vstack(a_rows), np.concatenate(b_rows),
            )
    else:
        eq_maps = list(mp.equalities)
        co_maps = list(mp.coord_ineqs)
        spec_maps = list(mp.spectral_ineqs)

        def c(q, lam):
            x = reconstruct_array(q, lam)
            return np.array([e.fn(x) for e in eq_maps], dtype=float)

        def c_jac(q, lam):
            x = reconstruct_array(q, lam)
            gq = np.empty((mp.p, n, n))
            gy = np.empty((mp.p, n))
            for i, e in enumerate(eq_maps):
                gmat = sym(np.asarray(e.grad(x), dtype=float))
                gq[i] = grad_q_ambient(gmat, q, lam)
                gy[i] = grad_lambda(gmat, q)
            return gq, gy

        def g(q, lam):
            vals = [gm.fn(lam) for gm in spec_maps]
            vals.extend(order @ lam)
            if co_maps:
                x = reconstruct_array(q, lam)
                vals.extend(h.fn(x) for h in co_maps)
            return np.asarray(vals, dtype=float)

        def g_jac(q, lam):
            hq = np.zeros((m, n, n))
            hy = np.zeros((m, n))
            for j, gm in enumerate(spec_maps):
                hy[j] = np.asarray(gm.grad(lam), dtype=float)
            hy[s:s + n_ord] = order
            if co_maps:
                x = reconstruct_array(q, lam)
                for j, h in enumerate(co_maps):
                    gmat = sym(np.asarray(h.grad(x), dtype=float))
                    hq[s + n_ord + j] = grad_q_ambient(gmat, q, lam)
                    hy[s + n_ord + j] = grad_lambda(gmat, q)
            return hq, hy

        y_affine = None

    return BlockProblem(
        n=n,
        dim_y=n,
        f=f,
        grad_f=grad_f,
        p=mp.p,
        c=c if mp.p else None,
        c_jac=c_jac if mp.p else None,
        n_ineq=m,
        g=g if m else None,
        g_jac=g_jac if m else None,
        x_dep_rows=tuple(range(s + n_ord, m)),
        y_affine=y_affine,
        n_spectral=s,
        n_ordering=n_ord,
        n_coord=n_coord,
    )
