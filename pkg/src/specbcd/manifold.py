"""Geometry primitives for orthogonal and Stiefel factors.

Points are n-by-k matrices with orthonormal columns (k = n gives the
orthogonal group).  Tangent vectors at X are the matrices V with
X'V + V'X = 0, and all inner products are the trace inner product
inherited from the ambient matrix space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError

ORTH_TOL = 1e-10        # construction tolerance on ||Q'Q - I||_F
OFF_MANIFOLD_TOL = 1e-8  # operand tolerance before operations refuse
TANGENT_TOL = 1e-10


def sym(a):
    """Symmetric part (A + A') / 2."""
    return 0.5 * (a + a.T)


def orth_defect(factor):
    """Frobenius norm of Q'Q - I."""
    k = factor.shape[1]
    return float(np.linalg.norm(factor.T @ factor - np.eye(k)))


def fix_column_signs(q):
    """Flip columns so each column's largest-magnitude entry is positive.

    Breaks the per-column sign ambiguity of QR and eigenvector factorizations
    deterministically; ties resolve to the first maximal row index.
    """
    lead = np.abs(q).argmax(axis=0)
    signs = np.sign(q[lead, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True)
class ManifoldPoint:
    """An n-by-k factor with orthonormal columns."""

    factor: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factor, dtype=float)
        if f.ndim != 2:
            raise ValueError(f"factor must be a matrix, got ndim={f.ndim}")
        if f.shape[0] < f.shape[1]:
            raise ValueError(f"factor must be tall or square, got shape {f.shape}")
        defect = orth_defect(f)
        if defect > ORTH_TOL:
            raise ValueError(
                f"factor is not orthonormal: ||Q'Q - I||_F = {defect:.3e} > {ORTH_TOL:g}"
            )
        object.__setattr__(self, "factor", f)

    @property
    def n(self):
        return self.factor.shape[0]

    @property
    def k(self):
        return self.factor.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """An element of the tangent space at ``base``."""

    data: np.ndarray
    base: ManifoldPoint

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.shape != self.base.factor.shape:
            raise ValueError(
                f"tangent data shape {d.shape} does not match base {self.base.factor.shape}"
            )
        x = self.base.factor
        defect = np.linalg.norm(x.T @ d + d.T @ x)
        if defect > TANGENT_TOL * max(1.0, float(np.linalg.norm(d))):
            raise ValueError(f"not tangent at base: ||X'V + V'X|| = {defect:.3e}")
        object.__setattr__(self, "data", d)

    @property
    def norm(self):
        return float(np.linalg.norm(self.data))


def _same_base(u: TangentVector, v: TangentVector) -> bool:
    return u.base is v.base or np.array_equal(u.base.factor, v.base.factor)


def project_array(q, v):
    """Orthogonal projection of an ambient matrix onto the tangent space at q."""
    return v - q @ sym(q.T @ v)


def tangent_project(x: ManifoldPoint, v) -> TangentVector:
    """Project an ambient n-by-k matrix onto the tangent space at ``x``.

    Uses v - X sym(X'v); the removed component is orthogonal to every tangent
    vector at x in the trace inner product.
    """
    v = np.asarray(v, dtype=float)
    q = x.factor
    if v.shape != q.shape:
        raise ValueError(f"ambient shape {v.shape} does not match point {q.shape}")
    if orth_defect(q) > OFF_MANIFOLD_TOL:
        raise ValueError("base point drifted off the manifold beyond tolerance")
    return TangentVector(project_array(q, v), x)


def qr_factor(a):
    """Thin QR orthogonal factor with the R-diagonal-positive normalization."""
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r)
    if np.any(np.abs(diag) <= 1e-13 * max(1.0, float(np.abs(diag).max(initial=0.0)))):
        raise NumericError("rank-deficient QR factor in retraction")
    return q * np.where(diag < 0, -1.0, 1.0)


def nearest_orthogonal(a):
    """Polar factor of ``a``: the closest matrix with orthonormal columns."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[-1] <= 1e-13 * max(1.0, s[0]):
        raise NumericError("singular polar factor: input is rank deficient")
    return u @ vt


def retract_array(q, v, method="qr"):
    """Retraction on raw arrays; see :func:`retract`."""
    if not np.any(v):
        return q.copy()
    if method == "qr":
        return qr_factor(q + v)
    if method == "polar":
        return nearest_orthogonal(q + v)
    raise ValueError(f"unknown retraction method {method!r}")


def retract(x: ManifoldPoint, v: TangentVector, method="qr") -> ManifoldPoint:
    """Map the tangent vector ``v`` at ``x`` back onto the manifold.

    Both variants agree with x + v to first order; the QR variant uses the
    R-diagonal-positive normalization so that retract(x, 0) = x exactly.
    """
    if v.base is not x and not np.array_equal(v.base.factor, x.factor):
        raise ValueError("tangent vector is not based at x")
    return ManifoldPoint(retract_array(x.factor, v.data, method))


def inner(x: ManifoldPoint, u: TangentVector, v: TangentVector) -> float:
    """Trace inner product <u, v> of two tangent vectors at ``x``."""
    if not (_same_base(u, v) and np.array_equal(u.base.factor, x.factor)):
        raise ValueError("mismatched base points")
    return float(np.sum(u.data * v.data))


def random_point(n, rng, k=None) -> ManifoldPoint:
    """Draw a random orthonormal factor, deterministic given the generator.

    QR of a standard Gaussian matrix followed by the column sign convention.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    k = n if k is None else k
    g = rng.standard_normal((n, k))
    return ManifoldPoint(fix_column_signs(qr_factor(g)))
