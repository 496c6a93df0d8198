import numpy as np
import pytest

from specbcd import lsq
from specbcd.exceptions import LicqError
from oracles import enum_projection, enum_residual_min


def test_residual_min_matches_enumeration():
    rng = np.random.default_rng(0)
    for case in range(60):
        k = rng.integers(3, 8)
        p = int(rng.integers(0, 3))
        m = int(rng.integers(0, 5))
        b = rng.standard_normal(k)
        C = rng.standard_normal((k, p)) if p else None
        N = rng.standard_normal((k, m)) if m else None
        r, lam, mu = lsq.residual_min(b, C, N)
        expected = enum_residual_min(b, C, N)
        assert abs(np.linalg.norm(r) - expected) <= 1e-9 * (1 + expected)
        assert mu.min(initial=0.0) >= 0.0


def test_residual_min_handles_dependent_nonneg_columns():
    rng = np.random.default_rng(1)
    b = rng.standard_normal(5)
    N = rng.standard_normal((5, 2))
    N = np.hstack([N, N[:, :1]])  # duplicated column
    r, _, mu = lsq.residual_min(b, None, N)
    assert abs(np.linalg.norm(r) - enum_residual_min(b, None, N)) <= 1e-9


def test_ldp_cases():
    u = lsq.ldp(np.array([[1.0, 0.0]]), np.array([3.0]))
    assert np.allclose(u, [3.0, 0.0])
    assert lsq.ldp(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0])) is None
    # already-satisfied constraints give the zero step
    u = lsq.ldp(np.array([[1.0, 0.0]]), np.array([-1.0]))
    assert np.allclose(u, 0.0)


def test_project_polyhedron_matches_kkt_enumeration():
    rng = np.random.default_rng(2)
    for case in range(40):
        n = int(rng.integers(2, 6))
        p = int(rng.integers(0, min(2, n - 1) + 1))
        m = int(rng.integers(1, 6))
        y = rng.standard_normal(n)
        E = rng.standard_normal((p, n)) if p else None
        d = (E @ rng.standard_normal(n)) if p else None
        A = rng.standard_normal((m, n))
        x_any = rng.standard_normal(n)
        b = A @ x_any + np.abs(rng.standard_normal(m))  # keeps x_any interior
        if p:
            # make the polyhedron nonempty for the equality slice too
            x_feas = x_any + np.linalg.lstsq(E, d - E @ x_any, rcond=None)[0]
            b = np.maximum(b, A @ x_feas + 0.1)
        x, ok = lsq.project_polyhedron(y, E, d, A, b)
        assert ok
        expected = enum_projection(y, E, d, A, b)
        assert expected is not None
        assert np.linalg.norm(x - expected) <= 1e-8 * (1 + np.linalg.norm(expected))


def test_project_polyhedron_isotonic_pair():
    x, ok = lsq.project_polyhedron(
        np.array([1.0, 2.0]), None, None, np.array([[-1.0, 1.0]]), np.array([0.0])
    )
    assert ok and np.allclose(x, [1.5, 1.5])


def test_project_polyhedron_infeasible():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([-1.0, -1.0])  # x1 <= -1 and x1 >= 1
    x, ok = lsq.project_polyhedron(np.zeros(2), None, None, A, b)
    assert not ok


def test_least_norm_correction_equality_only_is_min_norm():
    rng = np.random.default_rng(3)
    aeq = rng.standard_normal((2, 5))
    beq = rng.standard_normal(2)
    u = lsq.least_norm_correction(aeq, beq)
    pinv = np.linalg.pinv(aeq) @ beq
    assert np.linalg.norm(u - pinv) <= 1e-10


def test_least_norm_correction_licq_check():
    aeq = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(LicqError) as info:
        lsq.least_norm_correction(aeq, np.array([1.0, 1.0]), licq_check=True)
    assert set(info.value.indices) == {0, 1}


def test_least_norm_correction_inconsistent_equalities():
    aeq = np.array([[1.0, 0.0], [1.0, 0.0]])
    beq = np.array([0.0, 1.0])
    assert lsq.least_norm_correction(aeq, beq) is None
