import numpy as np
import pytest

from specbcd import manifold as mf
from oracles import rotation2


def test_tangent_project_skew_at_identity():
    x = mf.ManifoldPoint(np.eye(2))
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = mf.tangent_project(x, skew)
    assert np.allclose(out.data, skew, atol=1e-15)


def test_tangent_project_symmetric_killed_at_identity():
    x = mf.ManifoldPoint(np.eye(2))
    out = mf.tangent_project(x, np.eye(2))
    assert np.allclose(out.data, 0.0, atol=1e-15)


def test_tangent_project_idempotent_and_self_adjoint():
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = mf.random_point(3, rng)
        v = rng.standard_normal((3, 3))
        w = rng.standard_normal((3, 3))
        pv = mf.tangent_project(x, v)
        ppv = mf.tangent_project(x, pv.data)
        assert np.linalg.norm(ppv.data - pv.data) <= 1e-12
        # self-adjointness: <Pv, w> == <v, Pw>
        pw = mf.tangent_project(x, w)
        assert abs(np.sum(pv.data * w) - np.sum(v * pw.data)) <= 1e-12 * (
            1 + np.linalg.norm(v) * np.linalg.norm(w)
        )


def test_tangent_project_removes_normal_component():
    rng = np.random.default_rng(7)
    x = mf.random_point(4, rng)
    v = rng.standard_normal((4, 4))
    pv = mf.tangent_project(x, v)
    # v - Pv orthogonal to every tangent vector at x
    for _ in range(20):
        t = mf.tangent_project(x, rng.standard_normal((4, 4)))
        assert abs(np.sum((v - pv.data) * t.data)) <= 1e-10


def test_tangent_project_errors():
    x = mf.ManifoldPoint(np.eye(3))
    with pytest.raises(ValueError):
        mf.tangent_project(x, np.zeros((2, 2)))
    bad = mf.ManifoldPoint(np.eye(3))
    bad.factor[0, 0] = 1.5  # simulate drift after construction
    with pytest.raises(ValueError):
        mf.tangent_project(bad, np.zeros((3, 3)))


def test_retract_zero_is_identity():
    rng = np.random.default_rng(3)
    x = mf.random_point(4, rng)
    v = mf.TangentVector(np.zeros((4, 4)), x)
    for method in ("qr", "polar"):
        y = mf.retract(x, v, method)
        assert np.array_equal(y.factor, x.factor)


def test_retract_polar_matches_exact_rotation():
    t = 1e-3
    x = mf.ManifoldPoint(np.eye(2))
    v = mf.TangentVector(np.array([[0.0, t], [-t, 0.0]]), x)
    y = mf.retract(x, v, "polar")
    assert np.linalg.norm(y.factor - rotation2(t)) <= 1e-6


@pytest.mark.parametrize("method", ["qr", "polar"])
def test_retract_first_order_agreement(method):
    rng = np.random.default_rng(11)
    x = mf.random_point(3, rng)
    v = mf.tangent_project(x, rng.standard_normal((3, 3)))
    ratios = []
    for t in (1e-2, 1e-3, 1e-4):
        y = mf.retract(x, mf.TangentVector(t * v.data, x), method)
        err = np.linalg.norm(y.factor - (x.factor + t * v.data))
        ratios.append(err / t**2)
        assert mf.orth_defect(y.factor) <= 1e-10
    assert max(ratios) <= 10 * min(ratios) + 1.0


def test_inner_properties():
    rng = np.random.default_rng(5)
    x = mf.random_point(3, rng)
    u = mf.tangent_project(x, rng.standard_normal((3, 3)))
    v = mf.tangent_project(x, rng.standard_normal((3, 3)))
    assert mf.inner(x, u, u) > 0
    assert mf.inner(x, u, v) == mf.inner(x, v, u)
    other = mf.random_point(3, np.random.default_rng(6))
    w = mf.tangent_project(other, rng.standard_normal((3, 3)))
    with pytest.raises(ValueError):
        mf.inner(x, u, w)


def test_inner_orthonormal_pair():
    x = mf.ManifoldPoint(np.eye(3))
    s1 = np.zeros((3, 3)); s1[0, 1], s1[1, 0] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    s2 = np.zeros((3, 3)); s2[0, 2], s2[2, 0] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    u = mf.TangentVector(s1, x)
    v = mf.TangentVector(s2, x)
    assert abs(mf.inner(x, u, v)) <= 1e-15
    assert abs(mf.inner(x, u, u) - 1.0) <= 1e-15


def test_random_point_deterministic_and_valid():
    a = mf.random_point(2, np.random.default_rng(7))
    b = mf.random_point(2, np.random.default_rng(7))
    assert np.array_equal(a.factor, b.factor)
    for n in (1, 2, 5):
        p = mf.random_point(n, np.random.default_rng(n))
        assert mf.orth_defect(p.factor) <= 1e-10
    assert mf.random_point(1, np.random.default_rng(0)).factor[0, 0] == 1.0
    with pytest.raises(ValueError):
        mf.random_point(0, np.random.default_rng(0))


def test_manifold_point_rejects_nonorthogonal():
    with pytest.raises(ValueError):
        mf.ManifoldPoint(np.ones((2, 2)))


def test_fix_column_signs_leading_entries_positive():
    rng = np.random.default_rng(9)
    q = mf.random_point(4, rng).factor
    fixed = mf.fix_column_signs(q)
    lead = np.abs(fixed).argmax(axis=0)
    assert np.all(fixed[lead, np.arange(4)] > 0)
