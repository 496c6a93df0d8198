import numpy as np
import pytest

from specbcd import spectral as sp
from specbcd.manifold import retract_array, sym, tangent_project


def rand_sym(rng, n):
    return sym(rng.standard_normal((n, n)))


def test_symmetric_matrix_symmetrizes():
    a = np.array([[1.0, 2.0], [0.0, 3.0]])
    m = sp.SymmetricMatrix(a)
    assert np.linalg.norm(m.data - m.data.T) <= 1e-15
    with pytest.raises(ValueError):
        sp.SymmetricMatrix(np.zeros((2, 3)))


def test_eig_sorted_identity_and_diag():
    p = sp.eig_sorted(np.eye(3))
    assert np.allclose(p.lam, 1.0)
    assert np.all(np.diff(p.lam) <= 1e-12)

    p = sp.eig_sorted(np.diag([1.0, 3.0]))
    assert np.allclose(p.lam, [3.0, 1.0])
    # permutation with the sign convention applied
    assert np.allclose(np.abs(p.q.factor), [[0, 1], [1, 0]])
    lead = np.abs(p.q.factor).argmax(axis=0)
    assert np.all(p.q.factor[lead, np.arange(2)] > 0)


def test_eig_reconstruct_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        x = rand_sym(rng, n)
        p = sp.eig_sorted(x)
        back = sp.reconstruct(p).data
        assert np.linalg.norm(back - x) <= 1e-9 * max(1.0, np.linalg.norm(x))
        assert np.all(np.diff(p.lam) <= 1e-12)


def test_reconstruct_diag_case():
    lam = np.array([2.0, 1.0, -1.0])
    p = sp.SpectralPoint(sp.ManifoldPoint(np.eye(3)), lam)
    assert np.allclose(sp.reconstruct(p).data, np.diag(lam))


def test_reconstruct_sign_flip_invariance_exact():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rand_sym(rng, 4)
        p = sp.eig_sorted(x)
        base = sp.reconstruct(p).data
        for _ in range(16):
            signs = rng.choice([-1.0, 1.0], size=4)
            flipped = sp.reconstruct_array(p.q.factor * signs, p.lam)
            assert np.array_equal(flipped, base)


def test_spectral_point_ordering_enforced():
    with pytest.raises(ValueError):
        sp.SpectralPoint(sp.ManifoldPoint(np.eye(2)), np.array([1.0, 2.0]))
    # from_blocks re-sorts via a column permutation
    p = sp.SpectralPoint.from_blocks(np.eye(2), np.array([1.0, 2.0]))
    assert np.allclose(p.lam, [2.0, 1.0])
    assert np.allclose(sp.reconstruct(p).data, np.diag([1.0, 2.0]))


def test_grad_lambda_cases():
    rng = np.random.default_rng(2)
    g = rand_sym(rng, 3)
    assert np.allclose(sp.grad_lambda(g, np.eye(3)), np.diag(g))
    q = sp.eig_sorted(rand_sym(rng, 3)).q
    assert np.allclose(sp.grad_lambda(np.eye(3), q), 1.0)


def test_grad_lambda_matches_finite_differences():
    rng = np.random.default_rng(3)
    a = rand_sym(rng, 4)

    def f(x):
        return float(np.sum(a * x) + 0.5 * np.sum(x * x))

    def grad(x):
        return a + x

    for _ in range(20):
        q = sp.eig_sorted(rand_sym(rng, 4)).q
        lam = rng.standard_normal(4)
        x = sp.reconstruct_array(q.factor, lam)
        analytic = sp.grad_lambda(grad(x), q)
        step = 1e-6
        for i in range(4):
            e = np.zeros(4)
            e[i] = step
            fd = (
                f(sp.reconstruct_array(q.factor, lam + e))
                - f(sp.reconstruct_array(q.factor, lam - e))
            ) / (2 * step)
            assert abs(fd - analytic[i]) <= 1e-6 * max(1.0, abs(fd))


def test_grad_q_riemannian_cases():
    rng = np.random.default_rng(4)
    p = sp.eig_sorted(rand_sym(rng, 3))
    zero_lam = sp.SpectralPoint(p.q, np.zeros(3))
    out = sp.grad_q_riemannian(rand_sym(rng, 3), zero_lam)
    assert np.allclose(out.data, 0.0)
    # gradient of the trace: ambient part is Q-times-symmetric, projects to zero
    out = sp.grad_q_riemannian(np.eye(3), p)
    assert np.linalg.norm(out.data) <= 1e-12


def test_grad_q_riemannian_matches_directional_derivatives():
    rng = np.random.default_rng(5)
    a = rand_sym(rng, 4)

    def f(x):
        return float(np.sum(a * x) + 0.25 * np.sum(x * x))

    def grad(x):
        return a + 0.5 * x

    for _ in range(20):
        p = sp.eig_sorted(rand_sym(rng, 4))
        q = p.q.factor
        x = sp.reconstruct_array(q, p.lam)
        riem = sp.grad_q_riemannian(grad(x), p)
        v = tangent_project(p.q, rng.standard_normal((4, 4))).data
        v /= np.linalg.norm(v)
        step = 1e-6
        up = f(sp.reconstruct_array(retract_array(q, step * v), p.lam))
        dn = f(sp.reconstruct_array(retract_array(q, -step * v), p.lam))
        fd = (up - dn) / (2 * step)
        an = float(np.sum(riem.data * v))
        assert abs(fd - an) <= 1e-5 * max(1.0, abs(fd))


def test_decompose_trace_objective():
    n = 3
    mp = sp.MatrixProblem(
        n=n,
        objective=sp.MatrixMap(
            fn=lambda x: -float(np.trace(x)), grad=lambda x: -np.eye(n)
        ),
    )
    block = sp.decompose(mp)
    rng = np.random.default_rng(6)
    p = sp.eig_sorted(rand_sym(rng, n))
    q, lam = p.q.factor, p.lam
    assert abs(block.f(q, lam) + lam.sum()) <= 1e-12
    gq, gy = block.grad_f(q, lam)
    assert np.allclose(gy, -1.0)
    from specbcd.manifold import project_array

    assert np.linalg.norm(project_array(q, gq)) <= 1e-12


def test_decompose_row_layout():
    mp = sp.MatrixProblem(
        n=2,
        objective=sp.MatrixMap(fn=lambda x: 0.0, grad=lambda x: np.zeros((2, 2))),
    )
    block = sp.decompose(mp)
    assert block.p == 0
    assert block.n_ineq == 1  # the single ordering row
    assert block.n_ordering == 1
    lam = np.array([1.0, 3.0])
    assert np.allclose(block.g_values(np.eye(2), lam), [2.0])


def test_decompose_objective_round_trip():
    rng = np.random.default_rng(7)
    a = rand_sym(rng, 4)
    mp = sp.MatrixProblem(
        n=4,
        objective=sp.MatrixMap(
            fn=lambda x: float(np.sum(a * x) + np.sum(x**2)),
            grad=lambda x: a + 2 * x,
        ),
        equalities=[sp.MatrixMap.linear_form(rand_sym(rng, 4), 0.5)],
    )
    block = sp.decompose(mp)
    for _ in range(100):
        x = rand_sym(rng, 4)
        p = sp.eig_sorted(x)
        fx = mp.objective.fn(x)
        assert abs(fx - block.f(p.q.factor, p.lam)) <= 1e-9 * (1 + abs(fx))
        cx = mp.equalities[0].fn(x)
        cb = block.c_values(p.q.factor, p.lam)[0]
        assert abs(cx - cb) <= 1e-9 * (1 + abs(cx))


def test_decompose_sign_flip_invariance_of_f():
    rng = np.random.default_rng(8)
    a = rand_sym(rng, 3)
    mp = sp.MatrixProblem(
        n=3,
        objective=sp.MatrixMap(
            fn=lambda x: float(np.sum(a * x) + np.sum(x**3)), grad=lambda x: a
        ),
    )
    block = sp.decompose(mp)
    for _ in range(10):
        p = sp.eig_sorted(rand_sym(rng, 3))
        base = block.f(p.q.factor, p.lam)
        for _ in range(16):
            signs = rng.choice([-1.0, 1.0], size=3)
            assert block.f(p.q.factor * signs, p.lam) == base


def test_decompose_generic_path_gradients_match_linear_path():
    rng = np.random.default_rng(9)
    n = 3
    mat = rand_sym(rng, n)
    linear = sp.MatrixProblem(
        n=n,
        objective=sp.MatrixMap(fn=lambda x: 0.0, grad=lambda x: np.zeros((n, n))),
        equalities=[sp.MatrixMap.linear_form(mat, 1.0)],
        spectral_ineqs=[sp.SpectralMap.linear_form(np.ones(n), 2.0)],
    )
    generic = sp.MatrixProblem(
        n=n,
        objective=linear.objective,
        equalities=[
            sp.MatrixMap(fn=lambda x: float(np.sum(mat * x)) - 1.0,
                         grad=lambda x: mat)
        ],
        spectral_ineqs=[
            sp.SpectralMap(fn=lambda lam: float(lam.sum()) - 2.0,
                           grad=lambda lam: np.ones(n))
        ],
    )
    bl = sp.decompose(linear)
    bg = sp.decompose(generic)
    assert bl.y_affine is not None and bg.y_affine is None
    p = sp.eig_sorted(rand_sym(rng, n))
    q, lam = p.q.factor, p.lam
    assert np.allclose(bl.c_values(q, lam), bg.c_values(q, lam))
    assert np.allclose(bl.g_values(q, lam), bg.g_values(q, lam))
    for a, b in zip(bl.c_jac(q, lam), bg.c_jac(q, lam)):
        assert np.allclose(a, b)
    for a, b in zip(bl.g_jac(q, lam), bg.g_jac(q, lam)):
        assert np.allclose(a, b)


def test_matrix_problem_gradient_audit():
    rng = np.random.default_rng(10)
    a = rand_sym(rng, 3)
    good = sp.MatrixProblem(
        n=3,
        objective=sp.MatrixMap(
            fn=lambda x: float(np.trace(a @ x @ x)), grad=lambda x: a @ x + x @ a
        ),
    )
    good.audit_gradients(rng=0, cases=3)
    bad = sp.MatrixProblem(
        n=3,
        objective=sp.MatrixMap(fn=good.objective.fn, grad=lambda x: a),
    )
    from specbcd.exceptions import NumericError

    with pytest.raises(NumericError):
        bad.audit_gradients(rng=0, cases=3)
