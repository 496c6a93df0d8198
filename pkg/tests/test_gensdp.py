import numpy as np
import pytest

from specbcd.apps import gensdp
from specbcd.solver import SolverConfig
from specbcd.spectral import decompose, eig_sorted


def test_instance_invariants_over_seeds():
    for seed in range(50):
        inst = gensdp.gen_sdp_instance(4, seed=seed)
        inst.check()  # raises on violation


def test_instance_determinism_and_sizes():
    a = gensdp.gen_sdp_instance(5, seed=3)
    b = gensdp.gen_sdp_instance(5, seed=3)
    assert np.array_equal(a.mats, b.mats)
    assert np.array_equal(a.planted, b.planted)
    c = gensdp.gen_sdp_instance(5, s=2, seed=3)
    assert c.s == 2 and c.mats.shape == (2, 5, 5)
    with pytest.raises(ValueError):
        gensdp.gen_sdp_instance(1)


def test_planted_point_is_feasible_and_optimal():
    inst = gensdp.gen_sdp_instance(6, seed=1)
    block = decompose(gensdp.build_gen_sdp_problem(inst))
    p = eig_sorted(inst.planted)
    req, rin = block.residuals(p.q.factor, p.lam)
    assert req <= 1e-9 and rin <= 1e-9
    assert abs(block.f(p.q.factor, p.lam) - inst.f_star) <= 1e-10
    assert inst.f_star == -inst.bounds[-1]


def test_problem_structure():
    inst = gensdp.gen_sdp_instance(5, seed=0)
    mp = gensdp.build_gen_sdp_problem(inst)
    assert mp.p == inst.s
    assert mp.s == inst.n + 1  # n partial-sum rows plus the sign row
    block = decompose(mp)
    assert block.n_ordering == inst.n - 1
    assert block.n_ineq == (inst.n + 1) + (inst.n - 1)
    # objective gradient is the negated identity everywhere
    x = np.diag(np.arange(1.0, 6.0))
    assert np.array_equal(mp.objective.grad(x), -np.eye(5))


def test_serialization_round_trip():
    inst = gensdp.gen_sdp_instance(4, seed=9)
    back = gensdp.GenSdpInstance.from_json(inst.to_json())
    assert back.n == inst.n and back.s == inst.s and back.seed == inst.seed
    assert np.array_equal(back.mats, inst.mats)
    assert np.array_equal(back.planted, inst.planted)
    assert np.array_equal(back.bounds, inst.bounds)
    assert back.f_star == inst.f_star
    with pytest.raises(ValueError):
        gensdp.GenSdpInstance.from_json('{"schema": 99}')


def test_feasible_start_is_feasible_and_deterministic():
    inst = gensdp.gen_sdp_instance(5, seed=4)
    block = decompose(gensdp.build_gen_sdp_problem(inst))
    q1, l1 = gensdp.feasible_start(inst, block, np.random.default_rng(11))
    q2, l2 = gensdp.feasible_start(inst, block, np.random.default_rng(11))
    assert np.array_equal(q1, q2) and np.array_equal(l1, l2)
    assert block.is_feasible(q1, l1, 1e-9)


def test_solve_instance_and_objective_lower_bound():
    inst = gensdp.gen_sdp_instance(5, seed=0)
    run = gensdp.solve_gen_sdp_instance(inst, SolverConfig())
    assert run.solved
    assert run.result.status == "KKT"
    # feasible iterates can never undercut the planted bound
    assert run.result.f_final >= inst.f_star - 1e-8
    for rec in run.result.trace.records:
        assert rec.f >= inst.f_star - 1e-8
