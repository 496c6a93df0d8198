"""Generalized SDP benchmark family.

Instances minimize <-I, X> subject to s linear coordinate equalities, the
partial-sum eigenvalue bounds

    lam_n <= b_1,  lam_n + lam_{n-1} <= b_2,  ...,  lam_n + ... + lam_1 <= b_n,

and lam_n >= 0.  Construction plants a positive definite optimum C: the
equality right-hand sides are read off C and b_i is the sum of the i smallest
eigenvalues of C, which makes the last partial-sum row tight at C.  The
objective is bounded below by -b_n over the feasible set, so planting
certifies global optimality with f* = -b_n.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import NumericError
from ..manifold import project_array, retract_array, sym
from ..projections import project_joint
from ..solver import SolveResult, SolverConfig, solve
from ..spectral import (
    BlockProblem,
    MatrixMap,
    MatrixProblem,
    SpectralMap,
    decompose,
    eig_sorted,
)

SCHEMA_VERSION = 1
COND_FLOOR = 0.1  # added to M'M so planted optima stay comfortably definite


@dataclass(frozen=True)
class GenSdpInstance:
    """Seeded instance with its planted optimum and certified value."""

    n: int
    s: int
    seed: int
    mats: np.ndarray        # (s, n, n) symmetric equality matrices
    rhs: np.ndarray         # (s,) equality right-hand sides
    planted: np.ndarray     # the positive definite feasible optimum C
    bounds: np.ndarray      # (n,) partial-sum bounds b_i
    f_star: float

    def check(self, tol=1e-10):
        c = self.planted
        if np.linalg.eigvalsh(c).min() <= 0:
            raise NumericError("planted optimum is not positive definite")
        vals = np.einsum("kij,ij->k", self.mats, c)
        if np.abs(vals - self.rhs).max() > tol * max(1.0, np.abs(self.rhs).max()):
            raise NumericError("equality right-hand sides do not match the plant")
        cum = np.cumsum(np.sort(np.linalg.eigvalsh(c)))
        if np.abs(cum - self.bounds).max() > tol * max(1.0, np.abs(cum).max()):
            raise NumericError("partial-sum bounds do not match the plant")

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "family": "gensdp",
                "n": self.n,
                "s": self.s,
                "seed": self.seed,
                "mats": self.mats.tolist(),
                "rhs": self.rhs.tolist(),
                "planted": self.planted.tolist(),
                "bounds": self.bounds.tolist(),
                "f_star": self.f_star,
            }
        )

    @classmethod
    def from_json(cls, text) -> "GenSdpInstance":
        d = json.loads(text)
        if d.get("schema") != SCHEMA_VERSION or d.get("family") != "gensdp":
            raise ValueError("unrecognized instance payload")
        return cls(
            n=d["n"], s=d["s"], seed=d["seed"],
            mats=np.asarray(d["mats"], dtype=float),
            rhs=np.asarray(d["rhs"], dtype=float),
            planted=np.asarray(d["planted"], dtype=float),
            bounds=np.asarray(d["bounds"], dtype=float),
            f_star=float(d["f_star"]),
        )


def gen_sdp_instance(n, s=None, seed=0) -> GenSdpInstance:
    """Draw a seeded instance; deterministic given (n, s, seed)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    s = n if s is None else s
    if s < 1:
        raise ValueError("s must be at least 1")
    rng = np.random.default_rng([seed, n, s, 0x5D9])
    m = rng.standard_normal((n, n))
    planted = m.T @ m + COND_FLOOR * np.eye(n)
    mats = np.array([sym(rng.standard_normal((n, n))) for _ in range(s)])
    rhs = np.einsum("kij,ij->k", mats, planted)
    bounds = np.cumsum(np.sort(np.linalg.eigvalsh(planted)))
    inst = GenSdpInstance(
        n=n, s=s, seed=seed, mats=mats, rhs=rhs,
        planted=planted, bounds=bounds, f_star=-float(bounds[-1]),
    )
    inst.check()
    return inst


def build_gen_sdp_problem(inst: GenSdpInstance) -> MatrixProblem:
    """Matrix problem with the trace objective and affine constraint rows."""
    n = inst.n
    eye = np.eye(n)
    objective = MatrixMap(
        fn=lambda x: -float(np.trace(x)),
        grad=lambda x: -eye,
    )
    equalities = [
        MatrixMap.linear_form(inst.mats[i], inst.rhs[i]) for i in range(inst.s)
    ]
    spectral = []
    for i in range(1, n + 1):
        coef = np.zeros(n)
        coef[n - i:] = 1.0  # sum of the i smallest (trailing) eigenvalues
        spectral.append(SpectralMap.linear_form(coef, inst.bounds[i - 1]))
    low = np.zeros(n)
    low[n - 1] = -1.0
    spectral.append(SpectralMap.linear_form(low, 0.0))  # smallest eigenvalue >= 0
    return MatrixProblem(
        n=n, objective=objective, equalities=equalities, spectral_ineqs=spectral
    )


def feasible_start(inst: GenSdpInstance, block: BlockProblem, rng,
                   scale=1.0, tol_feas=1e-9):
    """A feasible start away from the plant: perturb, then restore.

    Perturbs the planted decomposition by a random tangent step and an
    eigenvalue shift, then projects back onto the constraint set.  The
    perturbation halves until the restoration succeeds; the plant itself is
    the final fallback.
    """
    rng = np.random.default_rng(rng)
    base = eig_sorted(inst.planted)
    q0, lam0 = base.q.factor, base.lam
    dq = project_array(q0, rng.standard_normal((inst.n, inst.n)))
    dq /= max(1.0, np.linalg.norm(dq))
    dlam = rng.standard_normal(inst.n)
    dlam /= max(1.0, np.linalg.norm(dlam))
    while scale > 1e-6:
        q_try = retract_array(q0, scale * dq)
        lam_try = lam0 + scale * np.abs(lam0).mean() * dlam
        try:
            rep = project_joint(q_try, lam_try, block, tol_feas=tol_feas,
                                max_restore=400)
        except NumericError:
            rep = None
        if rep is not None and rep.ok:
            return rep.q, rep.lam
        scale *= 0.5
    return q0.copy(), lam0.copy()


@dataclass
class GenSdpRunResult:
    """Per-instance record mirroring the benchmark table columns."""

    instance: GenSdpInstance
    result: SolveResult
    dist_to_opt: float
    residual_eq: float
    residual_ineq: float
    solved: bool


def solve_gen_sdp_instance(inst: GenSdpInstance, cfg: Optional[SolverConfig] = None,
                           start_scale=1.0, solved_tol=1e-6,
                           trace_sink=None) -> GenSdpRunResult:
    """Build, start feasibly, solve, and score one instance."""
    cfg = cfg or SolverConfig()
    block = decompose(build_gen_sdp_problem(inst))
    q0, lam0 = feasible_start(
        inst, block, np.random.default_rng([inst.seed, inst.n, 0x57A7]),
        scale=start_scale, tol_feas=cfg.tol_feas,
    )
    res = solve(block, q0, lam0, cfg, trace_sink=trace_sink)
    req, rin = block.residuals(res.q, res.lam)
    dist = abs(res.f_final - inst.f_star)
    return GenSdpRunResult(
        instance=inst,
        result=res,
        dist_to_opt=dist,
        residual_eq=req,
        residual_ineq=rin,
        solved=bool(dist <= solved_tol and req <= solved_tol and rin <= solved_tol),
    )
