"""Staged block-coordinate descent with feasible iterates.

Each outer iteration resets the trial step, then dispatches the first phase
whose stationarity measure exceeds its tolerance: the eigenvalue block, the
factor block, then the joint block.  A phase computes the measure-minimizing
direction, walks the backtracking line search

    trial(t) = project(step(t)),   accept when f(trial) <= f_k - alpha t m,

and the projection keeps every accepted iterate feasible.  When all three
measures clear their tolerances the point is an approximate KKT point and the
solver stops.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import directions, projections
from .exceptions import NumericError
from .manifold import ManifoldPoint, retract_array

PHASE_Y = "Y"
PHASE_X = "X"
PHASE_JOINT = "JOINT"


@dataclass
class SolverConfig:
    """Tolerances and line-search constants.

    The almost-active widths default to the matching measure tolerances.
    """

    eps_y: float = 1e-6
    eps_x: float = 1e-6
    eps_kkt: float = 1e-6
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    alpha: float = 1e-4
    gamma: float = 0.5
    t_base: float = 1.0
    max_outer: int = 5000
    min_step: float = 1e-14
    tol_feas: float = 1e-9
    max_restore: int = 200
    retraction: str = "qr"
    seed: int = 0

    def __post_init__(self):
        if min(self.eps_y, self.eps_x, self.eps_kkt) <= 0:
            raise ValueError("measure tolerances must be positive")
        if self.delta1 is None:
            self.delta1 = self.eps_y
        if self.delta2 is None:
            self.delta2 = self.eps_kkt
        if self.delta1 < 0 or self.delta2 < 0:
            raise ValueError("almost-active widths must be nonnegative")
        if not (0 < self.alpha < 1 and 0 < self.gamma < 1):
            raise ValueError("alpha and gamma must lie in (0, 1)")
        if self.t_base <= 0 or self.min_step <= 0 or self.tol_feas <= 0:
            raise ValueError("t_base, min_step and tol_feas must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass
class TraceRecord:
    k: int
    phase: str
    measure: float
    t: float
    backtracks: int
    f: float
    residual_eq: float
    residual_ineq: float


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)
    status: str = ""
    f0: float = float("nan")


@dataclass
class SolveResult:
    """Final iterate, objective, exit measures, and the per-iteration trace."""

    q: np.ndarray
    lam: np.ndarray
    f_final: float
    m_y: float
    m_x: float
    m_kkt: float
    status: str
    iterations: int
    trace: SolverTrace

    def spectral_point(self):
        from .spectral import SpectralPoint

        return SpectralPoint.from_blocks(self.q, self.lam)


class _StepFailure(Exception):
    pass


def _trial(phase, problem, q, lam, dres, t, cfg):
    if phase == PHASE_Y:
        y_t = lam + t * dres.direction_y
        rep = projections.project_y(
            y_t, q, problem, fallback=lam,
            tol_feas=cfg.tol_feas, max_restore=cfg.max_restore,
        )
        return q, rep.lam, rep
    if phase == PHASE_X:
        q_t = retract_array(q, t * dres.direction_x.data, cfg.retraction)
        rep = projections.project_x(
            q_t, lam, problem, tol_feas=cfg.tol_feas, max_restore=cfg.max_restore
        )
        if not rep.ok:
            fb = projections.penalty_project(
                q_t, lam, problem, tol_feas=cfg.tol_feas, max_iter=cfg.max_restore
            )
            if fb.ok:
                rep = fb
        return rep.q, lam, rep
    q_t = retract_array(q, t * dres.direction_x.data, cfg.retraction)
    y_t = lam + t * dres.direction_y
    rep = projections.project_joint(
        q_t, y_t, problem, tol_feas=cfg.tol_feas, max_restore=cfg.max_restore
    )
    return rep.q, rep.lam, rep


def armijo_search(phase, problem, q, lam, dres, f_k, cfg):
    """Backtrack t over {t_base * gamma^j} until the projected trial point is
    feasible and clears the Armijo decrease against the phase measure.

    Returns (t, q, lam, f, report, backtracks); raises on step failure.
    Projection errors during the search count as failed trials.
    """
    t = cfg.t_base
    backtracks = 0
    while t >= cfg.min_step:
        try:
            q_t, lam_t, rep = _trial(phase, problem, q, lam, dres, t, cfg)
        except NumericError:
            rep = None
        if rep is not None and rep.ok:
            f_t = problem.f(q_t, lam_t)
            if f_t <= f_k - cfg.alpha * t * dres.measure:
                return t, q_t, lam_t, f_t, rep, backtracks
        t *= cfg.gamma
        backtracks += 1
    raise _StepFailure(f"{phase}-phase line search fell below min_step")


def solve(problem, q0, lam0, cfg: Optional[SolverConfig] = None,
          trace_sink=None) -> SolveResult:
    """Run the staged method from a feasible start.

    ``trace_sink`` may be a writable text stream; each accepted iteration is
    appended as one JSON object per line.
    """
    cfg = cfg or SolverConfig()
    q = np.array(q0.factor if isinstance(q0, ManifoldPoint) else q0, dtype=float)
    lam = np.asarray(lam0, dtype=float).copy()
    req, rin = problem.residuals(q, lam)
    if req > cfg.tol_feas or rin > cfg.tol_feas:
        raise ValueError(
            f"infeasible start: residual_eq={req:.3e}, residual_ineq={rin:.3e}"
        )
    f_k = problem.f(q, lam)
    trace = SolverTrace(f0=f_k)
    status = "cap"
    iterations = 0
    for k in range(cfg.max_outer):
        dy = directions.measure_y(problem, q, lam, cfg.delta1)
        if dy.measure > cfg.eps_y:
            phase, dres = PHASE_Y, dy
        else:
            dx = directions.measure_x(problem, q, lam)
            if dx.measure > cfg.eps_x:
                phase, dres = PHASE_X, dx
            else:
                dk = directions.measure_kkt(problem, q, lam, cfg.delta2)
                if dk.measure > cfg.eps_kkt:
                    phase, dres = PHASE_JOINT, dk
                else:
                    status = "KKT"
                    break
        try:
            t, q, lam, f_k, rep, backtracks = armijo_search(
                phase, problem, q, lam, dres, f_k, cfg
            )
        except _StepFailure:
            status = "stalled"
            break
        iterations = k + 1
        rec = TraceRecord(
            k=k, phase=phase, measure=dres.measure, t=t, backtracks=backtracks,
            f=f_k, residual_eq=rep.residual_eq, residual_ineq=rep.residual_ineq,
        )
        trace.records.append(rec)
        if trace_sink is not None:
            trace_sink.write(json.dumps(asdict(rec)) + "\n")
    trace.status = status
    m_y = directions.measure_y(problem, q, lam, cfg.delta1).measure
    m_x = directions.measure_x(problem, q, lam).measure
    m_kkt = directions.measure_kkt(problem, q, lam, cfg.delta2).measure
    return SolveResult(
        q=q, lam=lam, f_final=problem.f(q, lam),
        m_y=m_y, m_x=m_x, m_kkt=m_kkt,
        status=status, iterations=iterations, trace=trace,
    )


def solve_multi(problem, starts, cfg: Optional[SolverConfig] = None,
                trace_sink=None):
    """Solve from several feasible starts; return (best result, all results).

    The best result is the feasible one with the lowest objective; stalled and
    capped runs still count since their iterates stay feasible.
    """
    results = []
    for q0, lam0 in starts:
        results.append(solve(problem, q0, lam0, cfg, trace_sink=trace_sink))
    best = min(results, key=lambda r: r.f_final)
    return best, results
