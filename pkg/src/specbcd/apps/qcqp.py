"""QCQP benchmark family: minimize ||x||^2 over the exterior of m ellipsoids.

The planar instances keep a brute-force oracle affordable: in polar
coordinates the minimal feasible radius along direction u is closed form,
r(theta)^2 = 1 / min_i u' A_i u, so a dense angle scan pins the global value.

Three solution pipelines are compared:

* the semidefinite relaxation (drop the rank-1 condition) solved by a small
  log-barrier interior-point method, followed by Gaussian randomization that
  rescales each sample onto its tightest constraint;
* the eigenvalue-band tightening lam_1 >= delta, lam_i in [0, delta], solved
  by the staged descent method from several feasible starts;
* roundings of the band solutions: the top eigenpair projection and the same
  Gaussian randomization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..exceptions import NumericError
from ..manifold import fix_column_signs, random_point, sym
from ..solver import SolverConfig, solve_multi
from ..spectral import (
    MatrixMap,
    MatrixProblem,
    SpectralMap,
    decompose,
    eig_sorted,
    reconstruct_array,
)

SCHEMA_VERSION = 1
COND_FLOOR = 0.05   # added to B'B when drawing the ellipsoid matrices
DEFAULT_SAMPLES = 20
ORACLE_TOL = 0.013  # match threshold between methods and the grid value


@dataclass(frozen=True)
class QcqpInstance:
    """m positive definite 2x2 constraint matrices, drawn per seed."""

    m: int
    seed: int
    mats: np.ndarray  # (m, 2, 2)

    def check(self):
        if np.linalg.eigvalsh(self.mats).min() <= 0:
            raise NumericError("constraint matrices must be positive definite")

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "family": "qcqp",
                "m": self.m,
                "seed": self.seed,
                "mats": self.mats.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text) -> "QcqpInstance":
        d = json.loads(text)
        if d.get("schema") != SCHEMA_VERSION or d.get("family") != "qcqp":
            raise ValueError("unrecognized instance payload")
        return cls(m=d["m"], seed=d["seed"], mats=np.asarray(d["mats"], dtype=float))


def qcqp_instance(m, seed=0) -> QcqpInstance:
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = np.random.default_rng([seed, m, 0x9C9])
    mats = np.empty((m, 2, 2))
    for i in range(m):
        b = rng.standard_normal((2, 2))
        mats[i] = b.T @ b + COND_FLOOR * np.eye(2)
    inst = QcqpInstance(m=m, seed=seed, mats=mats)
    inst.check()
    return inst


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------

def _polar_scan(inst, resolution):
    theta = np.linspace(0.0, np.pi, resolution, endpoint=False)
    u = np.stack([np.cos(theta), np.sin(theta)])  # (2, K)
    a = inst.mats
    quad = (
        a[:, 0, 0, None] * u[0] ** 2
        + 2.0 * a[:, 0, 1, None] * u[0] * u[1]
        + a[:, 1, 1, None] * u[1] ** 2
    )
    r2 = 1.0 / quad.min(axis=0)
    return theta, r2


def grid_oracle(inst: QcqpInstance, resolution=200_000) -> float:
    """Global optimum estimate by polar grid scan, exact in the radius.

    Doubles the angle count until the grid-spacing error bound (estimated
    from the scan's own slope) is below the reporting tolerance.
    """
    if inst.mats.shape[1] != 2:
        raise ValueError("the grid oracle covers the planar family only")
    res = max(int(resolution), 16)
    for _ in range(6):
        theta, r2 = _polar_scan(inst, res)
        lip = np.abs(np.diff(r2)).max() / (theta[1] - theta[0])
        if lip * (theta[1] - theta[0]) / 2.0 <= ORACLE_TOL:
            return float(r2.min())
        res *= 2
    return float(r2.min())


def grid_oracle_argmin(inst: QcqpInstance, resolution=200_000):
    """(value, minimizer) from the same scan."""
    theta, r2 = _polar_scan(inst, max(int(resolution), 16))
    j = int(r2.argmin())
    x = np.sqrt(r2[j]) * np.array([np.cos(theta[j]), np.sin(theta[j])])
    return float(r2[j]), x


# ---------------------------------------------------------------------------
# Semidefinite relaxation baseline
# ---------------------------------------------------------------------------

def _chart(v):
    return np.array([[v[0], v[1]], [v[1], v[2]]])


def sdr_solve(inst: QcqpInstance, gap_tol=1e-9):
    """Solve the relaxation min <I, X> s.t. <A_i, X> >= 1, X psd.

    Log-barrier path following on the 3-parameter chart (x11, x12, x22) with
    Newton inner iterations; the barrier parameter count bounds the duality
    gap, so the returned value is within ``gap_tol`` of the relaxation
    optimum.  Kept independent of the staged solver so the baseline cannot
    inherit its failure modes.
    """
    a = inst.mats
    m = len(a)
    rows = np.stack([a[:, 0, 0], 2.0 * a[:, 0, 1], a[:, 1, 1]], axis=1)  # (m, 3)
    obj = np.array([1.0, 0.0, 1.0])
    nu = m + 2.0
    basis = (np.array([[1.0, 0], [0, 0]]),
             np.array([[0, 1.0], [1.0, 0]]),
             np.array([[0, 0], [0, 1.0]]))

    rho = 2.0 / np.trace(a, axis1=1, axis2=2).min()
    v = rho * np.array([1.0, 0.0, 1.0])

    def centering_val(vv, t):
        # objective + barrier / t keeps the values O(1) along the whole path
        x = _chart(vv)
        det = x[0, 0] * x[1, 1] - x[0, 1] ** 2
        slack = rows @ vv - 1.0
        if det <= 0 or x[0, 0] <= 0 or np.any(slack <= 0):
            return np.inf
        return float(obj @ vv - (np.log(det) + np.log(slack).sum()) / t)

    t = 1.0
    for _ in range(80):
        for _ in range(100):
            x = _chart(v)
            xinv = np.linalg.inv(x)
            slack = rows @ v - 1.0
            grad = obj - (
                np.array([xinv[0, 0], 2.0 * xinv[0, 1], xinv[1, 1]])
                + rows.T @ (1.0 / slack)
            ) / t
            hess = np.empty((3, 3))
            for i in range(3):
                xb = xinv @ basis[i] @ xinv
                for j in range(3):
                    hess[i, j] = np.sum(xb * basis[j])
            hess += (rows / slack[:, None] ** 2).T @ rows
            hess /= t
            step, *_ = np.linalg.lstsq(hess, -grad, rcond=None)
            decrement = float(-grad @ step)
            if decrement / 2.0 <= 1e-13:
                break
            val = centering_val(v, t)
            s = 1.0
            while s > 1e-14:
                if centering_val(v + s * step, t) <= val - 0.25 * s * decrement:
                    break
                s *= 0.5
            if s <= 1e-14:
                break
            v = v + s * step
        if nu / t <= gap_tol:
            return sym(_chart(v)), float(obj @ v)
        t *= 20.0
    raise NumericError("barrier method did not reach the requested duality gap")


# ---------------------------------------------------------------------------
# Randomization and rounding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rounding:
    x: np.ndarray
    value: float
    samples: np.ndarray  # (L, 2) all feasible candidates, scaled


def _psd_sqrt(xmat):
    w, v = np.linalg.eigh(sym(xmat))
    w = np.clip(w, 0.0, None)
    return fix_column_signs(v) * np.sqrt(w)


def scale_to_feasible(xi, mats):
    """Rescale a nonzero vector so its tightest constraint is active."""
    quad = np.einsum("i,kij,j->k", xi, mats, xi)
    tight = float(quad.min())
    if tight <= 0:
        raise NumericError("nonpositive quadratic form; cannot rescale")
    return xi / np.sqrt(tight)


def randomize(xstar, inst: QcqpInstance, n_samples=DEFAULT_SAMPLES, seed=0) -> Rounding:
    """Gaussian rounding: draw xi ~ N(0, X*), rescale each sample onto its
    tightest constraint, keep the best objective value.

    Deterministic per seed; invariant to positive rescaling of ``xstar``
    because the rescaling cancels the covariance scale.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng([seed, inst.seed, 0xA2])
    fac = _psd_sqrt(np.asarray(xstar, dtype=float))
    samples = np.empty((n_samples, 2))
    for ell in range(n_samples):
        xi = fac @ rng.standard_normal(2)
        while not np.any(xi):
            xi = fac @ rng.standard_normal(2)
        samples[ell] = scale_to_feasible(xi, inst.mats)
    values = np.einsum("li,li->l", samples, samples)
    best = int(values.argmin())
    return Rounding(x=samples[best], value=float(values[best]), samples=samples)


def project_rank1(xstar, inst: QcqpInstance) -> Rounding:
    """Top-eigenpair rounding: xi = sqrt(lam_1) v_1, then rescale."""
    p = eig_sorted(np.asarray(xstar, dtype=float))
    lam1 = float(p.lam[0])
    if lam1 <= 0:
        raise ValueError("top eigenvalue is not positive; nothing to project")
    xi = np.sqrt(lam1) * p.q.factor[:, 0]
    x = scale_to_feasible(xi, inst.mats)
    return Rounding(x=x, value=float(x @ x), samples=x[None, :])


# ---------------------------------------------------------------------------
# Eigenvalue-band tightening
# ---------------------------------------------------------------------------

def build_sco_problem(inst: QcqpInstance, delta) -> MatrixProblem:
    """Band-tightened matrix problem for one relaxation width.

    Objective <I, X>; coordinate rows <-A_i, X> <= -1 (affine in lam for any
    fixed factor); spectral rows -lam_1 <= -delta, -lam_2 <= 0, lam_2 <= delta
    plus the ordering row from the decomposition.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    n = 2
    eye = np.eye(n)
    objective = MatrixMap(fn=lambda x: float(np.trace(x)), grad=lambda x: eye)
    spectral = [SpectralMap.linear_form(np.array([-1.0, 0.0]), -float(delta))]
    for i in range(1, n):
        row = np.zeros(n)
        row[i] = -1.0
        spectral.append(SpectralMap.linear_form(row, 0.0))
        spectral.append(SpectralMap.linear_form(-row, float(delta)))
    coord = [MatrixMap.linear_form(-inst.mats[i], -1.0) for i in range(inst.m)]
    return MatrixProblem(
        n=n, objective=objective, spectral_ineqs=spectral, coord_ineqs=coord
    )


def feasible_band_point(q, lam_guess, inst: QcqpInstance, delta):
    """Deterministic feasible point of the band constraints near a guess.

    Clamps the trailing eigenvalue into [0, delta] and lifts the leading one
    until every quadratic row holds; positive definiteness of the rows makes
    the lift monotone, so the result is always feasible.
    """
    w = np.einsum("ij,kij->kj", q, inst.mats @ q)  # (m, 2): w[k, j] = q_j' A_k q_j
    lam2 = float(np.clip(lam_guess[1], 0.0, delta))
    need = (1.0 - w[:, 1] * lam2) / w[:, 0]
    lam1 = max(float(delta), float(lam_guess[0]), float(need.max()))
    return np.array([lam1, lam2])


def sco_starts(inst: QcqpInstance, delta, x_sdr, restarts=3):
    """One start projected from the relaxation solution plus random starts."""
    starts = []
    p = eig_sorted(np.asarray(x_sdr, dtype=float))
    q = p.q.factor
    starts.append((q, feasible_band_point(q, p.lam, inst, delta)))
    for j in range(max(0, restarts - 1)):
        rng = np.random.default_rng([inst.seed, j, 0x51A])
        pr = eig_sorted(sym(rng.standard_normal((2, 2))))
        starts.append(
            (pr.q.factor, feasible_band_point(pr.q.factor, pr.lam, inst, delta))
        )
    return starts


# ---------------------------------------------------------------------------
# Comparison pipeline
# ---------------------------------------------------------------------------

@dataclass
class DeltaOutcome:
    delta: float
    orig: float
    random: float
    project: float
    solved_random: bool
    solved_project: bool
    statuses: tuple
    project_x: np.ndarray
    random_samples: np.ndarray
    project_points: np.ndarray


@dataclass
class QcqpOutcome:
    """Per-instance comparison record mirroring the benchmark tables."""

    instance: QcqpInstance
    oracle_opt: float
    sdr_orig: float
    sdr_random: float
    solved_sdr_random: bool
    per_delta: dict = field(default_factory=dict)
    sdr_samples: Optional[np.ndarray] = None
    oracle_x: Optional[np.ndarray] = None
    traces: tuple = ()

    def check(self, tol=1e-6):
        if self.sdr_orig > self.oracle_opt + tol:
            raise NumericError("relaxation value exceeds the oracle optimum")
        feas_tol = 1e-9
        mats = self.instance.mats
        for val, x in [(self.sdr_random, None)] + [
            (d.project, d.project_x) for d in self.per_delta.values()
        ]:
            if x is not None:
                quad = np.einsum("i,kij,j->k", x, mats, x)
                if quad.min() < 1.0 - feas_tol:
                    raise NumericError("reported point is infeasible")
            if val < self.oracle_opt - ORACLE_TOL:
                raise NumericError("feasible value undercuts the oracle optimum")


def run_qcqp_comparison(inst: QcqpInstance, deltas=(1e-1, 1e-3, 1e-6),
                        restarts=3, n_samples=DEFAULT_SAMPLES, seed=None,
                        cfg: Optional[SolverConfig] = None,
                        keep_trace=False) -> QcqpOutcome:
    """Full protocol on one instance: relaxation, randomization, band solves
    for each width, and both roundings.  Solver stalls are recorded in the
    outcome rather than aborting the batch.
    """
    seed = inst.seed if seed is None else seed
    cfg = cfg or SolverConfig()
    oracle = grid_oracle(inst)
    x_sdr, sdr_orig = sdr_solve(inst)
    sdr_round = randomize(x_sdr, inst, n_samples=n_samples, seed=seed)
    outcome = QcqpOutcome(
        instance=inst,
        oracle_opt=oracle,
        sdr_orig=sdr_orig,
        sdr_random=sdr_round.value,
        solved_sdr_random=bool(abs(sdr_round.value - oracle) <= ORACLE_TOL),
        sdr_samples=sdr_round.samples,
    )
    traces = []
    for delta in deltas:
        block = decompose(build_sco_problem(inst, delta))
        starts = sco_starts(inst, delta, x_sdr, restarts=restarts)
        results = []
        for q0, lam0 in starts:
            try:
                _, runs = solve_multi(block, [(q0, lam0)], cfg)
                results.extend(runs)
            except (NumericError, ValueError):
                continue
        if not results:
            outcome.per_delta[delta] = DeltaOutcome(
                delta=delta, orig=np.inf, random=np.inf, project=np.inf,
                solved_random=False, solved_project=False, statuses=(),
                project_x=np.zeros(2), random_samples=np.zeros((0, 2)),
                project_points=np.zeros((0, 2)),
            )
            continue
        if keep_trace:
            traces.extend(r.trace for r in results)
        orig = min(r.f_final for r in results)
        rand_best = None
        rand_samples = []
        proj_best = None
        proj_points = []
        for j, r in enumerate(results):
            xmat = reconstruct_array(r.q, r.lam)
            rounding = randomize(xmat, inst, n_samples=n_samples,
                                 seed=seed + 1000 * (j + 1))
            rand_samples.append(rounding.samples)
            if rand_best is None or rounding.value < rand_best.value:
                rand_best = rounding
            try:
                proj = project_rank1(xmat, inst)
            except ValueError:
                continue
            proj_points.append(proj.x)
            if proj_best is None or proj.value < proj_best.value:
                proj_best = proj
        proj_value = proj_best.value if proj_best is not None else np.inf
        outcome.per_delta[delta] = DeltaOutcome(
            delta=delta,
            orig=orig,
            random=rand_best.value,
            project=proj_value,
            solved_random=bool(abs(rand_best.value - oracle) <= ORACLE_TOL),
            solved_project=bool(abs(proj_value - oracle) <= ORACLE_TOL),
            statuses=tuple(r.status for r in results),
            project_x=proj_best.x if proj_best is not None else np.zeros(2),
            random_samples=np.vstack(rand_samples),
            project_points=(
                np.vstack(proj_points) if proj_points else np.zeros((0, 2))
            ),
        )
    outcome.traces = tuple(traces)
    outcome.check()
    return outcome
