"""Feasible-iterate solver for matrix optimization with joint coordinate and
spectral constraints, plus the benchmark problem families and experiment CLI.
"""

from .exceptions import LicqError, NumericError
from .manifold import (
    ManifoldPoint,
    TangentVector,
    inner,
    random_point,
    retract,
    tangent_project,
)
from .spectral import (
    BlockProblem,
    MatrixMap,
    MatrixProblem,
    SpectralMap,
    SpectralPoint,
    SymmetricMatrix,
    decompose,
    eig_sorted,
    grad_lambda,
    grad_q_riemannian,
    reconstruct,
)
from .directions import DirectionResult, active_set, measure_kkt, measure_x, measure_y
from .projections import (
    ProjectionReport,
    penalty_project,
    project_joint,
    project_x,
    project_y,
)
from .solver import SolveResult, SolverConfig, SolverTrace, solve, solve_multi

__version__ = "0.1.0"

__all__ = [
    "BlockProblem",
    "DirectionResult",
    "LicqError",
    "ManifoldPoint",
    "MatrixMap",
    "MatrixProblem",
    "NumericError",
    "ProjectionReport",
    "SolveResult",
    "SolverConfig",
    "SolverTrace",
    "SpectralMap",
    "SpectralPoint",
    "SymmetricMatrix",
    "TangentVector",
    "active_set",
    "decompose",
    "eig_sorted",
    "grad_lambda",
    "grad_q_riemannian",
    "inner",
    "measure_kkt",
    "measure_x",
    "measure_y",
    "penalty_project",
    "project_joint",
    "project_x",
    "project_y",
    "random_point",
    "reconstruct",
    "retract",
    "solve",
    "solve_multi",
    "tangent_project",
]
