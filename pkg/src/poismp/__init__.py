"""Saddle-point solvers for penalized Poisson likelihood models.

The objective s^T x - sum_i c_i log(a_i^T x) + h(x) is minimized through its
bilinear saddle reformulation, which trades the non-Lipschitz log terms for a
proximal-friendly log barrier on the dual. Solvers: batch composite mirror
prox (with line search), partially and fully randomized block variants, and
mirror descent / proximal gradient / accelerated proximal gradient baselines.
Application pipelines: self-exciting-network estimation from event streams,
and emission-tomography reconstruction.
"""

from .baselines import BaselineConfig, solve_apg, solve_md, solve_pg
from .cmp import SaddleState, StepsizePolicy, acceptance_quantity, cmp_step, line_search_accept, solve_cmp
from .core import (
    HistoryRow,
    PenaltySpec,
    PoissonProblem,
    SolveReport,
    mass_identity_residual,
    monotone_operator,
    objective,
    operator_norm,
    read_problem,
    saddle_value,
    write_problem,
)
from .errors import ConvergenceWarning, DimensionError, DomainError, ExplosionGuard, StallError
from .prox import ProximalSetup, bregman, prox_entropy_capped, prox_euclidean_l1_nonneg, prox_log_barrier
from .rb import BlockConstants, BlockPartition, block_constants, solve_full_rb, solve_rb_cmp
from .rng import SplitMix64
from .sparse import SparseMatrix

__all__ = [
    "BaselineConfig",
    "BlockConstants",
    "BlockPartition",
    "ConvergenceWarning",
    "DimensionError",
    "DomainError",
    "ExplosionGuard",
    "HistoryRow",
    "PenaltySpec",
    "PoissonProblem",
    "ProximalSetup",
    "SaddleState",
    "SolveReport",
    "SparseMatrix",
    "SplitMix64",
    "StallError",
    "StepsizePolicy",
    "acceptance_quantity",
    "block_constants",
    "bregman",
    "cmp_step",
    "line_search_accept",
    "mass_identity_residual",
    "monotone_operator",
    "objective",
    "operator_norm",
    "prox_entropy_capped",
    "prox_euclidean_l1_nonneg",
    "prox_log_barrier",
    "read_problem",
    "saddle_value",
    "solve_apg",
    "solve_cmp",
    "solve_full_rb",
    "solve_md",
    "solve_pg",
    "solve_rb_cmp",
    "write_problem",
]
