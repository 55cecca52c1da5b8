"""Randomized block mirror prox solvers.

Two variants over a contiguous partition of the dual vector (and of A's rows):

* solve_rb_cmp — partially randomized: the primal block is prox-updated every
  iteration, one random dual block gets the closed-form log-barrier update,
  the rest carry over. The cached A^T y is maintained incrementally from the
  updated block and recomputed in full every ``RECOMPUTE_EVERY`` iterations
  to bound floating-point drift.
* solve_full_rb — fully randomized: exactly one block per iteration, chosen
  uniformly among the primal block and the dual blocks.

Both are deterministic given the seed (SplitMix64 block choices with
rejection sampling). With a single dual block the partially randomized loop
executes the batch CMP iteration op for op, so trajectories coincide bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._engine import Marshal, Recorder, group_operator_norms, initial_point, new_counters
from .cmp import StepsizePolicy, solve_cmp
from .core import PoissonProblem, SolveReport
from .errors import DimensionError, DomainError
from .sparse import SparseMatrix

RECOMPUTE_EVERY = 1000
DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous split of m dual coordinates into b nonempty ordered blocks."""

    offsets: tuple

    def __post_init__(self):
        ofs = tuple(int(o) for o in self.offsets)
        if len(ofs) < 2 or ofs[0] != 0:
            raise DimensionError("offsets must start at 0")
        if any(b <= a for a, b in zip(ofs, ofs[1:])):
            raise DimensionError("blocks must be nonempty and ordered")
        object.__setattr__(self, "offsets", ofs)

    @classmethod
    def uniform(cls, m: int, b: int) -> "BlockPartition":
        if not 1 <= b <= m:
            raise DimensionError("need 1 <= b <= m")
        bounds = [round(k * m / b) for k in range(b + 1)]
        return cls(tuple(bounds))

    @classmethod
    def singletons(cls, m: int) -> "BlockPartition":
        return cls(tuple(range(m + 1)))

    @property
    def b(self) -> int:
        return len(self.offsets) - 1

    @property
    def m(self) -> int:
        return self.offsets[-1]

    def sizes(self) -> np.ndarray:
        ofs = np.asarray(self.offsets)
        return ofs[1:] - ofs[:-1]


@dataclass(frozen=True)
class BlockConstants:
    """Per-block coupling constants L_k = ||A_k||_{x->2} and the stepsize
    bound min_k (sqrt(2b) L_k)^{-1} of the randomized scheme."""

    l_blocks: np.ndarray
    stepsize_bound: float

    @property
    def l_m(self) -> float:
        return 1.0 / self.stepsize_bound


def block_constants(A: SparseMatrix, partition: BlockPartition,
                    setup_kind: str) -> BlockConstants:
    from .core import operator_norm

    if partition.m != A.rows:
        raise DimensionError("partition does not match the row count")
    ls = []
    for k in range(partition.b):
        block = A.row_block(partition.offsets[k], partition.offsets[k + 1])
        ls.append(operator_norm(block, setup_kind))
    ls = np.array(ls, dtype=np.float64)
    b = partition.b
    with np.errstate(divide="ignore"):
        bounds = np.where(ls > 0, 1.0 / (np.sqrt(2.0 * b) * ls), np.inf)
    return BlockConstants(l_blocks=ls, stepsize_bound=float(bounds.min()))


def _rb_theory_gamma(problem: PoissonProblem, partition: BlockPartition,
                     alpha: float, safety: float) -> float:
    """min_k safety / (sqrt(2b) G_k), G_k the alpha-weighted block constant."""
    b = partition.b
    gmax = 0.0
    alphas = np.array([g[2].alpha * alpha for g in problem.setup_groups])
    for k in range(partition.b):
        norms = group_operator_norms(problem, partition.offsets[k],
                                     partition.offsets[k + 1])
        gk = float(np.sqrt(np.sum(norms * norms / alphas)))
        gmax = max(gmax, gk)
    if gmax == 0.0:
        return 1.0
    return safety / (np.sqrt(2.0 * b) * gmax)


def _resolve_gamma(problem, partition, alpha, policy) -> float:
    if policy.kind == "constant":
        return float(policy.gamma)
    if policy.kind == "theory":
        return _rb_theory_gamma(problem, partition, alpha, policy.safety)
    raise ValueError("line search is not available for the randomized solvers")


def _pass_thresholds(report_every):
    if report_every is None:
        return None
    step = float(report_every)
    if step <= 0:
        return None
    return step


def _run_randomized(problem: PoissonProblem, partition: BlockPartition,
                    policy: StepsizePolicy, max_iters: int, seed: int,
                    alpha: float, report_every, f_star, full: bool) -> SolveReport:
    if partition.m != problem.m:
        raise DimensionError("partition does not cover the dual vector")
    mar = Marshal(problem, alpha)
    rec = Recorder(problem, f_star, None, max_iters)
    gamma = _resolve_gamma(problem, partition, alpha, policy)

    x, y = initial_point(problem)
    xbar = np.zeros_like(x)
    acc_y = np.zeros_like(y)
    last_s = np.zeros(partition.b)
    wsum = np.zeros(1)
    aty = problem.A.rmatvec(y)
    ofs = np.asarray(partition.offsets, dtype=np.int64)
    rng = np.array([seed], dtype=np.uint64)
    iter_io = np.zeros(1, dtype=np.int64)
    pass_io = np.zeros(1)
    counters, fdiag = new_counters()
    nblocks = partition.b + 1 if full else partition.b
    block_counts = np.zeros(nblocks, dtype=np.int64)
    if full:
        acc_x = np.zeros_like(x)
        last_sx = np.zeros(1)

    step = _pass_thresholds(report_every)
    rec.record(0, 0.0, x)

    def current_averages():
        w = wsum[0]
        if w == 0.0:
            return x, y
        if full:
            fx = acc_x.copy()
            dwx = w - last_sx[0]
            if dwx > 0:
                fx += dwx * x
            fy = acc_y.copy()
            for k in range(partition.b):
                dw = w - last_s[k]
                if dw > 0:
                    fy[ofs[k]:ofs[k + 1]] += dw * y[ofs[k]:ofs[k + 1]]
            return fx / w, fy / w
        if partition.b == 1:
            return xbar, acc_y  # direct mode keeps running averages
        fy = acc_y.copy()
        for k in range(partition.b):
            dw = w - last_s[k]
            if dw > 0:
                fy[ofs[k]:ofs[k + 1]] += dw * y[ofs[k]:ofs[k + 1]]
        return xbar, fy / w

    next_target = step if step is not None else np.inf
    while iter_io[0] < max_iters:
        target = next_target
        with rec.timed():
            if full:
                status = K.fullrb_chunk(
                    max_iters - int(iter_io[0]), target, *mar.matvec_args(),
                    mar.sp, mar.c, *mar.group_args(),
                    ofs, x, y, acc_x, last_sx, acc_y, last_s, wsum, aty,
                    gamma, rng, iter_io, pass_io, block_counts,
                    RECOMPUTE_EVERY, DRIFT_TOL, counters, fdiag)
            else:
                status = K.rb_chunk(
                    max_iters - int(iter_io[0]), target, *mar.matvec_args(),
                    mar.sp, mar.c, *mar.group_args(),
                    ofs, x, y, xbar, acc_y, last_s, wsum, aty,
                    gamma, rng, iter_io, pass_io, block_counts,
                    RECOMPUTE_EVERY, DRIFT_TOL, counters, fdiag)
        if status == K.STATUS_DOMAIN:
            raise DomainError("iterate lost strict positivity")
        if status == K.STATUS_DRIFT:
            raise ArithmeticError(
                f"cached A^T y drifted beyond {DRIFT_TOL} "
                f"(max {fdiag[K.DIAG_DRIFT_MAX]:.3e})")
        ax, _ = current_averages()
        rec.record(int(iter_io[0]), float(pass_io[0]), ax)
        if step is not None:
            while next_target <= pass_io[0]:
                next_target += step

    fx, fy = current_averages()
    report = rec.report
    report.final_x = fx.copy()
    report.final_y = fy.copy()
    report.avg_defined = wsum[0] > 0
    report.diagnostics = {
        "solver": "full-rb" if full else "rb-cmp",
        "alpha": alpha,
        "gamma0": gamma,
        "seed": seed,
        "blocks": partition.b,
        "block_counts": block_counts.copy(),
        "clamp_events": int(counters[K.CNT_CLAMP]),
        "drift_max": float(fdiag[K.DIAG_DRIFT_MAX]),
        "last_x": x,
        "last_y": y,
    }
    return report


def solve_rb_cmp(problem: PoissonProblem, partition: BlockPartition,
                 policy: StepsizePolicy | None = None, max_iters: int = 1000,
                 seed: int = 0, alpha: float = 1.0, report_every=None,
                 f_star: float | None = None) -> SolveReport:
    """Partially randomized block mirror prox (primal every step, one dual block)."""
    policy = policy or StepsizePolicy.theory()
    return _run_randomized(problem, partition, policy, max_iters, seed, alpha,
                           report_every, f_star, full=False)


def solve_full_rb(problem: PoissonProblem, partition: BlockPartition | None,
                  policy: StepsizePolicy | None = None, max_iters: int = 1000,
                  seed: int = 0, alpha: float = 1.0, report_every=None,
                  f_star: float | None = None) -> SolveReport:
    """Fully randomized block mirror prox over {primal} + dual blocks.

    ``partition=None`` means one block covering the whole space, in which
    case every iteration updates everything and the scheme *is* batch CMP;
    that case delegates to solve_cmp with the same stepsize policy.
    """
    policy = policy or StepsizePolicy.theory()
    if partition is None:
        report = solve_cmp(problem, alpha=alpha, policy=policy,
                           max_iters=max_iters, report_every=report_every,
                           f_star=f_star)
        report.diagnostics["solver"] = "full-rb"
        report.diagnostics["blocks"] = 1
        return report
    return _run_randomized(problem, partition, policy, max_iters, seed, alpha,
                           report_every, f_star, full=True)
