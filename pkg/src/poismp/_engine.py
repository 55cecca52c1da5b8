"""Shared driver plumbing: problem marshaling, initialization, history recording.

Solvers run compiled kernels between history checkpoints; this module owns the
translation from PoissonProblem to kernel arrays and the bookkeeping that is
identical across solvers (initial points, theory stepsizes, history rows with
objective evaluation kept outside the timed sections).
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels as K
from .core import HistoryRow, PoissonProblem, SolveReport, mass_identity_residual, objective, operator_norm

_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_D = np.empty((0, 0), dtype=np.float64)


class Marshal:
    """Kernel-ready view of a problem: matvec arrays + primal group table."""

    def __init__(self, problem: PoissonProblem, alpha_scale: float = 1.0):
        A = problem.A
        self.use_dense = A.dense is not None
        if self.use_dense:
            self.D = A.dense
            self.DT = A.dense_t
            self.csr_data = self.csc_data = _EMPTY_F
            self.csr_ind = self.csr_ptr = self.csc_ind = self.csc_ptr = _EMPTY_I
        else:
            self.D = self.DT = _EMPTY_D
            self.csr_data = A.csr.data.astype(np.float64)
            self.csr_ind = A.csr.indices.astype(np.int64)
            self.csr_ptr = A.csr.indptr.astype(np.int64)
            self.csc_data = A.csc.data.astype(np.float64)
            self.csc_ind = A.csc.indices.astype(np.int64)
            self.csc_ptr = A.csc.indptr.astype(np.int64)
        self.sp = np.ascontiguousarray(problem.s + problem.penalty_vector)
        self.c = np.ascontiguousarray(problem.c)
        groups = problem.setup_groups
        self.g_start = np.array([g[0] for g in groups], dtype=np.int64)
        self.g_stop = np.array([g[1] for g in groups], dtype=np.int64)
        self.g_kind = np.array(
            [0 if g[2].kind == "entropy" else 1 for g in groups], dtype=np.int64
        )
        self.g_alpha = np.array(
            [g[2].alpha * alpha_scale for g in groups], dtype=np.float64
        )
        self.g_cap = np.array(
            [g[2].cap if g[2].cap is not None else -1.0 for g in groups],
            dtype=np.float64,
        )
        self.g_exact = np.array(
            [g[2].exact_mass if g[2].exact_mass is not None else -1.0 for g in groups],
            dtype=np.float64,
        )

    def matvec_args(self):
        return (self.use_dense, self.D, self.DT, self.csr_data, self.csr_ind,
                self.csr_ptr, self.csc_data, self.csc_ind, self.csc_ptr)

    def group_args(self):
        return (self.g_start, self.g_stop, self.g_kind, self.g_alpha,
                self.g_cap, self.g_exact)


def group_operator_norms(problem: PoissonProblem, row_start: int = 0,
                         row_stop: int | None = None) -> np.ndarray:
    """||A_rows||_{x->2} restricted to each primal group's columns."""
    A = problem.A if row_start == 0 and row_stop in (None, problem.m) \
        else problem.A.row_block(row_start, row_stop)
    out = []
    for a, b, setup in problem.setup_groups:
        if setup.kind == "entropy":
            norms = A.column_norms(a, b)
            out.append(float(norms.max()) if norms.size else 0.0)
        else:
            sub = A.csr[:, a:b].tocoo()
            from .sparse import SparseMatrix

            block = SparseMatrix(A.rows, b - a, sub.row, sub.col, sub.data) \
                if sub.nnz else None
            out.append(operator_norm(block, "euclidean") if block is not None else 0.0)
    return np.array(out, dtype=np.float64)


def mixed_lipschitz(problem: PoissonProblem, alpha_scale: float = 1.0) -> float:
    """Lipschitz constant of the coupling w.r.t. the aggregated norm
    sqrt(sum_g alpha_g ||x_g||^2 + ||y||^2): sqrt(sum_g L_g^2 / alpha_g)."""
    norms = group_operator_norms(problem)
    alphas = np.array([g[2].alpha * alpha_scale for g in problem.setup_groups])
    return float(np.sqrt(np.sum(norms * norms / alphas)))


def initial_point(problem: PoissonProblem):
    """x1 = uniform positive vector scaled onto the shell s^T x + h(x) = sum c
    (clipped into any caps); y1 = the inner maximizer c / (A x1)."""
    n = problem.n
    denom = float((problem.s + problem.penalty_vector).sum())
    t = problem.c_sum / denom if denom > 0 else 1.0
    x = np.full(n, t, dtype=np.float64)
    for a, b, setup in problem.setup_groups:
        if setup.kind == "entropy":
            target = setup.exact_mass if setup.exact_mass is not None else setup.cap
            mass = x[a:b].sum()
            if setup.exact_mass is not None:
                x[a:b] *= target / mass
            elif target is not None and mass > target:
                x[a:b] *= target / mass
    ax = problem.A.matvec(x)
    y = np.where(ax > 0, problem.c / np.where(ax > 0, ax, 1.0), 1.0)
    return x, y


class Recorder:
    """Collects history rows; checkpoint work is excluded from elapsed time."""

    def __init__(self, problem: PoissonProblem, f_star: float | None,
                 report, max_iters: int, rel_mode: str = "subopt"):
        if rel_mode not in ("subopt", "accuracy"):
            raise ValueError("rel_mode must be 'subopt' or 'accuracy'")
        self.problem = problem
        self.f_star = f_star
        self.rel_mode = rel_mode
        self.report = SolveReport()
        self.f_init: float | None = None
        self.solve_seconds = 0.0
        self.checkpoints = _checkpoint_iters(report, max_iters)

    def record(self, iteration: int, passes: float, x: np.ndarray) -> None:
        f = objective(self.problem, x)
        if self.f_init is None:
            self.f_init = f
        rel = None
        if self.f_star is not None:
            # "subopt": the (f - f*)/(f_1 - f*) relative-suboptimality metric;
            # "accuracy": the imaging metric (f - f*)/|f*|.
            denom = (self.f_init - self.f_star) if self.rel_mode == "subopt" \
                else abs(self.f_star)
            if denom > 0:
                rel = (f - self.f_star) / denom
        self.report.append(HistoryRow(
            iteration=iteration,
            effective_passes=passes,
            objective=f,
            relative_subopt=rel,
            mass_residual=mass_identity_residual(self.problem, x),
            elapsed_ms=self.solve_seconds * 1e3,
        ))

    def timed(self):
        return _Timed(self)


class _Timed:
    def __init__(self, rec: Recorder):
        self.rec = rec

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.rec.solve_seconds += time.perf_counter() - self.t0
        return False


def _checkpoint_iters(report, max_iters: int) -> list[int]:
    """Iteration numbers at which to write history rows (always ends at max)."""
    if report is None:
        pts = []
    elif isinstance(report, (int, float)):
        step = int(report)
        pts = list(range(step, max_iters + 1, step)) if step > 0 else []
    else:
        pts = [int(p) for p in report]
    pts = sorted({p for p in pts if 0 < p <= max_iters})
    if max_iters > 0 and (not pts or pts[-1] != max_iters):
        pts.append(max_iters)
    return pts


def new_counters():
    return np.zeros(8, dtype=np.int64), np.array(
        [-np.inf, 0.0, 0.0, 0.0], dtype=np.float64
    )
