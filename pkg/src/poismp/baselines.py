"""Comparison solvers: composite mirror descent, proximal gradient, and its
accelerated variant.

These are the O(1/sqrt(t)) and O(L/t^2) reference points against the mirror
prox solvers. The objective is not globally Lipschitz-smooth, so PG and APG
use domain-safe backtracking: a candidate is rejected (and the local L
doubled) if it leaves the log domain {Ax > 0} or violates the quadratic
upper-bound inequality; APG additionally restarts its momentum whenever the
extrapolated point leaves the log domain. All three report the best-so-far
objective, which is nonincreasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._engine import Marshal, Recorder, initial_point, new_counters
from .core import PoissonProblem, SolveReport, objective
from .errors import DomainError, StallError
from .prox import prox_euclidean_l1_nonneg

_BOUND_SLACK = 1e-12  # relative slack in the quadratic-bound comparison
_MAX_REJECTS = 200
_L_FLOOR = 1e-12


@dataclass(frozen=True)
class BaselineConfig:
    """kind: mirror_descent | prox_grad | acc_prox_grad."""

    kind: str = "prox_grad"
    gamma0: float = 1.0
    l0: float = 1.0

    def __post_init__(self):
        if self.gamma0 <= 0 or self.l0 <= 0:
            raise ValueError("gamma0 and l0 must be positive")


def solve_md(problem: PoissonProblem, gamma0: float, max_iters: int,
             report_every=None, f_star: float | None = None) -> SolveReport:
    """Composite mirror descent x^{t+1} = Prox^{gamma_t h}_{x^t}(gamma_t grad L),
    gamma_t = gamma0 / sqrt(t), under the problem's entropy setup."""
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    mar = Marshal(problem, 1.0)
    rec = Recorder(problem, f_star, report_every, max_iters)
    x, _ = initial_point(problem)
    best_x = x.copy()
    best_f = np.array([np.inf])
    t_io = np.zeros(1, dtype=np.int64)
    counters, _ = new_counters()

    rec.record(0, 0.0, x)
    done = 0
    for cp in rec.checkpoints:
        with rec.timed():
            status = K.md_chunk(
                cp - done, *mar.matvec_args(), mar.sp, mar.c, *mar.group_args(),
                x, gamma0, t_io, best_f, best_x, counters)
        done = int(t_io[0])
        if status == K.STATUS_DOMAIN:
            raise DomainError("gradient requested outside the log domain")
        f_cur = objective(problem, x)
        if f_cur < best_f[0]:
            best_f[0] = f_cur
            best_x[:] = x
        rec.record(done, float(done), best_x)
        if done >= max_iters:
            break

    report = rec.report
    report.final_x = best_x.copy()
    report.final_y = None
    report.diagnostics = {
        "solver": "md",
        "gamma0": gamma0,
        "best_objective": float(best_f[0]),
        "clamp_events": int(counters[K.CNT_CLAMP]),
        "last_x": x,
    }
    return report


def _smooth_value(problem, x, ax):
    return float(problem.s @ x - problem.c @ np.log(ax))


def _pg_like(problem: PoissonProblem, config: BaselineConfig, max_iters: int,
             report_every, f_star, accelerated: bool) -> SolveReport:
    pen = problem.penalty_vector
    rec = Recorder(problem, f_star, report_every, max_iters)
    x, _ = initial_point(problem)
    ax = problem.A.matvec(x)
    if np.any(ax <= 0):
        raise DomainError("initial point outside the log domain")
    rec.record(0, 0.0, x)

    L = config.l0
    z = x.copy()
    az = ax.copy()
    tk = 1.0
    best_f = objective(problem, x)
    best_x = x.copy()
    passes = 0.0
    total_rejects = 0
    restarts = 0
    checkpoints = list(rec.checkpoints)

    for it in range(1, max_iters + 1):
        with rec.timed():
            base, abase = (z, az) if accelerated else (x, ax)
            lval = _smooth_value(problem, base, abase)
            grad = problem.s - problem.A.rmatvec(problem.c / abase)
            streak = 0
            while True:
                xc = prox_euclidean_l1_nonneg(base, grad / L, pen / L)
                axc = problem.A.matvec(xc)
                if np.all(axc > 0):
                    lc = _smooth_value(problem, xc, axc)
                    dx = xc - base
                    bound = lval + float(grad @ dx) + 0.5 * L * float(dx @ dx)
                    if lc <= bound + _BOUND_SLACK * max(1.0, abs(lval)):
                        break
                L *= 2.0
                streak += 1
                total_rejects += 1
                passes += 0.5
                if streak > _MAX_REJECTS:
                    raise StallError(
                        f"{_MAX_REJECTS} consecutive backtracking rejections")
            if accelerated:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
                z = xc + ((tk - 1.0) / t_next) * (xc - x)
                az = problem.A.matvec(z)
                if np.any(az <= 0):
                    # extrapolation left the log domain: restart momentum
                    restarts += 1
                    t_next = 1.0
                    z = xc.copy()
                    az = axc.copy()
                tk = t_next
            x = xc
            ax = axc
            L = max(L * 0.9, _L_FLOOR)
            passes += 1.0
            f = lc + problem.penalty.value(x)
            if f < best_f:
                best_f = f
                best_x = x.copy()
        if checkpoints and it >= checkpoints[0]:
            checkpoints.pop(0)
            rec.record(it, passes, best_x)

    report = rec.report
    report.final_x = best_x.copy()
    report.final_y = None
    report.diagnostics = {
        "solver": "apg" if accelerated else "pg",
        "l0": config.l0,
        "l_final": L,
        "rejects": total_rejects,
        "restarts": restarts,
        "best_objective": best_f,
        "last_x": x,
    }
    return report


def solve_pg(problem: PoissonProblem, config: BaselineConfig | None = None,
             max_iters: int = 1000, report_every=None,
             f_star: float | None = None) -> SolveReport:
    """Proximal gradient with domain-safe backtracking (Euclidean geometry)."""
    return _pg_like(problem, config or BaselineConfig(kind="prox_grad"),
                    max_iters, report_every, f_star, accelerated=False)


def solve_apg(problem: PoissonProblem, config: BaselineConfig | None = None,
              max_iters: int = 1000, report_every=None,
              f_star: float | None = None) -> SolveReport:
    """Accelerated proximal gradient with the same backtracking plus
    momentum restarts at log-domain violations."""
    return _pg_like(problem, config or BaselineConfig(kind="acc_prox_grad"),
                    max_iters, report_every, f_star, accelerated=True)
