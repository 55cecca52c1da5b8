"""Batch composite mirror prox for the saddle reformulation.

One iteration does two evaluations of the bilinear operator (four matvecs):
an extragradient half step from (x^t, y^t), then a full step using the
gradients at the extragradient point, both proxed from the same base point.
The primal block uses the problem's grouped Bregman setup; the dual block is
Euclidean with the closed-form log-barrier prox

    yhat = Q^gamma(gamma * A x - y),   Q^beta(eta)_i solves v^2 + eta v = beta c_i.

The output is the stepsize-weighted average of the extragradient points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from ._engine import Marshal, Recorder, initial_point, mixed_lipschitz, new_counters
from .core import PoissonProblem, SolveReport
from .errors import DomainError, StallError
from .prox import prox_entropy_capped, prox_euclidean_l1_nonneg, prox_log_barrier, bregman

DRIFT_TOL = 1e-8


@dataclass
class SaddleState:
    """Current iterates, extragradient points, and running ergodic averages."""

    x: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray | None = None
    y_hat: np.ndarray | None = None
    avg_x: np.ndarray | None = None
    avg_y: np.ndarray | None = None
    weight_sum: float = 0.0

    @classmethod
    def initial(cls, problem: PoissonProblem) -> "SaddleState":
        x, y = initial_point(problem)
        return cls(x=x, y=y)


@dataclass(frozen=True)
class StepsizePolicy:
    """constant(gamma) | theory(safety <= 1) | line_search(init, 0.5, 1.2)."""

    kind: str = "theory"
    gamma: float | None = None
    safety: float = 1.0
    shrink: float = 0.5
    grow: float = 1.2
    max_shrinks: int = 60

    @classmethod
    def constant(cls, gamma: float) -> "StepsizePolicy":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return cls(kind="constant", gamma=gamma)

    @classmethod
    def theory(cls, safety: float = 1.0) -> "StepsizePolicy":
        if not 0 < safety <= 1:
            raise ValueError("safety factor must be in (0, 1]")
        return cls(kind="theory", safety=safety)

    @classmethod
    def line_search(cls, init: float | None = None, shrink: float = 0.5,
                    grow: float = 1.2) -> "StepsizePolicy":
        return cls(kind="line_search", gamma=init, shrink=shrink, grow=grow)

    def resolve(self, problem: PoissonProblem, alpha_scale: float) -> float:
        """The stepsize the policy starts from (constant value or trial init)."""
        if self.kind == "constant":
            return float(self.gamma)
        lip = mixed_lipschitz(problem, alpha_scale)
        theory = self.safety / lip if lip > 0 else 1.0
        if self.kind == "theory":
            return theory
        return float(self.gamma) if self.gamma is not None else theory


# -- reference single step (readable, numpy) ----------------------------------


def cmp_step(problem: PoissonProblem, state: SaddleState, gamma: float,
             alpha: float = 1.0) -> SaddleState:
    """One composite mirror prox step; returns the updated state.

    This is the readable reference used by the tests; solve_cmp runs the
    compiled equivalent. Exactly two operator evaluations, four matvecs.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x, y = state.x, state.y
    pen = problem.penalty_vector

    def xprox(grad):
        out = np.empty_like(x)
        for a, b, setup in problem.setup_groups:
            al = setup.alpha * alpha
            if setup.kind == "entropy":
                out[a:b] = prox_entropy_capped(
                    x[a:b], gamma * grad[a:b], al,
                    linear_penalty=gamma * pen[a:b],
                    cap=setup.cap, exact_mass=setup.exact_mass)
            else:
                out[a:b] = prox_euclidean_l1_nonneg(
                    x[a:b], gamma * grad[a:b] / al, gamma * pen[a:b] / al)
        return out

    x_hat = xprox(problem.s - problem.A.rmatvec(y))
    y_hat = prox_log_barrier(gamma * problem.A.matvec(x) - y, gamma, problem.c)
    x_next = xprox(problem.s - problem.A.rmatvec(y_hat))
    y_next = prox_log_barrier(gamma * problem.A.matvec(x_hat) - y, gamma, problem.c)

    w = state.weight_sum + gamma
    if state.avg_x is None:
        avg_x, avg_y = x_hat.copy(), y_hat.copy()
    else:
        avg_x = state.avg_x + (gamma / w) * (x_hat - state.avg_x)
        avg_y = state.avg_y + (gamma / w) * (y_hat - state.avg_y)
    if np.any(x_next <= 0) or np.any(y_next <= 0):
        raise DomainError("iterate lost strict positivity")
    return SaddleState(x=x_next, y=y_next, x_hat=x_hat, y_hat=y_hat,
                       avg_x=avg_x, avg_y=avg_y, weight_sum=w)


def acceptance_quantity(problem: PoissonProblem, state: SaddleState,
                        gamma: float, alpha: float = 1.0) -> float:
    """sigma_t = gamma <F(uhat)-F(u), uhat-u+> - V(u+, uhat) - V(uhat, u)
    for the candidate step at gamma, under the aggregated Bregman distance.
    Nonpositive sigma is the engine of the O(1/t) rate; the line search
    accepts exactly when sigma_t <= 0."""
    nxt = cmp_step(problem, state, gamma, alpha)
    x, y = state.x, state.y
    xh, yh, xp, yp = nxt.x_hat, nxt.y_hat, nxt.x, nxt.y
    dFx = problem.A.rmatvec(y) - problem.A.rmatvec(yh)
    dFy = problem.A.matvec(xh) - problem.A.matvec(x)
    ip = float(dFx @ (xh - xp) + dFy @ (yh - yp))
    v1 = 0.5 * float((yp - yh) @ (yp - yh))
    v2 = 0.5 * float((yh - y) @ (yh - y))

    def kl_stable(pv, qv):
        d = (pv - qv) / qv
        return float(np.sum(qv * ((1.0 + d) * np.log1p(d) - d)))

    for a, b, setup in problem.setup_groups:
        al = setup.alpha * alpha
        if setup.kind == "entropy":
            v1 += al * kl_stable(xp[a:b], xh[a:b])
            v2 += al * kl_stable(xh[a:b], x[a:b])
        else:
            v1 += al * bregman(setup, xp[a:b], xh[a:b])
            v2 += al * bregman(setup, xh[a:b], x[a:b])
    return gamma * ip - v1 - v2


def line_search_accept(problem: PoissonProblem, state: SaddleState,
                       gamma: float, alpha: float = 1.0) -> bool:
    """Accept the candidate stepsize iff its acceptance quantity is <= 0."""
    return acceptance_quantity(problem, state, gamma, alpha) <= 0.0


# -- full solve ----------------------------------------------------------------


def solve_cmp(problem: PoissonProblem, alpha: float | None = None,
              policy: StepsizePolicy | None = None, max_iters: int = 1000,
              report_every=None, f_star: float | None = None,
              theta_x: float | None = None, theta_y: float | None = None,
              track_sigma: bool = False, rel_mode: str = "subopt",
              checkpoint_hook=None,
              x0: np.ndarray | None = None, y0: np.ndarray | None = None) -> SolveReport:
    """Run composite mirror prox and return the solve report.

    ``alpha`` scales every primal group's strong-convexity weight; when left
    None it defaults to theta_y/theta_x if both bounding-set radii are given,
    else 1. The theory policy uses gamma = safety * sqrt(alpha)/||A||_{x->2}
    (its grouped generalization). ``track_sigma`` records the per-step
    acceptance quantity's maximum under fixed stepsizes.
    """
    policy = policy or StepsizePolicy.theory()
    if alpha is None:
        alpha = (theta_y / theta_x) if (theta_x and theta_y) else 1.0
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    mar = Marshal(problem, alpha)
    rec = Recorder(problem, f_star, report_every, max_iters, rel_mode=rel_mode)

    if x0 is not None:
        x = np.array(x0, dtype=np.float64)
        ax = problem.A.matvec(x)
        y = np.array(y0, dtype=np.float64) if y0 is not None else \
            np.where(ax > 0, problem.c / np.where(ax > 0, ax, 1.0), 1.0)
    else:
        x, y = initial_point(problem)
        if y0 is not None:
            y = np.array(y0, dtype=np.float64)
    xbar = np.zeros_like(x)
    ybar = np.zeros_like(y)
    wsum = np.zeros(1)
    counters, fdiag = new_counters()

    gamma0 = policy.resolve(problem, alpha)
    pkind = 1 if policy.kind == "line_search" else 0
    ls_gamma = np.array([gamma0])

    rec.record(0, 0.0, x)
    done = 0
    for cp in rec.checkpoints:
        chunk = cp - done
        with rec.timed():
            status = K.cmp_chunk(
                chunk, *mar.matvec_args(), mar.sp, mar.c, *mar.group_args(),
                x, y, xbar, ybar, wsum,
                pkind, gamma0, ls_gamma, policy.grow, policy.shrink,
                policy.max_shrinks, track_sigma, counters, fdiag)
        done = cp
        if status == K.STATUS_STALL:
            raise StallError(f"line search shrank {policy.max_shrinks} times in a row")
        if status == K.STATUS_DOMAIN:
            raise DomainError("iterate lost strict positivity")
        rec.record(done, float(done), xbar)
        if checkpoint_hook is not None:
            checkpoint_hook(done, xbar, ybar, x, y)

    report = rec.report
    report.final_x = xbar if done > 0 else x.copy()
    report.final_y = ybar if done > 0 else y.copy()
    report.avg_defined = done > 0
    report.diagnostics = {
        "solver": "cmp",
        "alpha": alpha,
        "gamma0": gamma0,
        "policy": policy.kind,
        "clamp_events": int(counters[K.CNT_CLAMP]),
        "ls_shrinks": int(counters[K.CNT_SHRINKS]),
        "ls_trials": int(counters[K.CNT_LS_TRIALS]),
        "sigma_max": float(fdiag[K.DIAG_SIGMA_MAX]),
        "sigma_violations": int(counters[K.CNT_SIGMA_POS]),
        "theta_x": theta_x,
        "theta_y": theta_y,
        "last_x": x,
        "last_y": y,
    }
    return report
