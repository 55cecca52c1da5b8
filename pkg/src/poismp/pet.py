"""Emission-tomography reconstruction as a simplex-constrained saddle problem.

The system matrix is column stochastic, so summing the optimality conditions
pins the total image mass to the total detected counts theta; the solver
therefore runs the mirror prox iteration with an exact-mass entropy prox (the
multiplicative update renormalized to theta every step). With noiseless
counts w = A x_true the optimum is x_true itself and the dual optimum is the
all-ones vector, which gives this module its accuracy references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._engine import mixed_lipschitz
from .cmp import StepsizePolicy, solve_cmp
from .core import PoissonProblem, SolveReport, objective
from .errors import DimensionError, DomainError
from .prox import ProximalSetup
from .rng import SplitMix64
from .sparse import SparseMatrix

_COLUMN_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PETInstance:
    """Column-stochastic system matrix, detector counts, optional truth."""

    A: SparseMatrix
    counts: np.ndarray
    x_true: np.ndarray | None = None
    noiseless: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.size != self.A.rows:
            raise DimensionError("counts length must match detector rows")
        if np.any(counts < 0):
            raise DomainError("counts must be nonnegative")
        sums = self.A.col_sums()
        if np.any(np.abs(sums - 1.0) > _COLUMN_SUM_TOL):
            raise DimensionError("system matrix columns must sum to one")
        if counts.sum() <= 0:
            raise DomainError("total counts must be positive")
        object.__setattr__(self, "counts", counts)

    @property
    def theta(self) -> float:
        return float(self.counts.sum())


def generate_system_matrix(m: int, n: int, density: float, seed: int = 0) -> SparseMatrix:
    """Random column-stochastic matrix: each column hits ceil(density*m)
    distinct rows with positive weights normalized to unit sum."""
    k = int(np.ceil(density * m))
    if k < 1:
        raise ValueError("density * m must be at least 1")
    if k > m:
        raise ValueError("density cannot exceed 1")
    rng = SplitMix64(seed)
    rows = np.empty(k * n, dtype=np.int64)
    cols = np.empty(k * n, dtype=np.int64)
    vals = np.empty(k * n, dtype=np.float64)
    pos = 0
    for j in range(n):
        chosen: set[int] = set()
        while len(chosen) < k:
            chosen.add(rng.uniform_int(m))
        weights = np.array([0.1 + rng.uniform() for _ in range(k)])
        weights /= weights.sum()
        for i, w in zip(sorted(chosen), weights):
            rows[pos] = i
            cols[pos] = j
            vals[pos] = w
            pos += 1
    return SparseMatrix(m, n, rows, cols, vals)


def generate_phantom(side: int) -> np.ndarray:
    """Concentric-disc intensity image on a side x side grid, flattened
    row-major, values in [0, 1]. Deterministic; no seed."""
    if side < 8:
        raise ValueError("side must be at least 8")
    center = (side - 1) / 2.0
    yy, xx = np.mgrid[0:side, 0:side]
    r = np.sqrt((yy - center) ** 2 + (xx - center) ** 2) / side
    img = np.zeros((side, side))
    img[r < 0.45] = 0.25
    img[r < 0.30] = 0.60
    img[r < 0.15] = 1.00
    return img.ravel()


def simulate_counts(A: SparseMatrix, x_true: np.ndarray, mode: str = "noiseless",
                    seed: int = 0) -> np.ndarray:
    """Detector data: exact A @ x_true, or independent Poisson draws around it."""
    x_true = np.asarray(x_true, dtype=np.float64)
    if np.any(x_true < 0):
        raise DomainError("x_true must be nonnegative")
    mean = A.matvec(x_true)
    if mode == "noiseless":
        return mean
    if mode != "poisson":
        raise ValueError("mode must be 'noiseless' or 'poisson'")
    rng = SplitMix64(seed)
    return np.array([float(rng.poisson(mu)) for mu in mean])


def desk_instance(side: int = 32, rows_per_pixel: float = 2.0,
                  density: float = 0.005, seed: int = 7,
                  mode: str = "noiseless") -> PETInstance:
    """The small reference instance used by the acceptance suite."""
    n = side * side
    m = int(rows_per_pixel * n)
    A = generate_system_matrix(m, n, density, seed)
    x_true = generate_phantom(side)
    w = simulate_counts(A, x_true, mode, seed=seed + 1)
    return PETInstance(A=A, counts=w, x_true=x_true, noiseless=(mode == "noiseless"))


def build_pet_problem(instance: PETInstance, alpha: float = 1.0) -> PoissonProblem:
    """PoissonProblem with s = column sums (computed before zero-count rows
    are dropped, so their linear parts stay in s) and the exact-mass entropy
    setup at theta."""
    setup = ProximalSetup.entropy_exact(instance.theta, alpha=alpha)
    return PoissonProblem.from_counts(instance.A, instance.counts,
                                      primal_setup=setup)


def reference_objective(instance: PETInstance, problem: PoissonProblem | None = None) -> float | None:
    """f* = f(x_true) for a noiseless instance; None otherwise."""
    if instance.x_true is None or not instance.noiseless:
        return None
    problem = problem or build_pet_problem(instance)
    return objective(problem, np.asarray(instance.x_true, dtype=np.float64))


# -- instance files ------------------------------------------------------------
#
# matrix: same text conventions as the problem format ("n m" header then
# "i j value" lines, 0-based); counts: one number per line.


def write_matrix(path: str, A: SparseMatrix) -> None:
    coo = A.csr.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{A.cols} {A.rows}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v!r}\n")


def read_matrix(path: str) -> SparseMatrix:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DimensionError("empty matrix file")
    try:
        n, m = (int(tok) for tok in lines[0].split())
        rows, cols, vals = [], [], []
        for ln in lines[1:]:
            i_tok, j_tok, v_tok = ln.split()
            rows.append(int(i_tok))
            cols.append(int(j_tok))
            vals.append(float(v_tok))
    except ValueError as exc:
        raise DimensionError(f"malformed matrix file: {exc}") from exc
    return SparseMatrix(m, n, rows, cols, vals)


def write_counts(path: str, counts: np.ndarray) -> None:
    with open(path, "w") as fh:
        for w in counts:
            fh.write(f"{w!r}\n")


def read_counts(path: str) -> np.ndarray:
    with open(path) as fh:
        try:
            return np.array([float(ln.strip()) for ln in fh if ln.strip()])
        except ValueError as exc:
            raise DimensionError(f"malformed counts file: {exc}") from exc


def solve_pet(instance: PETInstance, alpha: float = 1.0,
              policy: StepsizePolicy | None = None, max_iters: int = 5000,
              report_every=None, f_star: float | None = None) -> SolveReport:
    """Mirror prox on the PET saddle problem; every iterate sums to theta.

    The default stepsize scales the theory constant by sqrt(theta): on the
    mass-theta simplex the entropy distance generator is only (1/theta)-
    strongly convex w.r.t. l1, so the safe constant step is
    sqrt(alpha/theta) / ||A||_{x->2}.

    History rows carry the imaging accuracy metric (f - f*)/|f*| when a
    reference value is available. Diagnostics include per-checkpoint
    ``dual_dev`` (sup-norm distance of the averaged dual from 1) and
    ``mass_dev_max`` (worst |sum x - theta| over checkpoints).
    """
    problem = build_pet_problem(instance, alpha)
    theta = instance.theta
    if f_star is None:
        f_star = reference_objective(instance, problem)
    if policy is None:
        lip = mixed_lipschitz(problem, 1.0)
        gamma = np.sqrt(1.0 / theta) / lip if lip > 0 else 1.0
        policy = StepsizePolicy.constant(gamma)

    dual_dev: list[tuple[int, float]] = []
    mass_dev = [0.0]

    def hook(iteration, xbar, ybar, x_cur, y_cur):
        dual_dev.append((iteration, float(np.max(np.abs(ybar - 1.0)))))
        mass_dev[0] = max(mass_dev[0], abs(float(x_cur.sum()) - theta),
                          abs(float(xbar.sum()) - theta))

    report = solve_cmp(problem, alpha=1.0, policy=policy, max_iters=max_iters,
                       report_every=report_every, f_star=f_star,
                       rel_mode="accuracy", checkpoint_hook=hook)
    report.diagnostics["solver"] = "pet-cmp"
    report.diagnostics["theta"] = theta
    report.diagnostics["dual_dev"] = dual_dev
    report.diagnostics["mass_dev_max"] = mass_dev[0]
    report.diagnostics["f_star"] = f_star
    return report
