"""Problem representation, objective/operator evaluation, and shared constants.

The model: minimize over the nonnegative orthant

    f(x) = s^T x - sum_i c_i log(a_i^T x) + h(x)

with nonnegative data ``s`` (length n), positive weights ``c`` (length m) and
a nonnegative m x n matrix ``A`` whose rows are the ``a_i``. Its saddle
reformulation replaces each log by its Fenchel representation:

    Phi(x, y) = s^T x - y^T A x + sum_i c_i log(y_i) + h(x) + c0,

with ``c0 = sum_i c_i (1 - log c_i)``. Reported saddle values include c0;
objective values do not.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, DimensionError, DomainError
from .prox import ProximalSetup
from .sparse import SparseMatrix

_POWER_ITER_CAP = 1000
_POWER_ITER_RTOL = 1e-6


@dataclass(frozen=True)
class PenaltySpec:
    """Separable penalty ``h(x) = lambda1 * sum_j w_j |x_j|``.

    ``weights`` is an optional 0/1 (or general nonnegative) mask restricting
    the penalty to part of the variable, as in the network problem where only
    the infectivity block is penalized. h is positively homogeneous.
    """

    lambda1: float = 0.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be nonnegative")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if np.any(w < 0):
                raise ValueError("penalty weights must be nonnegative")
            object.__setattr__(self, "weights", w)

    @classmethod
    def none(cls) -> "PenaltySpec":
        return cls(0.0)

    @classmethod
    def l1(cls, lambda1: float, weights=None) -> "PenaltySpec":
        return cls(lambda1, weights)

    @property
    def is_zero(self) -> bool:
        return self.lambda1 == 0.0

    def value(self, x: np.ndarray) -> float:
        if self.lambda1 == 0.0:
            return 0.0
        ax = np.abs(x)
        if self.weights is not None:
            return self.lambda1 * float(self.weights @ ax)
        return self.lambda1 * float(ax.sum())

    def subgradient_positive(self, n: int) -> np.ndarray:
        """Gradient of h on the open positive orthant, as a length-n vector."""
        if self.weights is not None:
            if self.weights.size != n:
                raise DimensionError("penalty weight length mismatch")
            return self.lambda1 * self.weights
        return np.full(n, self.lambda1)


def _normalize_groups(setup, n: int):
    """Primal geometry as an ordered tuple of (start, stop, ProximalSetup)."""
    if isinstance(setup, ProximalSetup):
        return ((0, n, setup),)
    groups = tuple((int(a), int(b), s) for a, b, s in setup)
    pos = 0
    for a, b, s in groups:
        if a != pos or b <= a:
            raise DimensionError("setup groups must tile 0..n in order")
        if not isinstance(s, ProximalSetup):
            raise DimensionError("each group needs a ProximalSetup")
        pos = b
    if pos != n:
        raise DimensionError("setup groups must cover all coordinates")
    return groups


class PoissonProblem:
    """Immutable problem instance consumed by every solver."""

    def __init__(self, s, c, A: SparseMatrix, penalty: PenaltySpec | None = None,
                 primal_setup=None):
        s = np.asarray(s, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if s.ndim != 1 or c.ndim != 1:
            raise DimensionError("s and c must be vectors")
        if A.cols != s.size:
            raise DimensionError(f"A has {A.cols} columns but |s| = {s.size}")
        if A.rows != c.size:
            raise DimensionError(f"A has {A.rows} rows but |c| = {c.size}")
        if np.any(s < 0):
            raise DomainError("s must be nonnegative")
        if np.any(c < 0):
            raise DomainError("c must be nonnegative")
        zero = c == 0.0
        if zero.any():
            # The log term of a zero-count row vanishes; its linear part is
            # assumed to live in s already (see from_counts). Dropping keeps
            # the dual prox well defined (c > 0).
            warnings.warn(
                f"dropping {int(zero.sum())} zero-count rows", UserWarning, stacklevel=2
            )
            keep = np.flatnonzero(~zero)
            coo = A.csr[keep].tocoo()
            A = SparseMatrix(keep.size, A.cols, coo.row, coo.col, coo.data)
            c = c[keep]
        if c.size == 0:
            raise DimensionError("no rows with positive counts")

        self.s = s
        self.c = c
        self.A = A
        self.penalty = penalty if penalty is not None else PenaltySpec.none()
        self.setup_groups = _normalize_groups(
            primal_setup if primal_setup is not None else ProximalSetup.entropy_capped(), s.size
        )
        self.n = s.size
        self.m = c.size
        self.c_sum = float(c.sum())
        self.c0 = float(np.sum(c * (1.0 - np.log(c))))
        self._pen_vec = self.penalty.subgradient_positive(self.n)
        self.s.setflags(write=False)
        self.c.setflags(write=False)

    @classmethod
    def from_counts(cls, A: SparseMatrix, counts, penalty=None, primal_setup=None):
        """Assemble from raw per-row data: s = sum of rows of A, c = counts.

        Zero-count rows are dropped by the constructor; their linear
        contribution is retained because s is computed before the drop.
        """
        s = A.col_sums()
        return cls(s, np.asarray(counts, dtype=np.float64), A,
                   penalty=penalty, primal_setup=primal_setup)

    @property
    def penalty_vector(self) -> np.ndarray:
        return self._pen_vec

    def with_setup(self, primal_setup) -> "PoissonProblem":
        return PoissonProblem(self.s, self.c, self.A, self.penalty, primal_setup)

    def __repr__(self) -> str:  # pragma: no cover
        return f"PoissonProblem(n={self.n}, m={self.m}, nnz={self.A.nnz})"


@dataclass
class HistoryRow:
    iteration: int
    effective_passes: float
    objective: float
    relative_subopt: float | None
    mass_residual: float
    elapsed_ms: float


@dataclass
class SolveReport:
    """Per-iteration history plus final iterates of one solve.

    ``final_x``/``final_y`` are the solver's output points (the weighted
    ergodic averages for the extragradient solvers, the incumbent best for
    the descent baselines). ``diagnostics`` carries solver-specific counters
    (clamp events, sigma extremes, block selection counts, ...).
    """

    history: list[HistoryRow] = field(default_factory=list)
    final_x: np.ndarray | None = None
    final_y: np.ndarray | None = None
    avg_defined: bool = True
    diagnostics: dict = field(default_factory=dict)

    def append(self, row: HistoryRow) -> None:
        if self.history:
            last = self.history[-1]
            if row.iteration <= last.iteration:
                raise DimensionError("history iterations must increase strictly")
            if row.effective_passes < last.effective_passes:
                raise DimensionError("effective passes must not decrease")
        self.history.append(row)

    @property
    def final_objective(self) -> float:
        return self.history[-1].objective if self.history else float("nan")


# -- evaluation --------------------------------------------------------------


def objective(problem: PoissonProblem, x: np.ndarray) -> float:
    """f(x) = s^T x - sum_i c_i log(a_i^T x) + h(x); excludes the constant c0."""
    x = np.asarray(x, dtype=np.float64)
    ax = problem.A.matvec(x)
    if np.any(ax <= 0.0):
        raise DomainError("a_i^T x <= 0: iterate left the log domain")
    return float(problem.s @ x - problem.c @ np.log(ax) + problem.penalty.value(x))


def saddle_value(problem: PoissonProblem, x: np.ndarray, y: np.ndarray) -> float:
    """Phi(x, y) = s^T x - y^T A x + sum_i c_i log y_i + h(x) + c0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0):
        raise DomainError("saddle value needs y > 0")
    return float(
        problem.s @ x
        - y @ problem.A.matvec(x)
        + problem.c @ np.log(y)
        + problem.penalty.value(x)
        + problem.c0
    )


def monotone_operator(problem: PoissonProblem, x: np.ndarray, y: np.ndarray):
    """The bilinear part's monotone operator F(x, y) = (s - A^T y, A x)."""
    gx = problem.s - problem.A.rmatvec(np.asarray(y, dtype=np.float64))
    gy = problem.A.matvec(np.asarray(x, dtype=np.float64))
    return gx, gy


def mass_identity_residual(problem: PoissonProblem, x: np.ndarray) -> float:
    """|s^T x + h(x) - sum_i c_i|; zero at any optimum."""
    x = np.asarray(x, dtype=np.float64)
    return abs(float(problem.s @ x) + problem.penalty.value(x) - problem.c_sum)


def operator_norm(A: SparseMatrix, setup_kind: str) -> float:
    """||A||_{x->2} = max over {x >= 0, ||x||_x <= 1} of ||Ax||_2.

    Entropy/l1 geometry: the exact maximum is attained at a basis vector, so
    this is the largest column 2-norm. Euclidean geometry: for nonnegative A
    the restricted norm equals the spectral norm, computed by power iteration
    on A^T A (relative tolerance 1e-6, at most 1000 iterations; hitting the
    cap emits a ConvergenceWarning).
    """
    if setup_kind in ("entropy", "l1"):
        norms = A.column_norms()
        return float(norms.max()) if norms.size else 0.0
    if setup_kind not in ("euclidean", "l2"):
        raise ValueError(f"unknown setup kind: {setup_kind!r}")
    v = np.full(A.cols, 1.0 / np.sqrt(A.cols))
    v += np.arange(A.cols) * (1e-4 / max(A.cols, 1))  # break symmetry, deterministic
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(_POWER_ITER_CAP):
        w = A.rmatvec(A.matvec(v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        new_sigma = np.sqrt(norm_w)
        if abs(new_sigma - sigma) <= _POWER_ITER_RTOL * max(new_sigma, 1e-300):
            return float(new_sigma)
        sigma = new_sigma
    warnings.warn("power iteration hit its iteration cap", ConvergenceWarning, stacklevel=2)
    return float(sigma)


# -- problem text format ------------------------------------------------------
#
# header line: "n m"; an s line (n reals); a c line (m reals); then one line
# "i j value" per nonzero with 0-based row i and column j.


def write_problem(path: str, problem: PoissonProblem) -> None:
    coo = problem.A.csr.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{problem.n} {problem.m}\n")
        fh.write(" ".join(repr(v) for v in problem.s) + "\n")
        fh.write(" ".join(repr(v) for v in problem.c) + "\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v!r}\n")


def read_problem(path: str, penalty: PenaltySpec | None = None,
                 primal_setup=None) -> PoissonProblem:
    """Parse the text format; penalty and setup come from the caller, not the file."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 3:
        raise DimensionError("problem file needs a header, an s line and a c line")
    try:
        n, m = (int(tok) for tok in lines[0].split())
        s = np.array([float(t) for t in lines[1].split()], dtype=np.float64)
        c = np.array([float(t) for t in lines[2].split()], dtype=np.float64)
        rows, cols, vals = [], [], []
        for ln in lines[3:]:
            i_tok, j_tok, v_tok = ln.split()
            rows.append(int(i_tok))
            cols.append(int(j_tok))
            vals.append(float(v_tok))
    except ValueError as exc:
        raise DimensionError(f"malformed problem file: {exc}") from exc
    if s.size != n or c.size != m:
        raise DimensionError("s/c length disagrees with header")
    A = SparseMatrix(m, n, rows, cols, vals)
    return PoissonProblem(s, c, A, penalty=penalty, primal_setup=primal_setup)
