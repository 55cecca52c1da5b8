"""Closed-form proximal maps and Bregman machinery for the entropy and Euclidean setups.

Two geometries appear throughout the solvers:

* entropy: distance generator ``sum_j x_j log x_j`` on the positive orthant,
  optionally restricted to a capped simplex ``{x > 0, sum x <= R}`` or an
  exact-mass simplex ``{x > 0, sum x = theta}``; norm is l1.
* euclidean: ``0.5 ||y||^2`` on the nonnegative orthant; norm is l2.

Proximal maps here return the *unit-weight* solution; solvers that scale the
distance generator by a strong-convexity weight alpha pass ``alpha`` through
and the closed forms absorb it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Exponent clamp keeping exp() inside double range; clamp events are counted.
EXP_CLAMP = 700.0
# Multiplicative iterates are floored here so they stay strictly positive and
# never enter the subnormal range (which would also be a major slowdown).
POSITIVE_FLOOR = 1e-300


@dataclass(frozen=True)
class ProximalSetup:
    """Distance-generating function for one variable block.

    kind: "entropy" or "euclidean".
    alpha: strong-convexity weight multiplying the d.g.f.
    cap: for entropy, optional simplex cap R (None = unbounded orthant).
    exact_mass: for entropy, optional theta forcing sum(x) == theta exactly.
    """

    kind: str = "entropy"
    alpha: float = 1.0
    cap: float | None = None
    exact_mass: float | None = None

    def __post_init__(self):
        if self.kind not in ("entropy", "euclidean"):
            raise ValueError(f"unknown setup kind: {self.kind!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.cap is not None and self.cap <= 0:
            raise ValueError("cap must be positive")
        if self.exact_mass is not None and self.exact_mass <= 0:
            raise ValueError("exact_mass must be positive")
        if self.kind == "euclidean" and (self.cap is not None or self.exact_mass is not None):
            raise ValueError("caps apply to the entropy setup only")

    @classmethod
    def entropy_capped(cls, cap: float | None = None, alpha: float = 1.0) -> "ProximalSetup":
        return cls(kind="entropy", alpha=alpha, cap=cap)

    @classmethod
    def entropy_exact(cls, mass: float, alpha: float = 1.0) -> "ProximalSetup":
        return cls(kind="entropy", alpha=alpha, exact_mass=mass)

    @classmethod
    def euclidean(cls, alpha: float = 1.0) -> "ProximalSetup":
        return cls(kind="euclidean", alpha=alpha)

    @property
    def norm_name(self) -> str:
        return "l1" if self.kind == "entropy" else "l2"


def prox_log_barrier(eta: np.ndarray, beta: float, c: np.ndarray) -> np.ndarray:
    """Minimizer of ``0.5 y^2 + eta*y - beta * c * log(y)`` over y > 0, elementwise.

    The positive root of ``y^2 + eta*y - beta*c = 0``. Evaluated in the
    cancellation-free form for either sign of eta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    eta = np.asarray(eta, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if np.any(c <= 0):
        raise DomainError("c must be strictly positive")
    bc4 = 4.0 * beta * c
    root = np.sqrt(eta * eta + bc4)
    # eta > 0: y = 2*beta*c / (sqrt(..) + eta); else y = (sqrt(..) - eta) / 2.
    return np.where(eta > 0, bc4 / (2.0 * (root + np.abs(eta))), 0.5 * (root - eta))


def prox_entropy_capped(
    x0: np.ndarray,
    xi: np.ndarray,
    alpha: float,
    linear_penalty: np.ndarray | None = None,
    cap: float | None = None,
    exact_mass: float | None = None,
    clamp_counter: list | None = None,
) -> np.ndarray:
    """Entropy prox: multiplicative update, then conditional rescale.

    Returns ``x_j = x0_j * exp(-(xi_j + penalty_j) / alpha)``; if ``cap`` is
    set and the sum exceeds it, all components are rescaled onto the cap; if
    ``exact_mass`` is set the result is always rescaled to that total. The
    rescale *is* the exact KKT solution: the simplex constraint is either
    inactive or active with a uniform multiplier inside the exponential.

    Exponents are clamped to +-700 before exp(); clamp events are appended to
    ``clamp_counter[0]`` when a counter is supplied.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if np.any(x0 <= 0):
        raise DomainError("entropy prox needs a strictly positive base point")
    expo = np.asarray(xi, dtype=np.float64) / alpha
    if linear_penalty is not None:
        expo = expo + np.asarray(linear_penalty, dtype=np.float64) / alpha
    expo = -expo
    n_clamped = int(np.count_nonzero(np.abs(expo) > EXP_CLAMP))
    if n_clamped:
        expo = np.clip(expo, -EXP_CLAMP, EXP_CLAMP)
        if clamp_counter is not None:
            clamp_counter[0] += n_clamped
    x = x0 * np.exp(expo)
    np.maximum(x, POSITIVE_FLOOR, out=x)
    if exact_mass is not None:
        x *= exact_mass / x.sum()
        np.maximum(x, POSITIVE_FLOOR, out=x)
    elif cap is not None:
        total = x.sum()
        if total > cap:
            x *= cap / total
            np.maximum(x, POSITIVE_FLOOR, out=x)
    return x


def prox_euclidean_l1_nonneg(y0: np.ndarray, xi: np.ndarray, lam) -> np.ndarray:
    """Minimizer of ``0.5||y - y0||^2 + <xi, y> + <lam, y>`` over y >= 0.

    ``lam`` may be a scalar l1 weight or a per-coordinate vector.
    """
    return np.maximum(0.0, np.asarray(y0, dtype=np.float64) - xi - lam)


def bregman(setup: ProximalSetup, x: np.ndarray, x0: np.ndarray) -> float:
    """Unit-weight Bregman distance V(x, x0) of the setup's d.g.f.

    Entropy: the generalized KL divergence ``sum x log(x/x0) - sum x + sum x0``.
    Euclidean: ``0.5 ||x - x0||^2``. The setup's alpha is *not* applied here;
    solvers that aggregate distances scale explicitly.
    """
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x.shape != x0.shape:
        raise DomainError("shape mismatch")
    if setup.kind == "euclidean":
        d = x - x0
        return 0.5 * float(d @ d)
    if np.any(x <= 0) or np.any(x0 <= 0):
        raise DomainError("entropy Bregman distance needs strictly positive points")
    return float(np.sum(x * np.log(x / x0)) - x.sum() + x0.sum())
