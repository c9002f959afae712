"""Matrix-free problem abstraction and finite-difference derivative checks.

A :class:`ProblemOracle` is the only interface between solvers and problems:
callbacks for f(x), grad f(x), and Hessian-vector products, plus dimension
metadata.  Derivatives are analytic; the finite-difference checks here are
test-side verification, never used inside solvers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class ProblemOracle:
    """Callbacks for one problem instance.

    Immutable after construction and safe to share across concurrent solver
    runs; each run keeps its own workspace vectors.  ``meta`` optionally
    carries the raw instance data (generator-specific) for tests and
    serialization.
    """

    dim: int
    eval_f: Callable[[Array], float]
    eval_grad: Callable[[Array], Array]
    eval_hvp: Callable[[Array, Array], Array]
    name: str = "problem"
    meta: object | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")


@dataclass(frozen=True)
class HolderClass:
    """Hessian smoothness class: exponent nu in [0, 1] and modulus h_nu > 0.

    nu = 1 is Lipschitz continuity of the Hessian; nu = 0 only bounds its
    variation.
    """

    nu: float
    h_nu: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")
        if not self.h_nu > 0.0:
            raise ValueError("h_nu must be positive")


class DerivativeCheckError(RuntimeError):
    """A finite-difference probe hit a non-finite function value."""

    def __init__(self, message: str, coordinate: int):
        super().__init__(f"{message} (coordinate {coordinate})")
        self.coordinate = coordinate


class CountingOracle:
    """Mutable per-solve wrapper that counts f / grad / hvp evaluations.

    Exposes the same ``eval_*`` surface as :class:`ProblemOracle` so solver
    code is agnostic to whether it counts.
    """

    def __init__(self, oracle: ProblemOracle):
        self._oracle = oracle
        self.dim = oracle.dim
        self.name = oracle.name
        self.f_evals = 0
        self.grad_evals = 0
        self.hvp_evals = 0

    def eval_f(self, x: Array) -> float:
        self.f_evals += 1
        return float(self._oracle.eval_f(x))

    def eval_grad(self, x: Array) -> Array:
        self.grad_evals += 1
        return self._oracle.eval_grad(x)

    def eval_hvp(self, x: Array, v: Array) -> Array:
        self.hvp_evals += 1
        return self._oracle.eval_hvp(x, v)


def _fd_step(x: Array, h: float | None) -> float:
    # Central differences stay well conditioned with a step that scales
    # with the point.
    if h is not None:
        return float(h)
    return 1e-6 * (1.0 + float(np.linalg.norm(x)))


def check_gradient_fd(oracle: ProblemOracle, x: Array, h: float | None = None) -> float:
    """Max relative error between central differences of f and eval_grad.

    The denominator 1 + |grad_i| avoids blowups near zero components.
    """
    x = np.asarray(x, dtype=float)
    step = _fd_step(x, h)
    if step <= 0.0:
        raise ValueError("finite-difference step must be positive")
    grad = np.asarray(oracle.eval_grad(x), dtype=float)
    worst = 0.0
    for i in range(oracle.dim):
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        fp = oracle.eval_f(xp)
        fm = oracle.eval_f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DerivativeCheckError("non-finite f in gradient check", i)
        fd = (fp - fm) / (2.0 * step)
        err = abs(fd - grad[i]) / (1.0 + abs(grad[i]))
        worst = max(worst, err)
    return worst


def check_hvp_fd(
    oracle: ProblemOracle, x: Array, v: Array, h: float | None = None
) -> float:
    """Max relative error between a gradient central difference and eval_hvp."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) == 0.0:
        raise ValueError("probe direction v must be nonzero")
    step = _fd_step(x, h)
    if step <= 0.0:
        raise ValueError("finite-difference step must be positive")
    hv = np.asarray(oracle.eval_hvp(x, v), dtype=float)
    gp = np.asarray(oracle.eval_grad(x + step * v), dtype=float)
    gm = np.asarray(oracle.eval_grad(x - step * v), dtype=float)
    fd = (gp - gm) / (2.0 * step)
    bad = ~(np.isfinite(fd) & np.isfinite(hv))
    if bad.any():
        raise DerivativeCheckError(
            "non-finite value in hvp check", int(np.argmax(bad))
        )
    return float(np.max(np.abs(fd - hv) / (1.0 + np.abs(hv))))
