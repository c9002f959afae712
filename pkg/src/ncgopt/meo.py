"""Randomized Lanczos minimum-eigenvalue oracle.

Runs Lanczos from a random unit start for a fixed budget of iterations.
Either a unit direction v with v^T H v <= -eps/2 turns up (outcome
``direction``) or the run certifies lambda_min(H) >= -eps with probability
at least 1 - delta (outcome ``certificate``).

Directions are never returned on trust: when the smallest Ritz value dips
below -eps/2, the candidate Ritz vector is checked against an actual
Hessian-vector product before it is returned, so a positive semidefinite
operator can never produce a direction, regardless of rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sampling
from .tridiag import smallest_eigenpair, smallest_eigenvalue

Array = np.ndarray

CERTIFICATE = "certificate"
DIRECTION = "direction"


@dataclass
class MeoOutcome:
    """Either a unit negative-curvature direction or a probabilistic certificate.

    ``curvature`` is the verified v^T H v when kind == direction; ``ritz``
    is the smallest Ritz value seen.  ``breakdown`` marks runs that exhausted
    an exactly invariant Krylov subspace before the budget.
    """

    kind: str
    v: Array | None
    iterations: int
    budget: int
    ritz: float
    curvature: float | None = None
    breakdown: bool = False


def lanczos_budget(n: int, eps: float, delta: float, norm_h: float) -> int:
    """Iteration budget min{n, 1 + ceil(ln(2.75 n / delta^2) / 2 * sqrt(|H|/eps))}."""
    if n < 1:
        raise ValueError("n must be positive")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    raw = 1 + math.ceil(0.5 * math.log(2.75 * n / delta**2) * math.sqrt(norm_h / eps))
    return min(n, raw)


def minimum_eigenvalue_oracle(
    hvp: Callable[[Array], Array],
    n: int,
    eps: float,
    delta: float,
    norm_h: float,
    seed: int = 0,
    stream: int = sampling.STREAM_MEO_START,
) -> MeoOutcome:
    """Randomized Lanczos with full reorthogonalization.

    ``norm_h`` is a caller-supplied upper estimate of ||H|| used only for the
    budget.  Deterministic given (seed, stream).
    """
    budget = lanczos_budget(n, eps, delta, norm_h)
    breakdown_tol = 1e-13 * max(1.0, norm_h)

    q = sampling.unit_vector(seed, n, stream)
    basis = np.empty((n, budget))
    basis[:, 0] = q
    alphas: list[float] = []
    betas: list[float] = []
    best_ritz = math.inf

    for k in range(1, budget + 1):
        w = np.asarray(hvp(q), dtype=float)
        a = float(q @ w)
        alphas.append(a)
        w = w - a * q
        if k > 1:
            w = w - betas[-1] * basis[:, k - 2]
        # Full reorthogonalization, two passes; eliminates spurious Ritz
        # values that would corrupt the -eps/2 test.
        for _ in range(2):
            w = w - basis[:, :k] @ (basis[:, :k].T @ w)

        theta = smallest_eigenvalue(np.array(alphas), np.array(betas))
        best_ritz = min(best_ritz, theta)
        if theta <= -eps / 2.0:
            theta, weights = smallest_eigenpair(np.array(alphas), np.array(betas))
            v = basis[:, :k] @ weights
            v = v / float(np.linalg.norm(v))
            curvature = float(v @ np.asarray(hvp(v), dtype=float))
            if curvature <= -eps / 2.0:
                return MeoOutcome(DIRECTION, v, k, budget, theta, curvature)

        beta = float(np.linalg.norm(w))
        if beta <= breakdown_tol:
            # Exactly invariant subspace: its Ritz values are exact, and the
            # direction test above already ran on them.
            return MeoOutcome(
                CERTIFICATE, None, k, budget, best_ritz, breakdown=True
            )
        if k < budget:
            betas.append(beta)
            q = w / beta
            basis[:, k] = q

    return MeoOutcome(CERTIFICATE, None, budget, budget, best_ritz)


def estimate_operator_norm(
    hvp: Callable[[Array], Array],
    n: int,
    seed: int = 0,
    stream: int = sampling.STREAM_NORM_EST,
    iters: int = 50,
) -> float:
    """Upper-style estimate of ||H|| by power iteration on H^2, inflated by 1.1.

    Deterministic given (seed, stream); returns the floor 1e-12 for a zero
    operator (or a start vector annihilated by H).
    """
    floor = 1e-12
    x = sampling.unit_vector(seed, n, stream)
    rayleigh = 0.0
    for _ in range(iters):
        hx = np.asarray(hvp(x), dtype=float)
        z = np.asarray(hvp(hx), dtype=float)
        nz = float(np.linalg.norm(z))
        rayleigh = float(x @ z)  # equals ||H x||^2 for unit x
        if nz <= floor or rayleigh <= floor**2:
            return floor
        x = z / nz
    return 1.1 * math.sqrt(rayleigh)
