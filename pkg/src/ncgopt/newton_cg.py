"""Newton-CG driver for nonconvex minimization with known Hessian smoothness.

The driver alternates capped-CG solves of the damped system
(H + 2 (gamma_nu eps_g)^(1/2) I) d = -g with backtracking line searches,
switching to a randomized minimum-eigenvalue oracle once the gradient is
small when a second-order tolerance eps_H is requested.  The damping scale
gamma_nu(eps_g) is computed from the smoothness class (nu, h_nu).

Also hosts the direction-scaling rules, the three line searches, and the
worst-case iteration-bound calculators used by tests and budget defaults.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sampling
from .capped_cg import NC, capped_cg
from .meo import CERTIFICATE, estimate_operator_norm, minimum_eigenvalue_oracle
from .oracle import CountingOracle, HolderClass, ProblemOracle

Array = np.ndarray

FOSP = "FOSP"
SOSP_CERTIFIED = "SOSP_certified"
MAX_ITERATIONS = "MaxIterations"
LINE_SEARCH_FAILURE = "LineSearchFailure"

MEO = "MEO"

FULL_STEP = "full_step"
ARMIJO = "armijo"

_FALLBACK_MAX_OUTER = 100_000


class LineSearchError(RuntimeError):
    """Backtracking exhausted its cap; signals numerical breakdown."""

    def __init__(self, message: str, j: int):
        super().__init__(f"{message} (j = {j})")
        self.j = j


@dataclass(frozen=True)
class NcgParams:
    """Inputs of the known-smoothness driver.

    ``f_low`` is an optional lower bound on f used only to size the default
    outer-iteration budget from the worst-case bounds; without it the budget
    falls back to a large cap.
    """

    eps_g: float
    holder: HolderClass
    eps_H: float | None = None
    zeta: float = 0.5
    theta: float = 0.5
    eta: float = 0.01
    delta: float = 0.01
    j_max: int = 60
    max_outer: int | None = None
    f_low: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_g < 1.0:
            raise ValueError("eps_g must lie in (0, 1)")
        if self.eps_H is not None and not 0.0 < self.eps_H < 1.0:
            raise ValueError("eps_H must lie in (0, 1)")
        for name in ("zeta", "theta", "eta", "delta"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.j_max < 1:
            raise ValueError("j_max must be at least 1")
        if self.max_outer is not None and self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass
class IterationRecord:
    """One accepted step: type, step size, and the scalars tests replay."""

    step_type: str  # SOL | NC | MEO (drivers); baselines may use their own
    alpha: float
    j: int
    f_before: float
    f_after: float
    grad_norm: float  # gradient norm at the point the step left
    d_norm: float
    sigma: float | None
    inner_iterations: int
    accepted_by: str | None = None  # full_step | armijo for SOL steps


@dataclass
class Counters:
    f_evals: int = 0
    grad_evals: int = 0
    hvp_evals: int = 0
    capped_cg_calls: int = 0
    meo_calls: int = 0
    subproblems: int = 0


@dataclass
class SolveResult:
    x_final: Array
    f_final: float
    grad_norm_final: float
    status: str
    status_detail: str | None
    trace: list[IterationRecord]
    counters: Counters


@dataclass
class LineSearchOutcome:
    alpha: float
    j: int
    f_new: float
    accepted_by: str
    grad_new: Array | None = None


# ---------------------------------------------------------------------------
# Smoothness-derived constants and worst-case bounds.


def gamma_nu(eps_g: float, holder: HolderClass) -> float:
    """Damping scale 4 h_nu^(2/(1+nu)) eps_g^(-(1-nu)/(1+nu)).

    Plays the role of a Hessian Lipschitz constant tuned to the target
    accuracy; equals 4 h_nu when the Hessian is Lipschitz (nu = 1).
    """
    nu, h = holder.nu, holder.h_nu
    return 4.0 * h ** (2.0 / (1.0 + nu)) * eps_g ** (-(1.0 - nu) / (1.0 + nu))


def taylor_error_modulus(delta: float, holder: HolderClass) -> float:
    """Modulus L(delta) of the delta-relaxed quadratic model error.

    The gradient of f stays within L(delta)/2 ||step||^2 + delta of its
    linearization.  The nu = 1 case uses the 0^0 = 1 convention.
    """
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    nu, h = holder.nu, holder.h_nu
    return ((1.0 - nu) / (2.0 * delta * (1.0 + nu))) ** (
        (1.0 - nu) / (1.0 + nu)
    ) * h ** (2.0 / (1.0 + nu))


def c_sol(eta: float, zeta: float, theta: float) -> float:
    """Per-step decrease constant for accepted SOL steps."""
    a = (2.0 / (4.0 + zeta + math.sqrt((4.0 + zeta) ** 2 + 1.0))) ** 2
    b = (2.0 * (1.0 - eta) * theta / 3.0) ** 2 / 6.0
    return eta * min(a, b)


def c_nc(eta: float, theta: float) -> float:
    """Per-step decrease constant for negative-curvature steps."""
    return eta * theta**2 / 4.0


def c_meo(eta: float, theta: float, holder: HolderClass) -> float:
    """Per-step decrease constant for minimum-eigenvalue-oracle steps.

    Defined for nu in (0, 1] only.
    """
    nu, h = holder.nu, holder.h_nu
    if not nu > 0.0:
        raise ValueError("c_meo requires nu > 0")
    base = min(1.0, theta * ((1.0 - eta) / h) ** (1.0 / nu))
    return (eta / 2.0) * base**2 * 0.5 ** ((2.0 + nu) / nu)


def complexity_bounds(
    params: NcgParams, f0: float, f_low: float
) -> tuple[int, int | None]:
    """Worst-case outer-iteration bounds (K1, K2).

    K2 is None when eps_H is not requested or when nu = 0, where the
    second-order bound is undefined.
    """
    if f0 < f_low:
        raise ValueError("f0 must be at least f_low")
    gamma = gamma_nu(params.eps_g, params.holder)
    c1 = min(c_sol(params.eta, params.zeta, params.theta), c_nc(params.eta, params.theta))
    k1 = math.ceil((f0 - f_low) / c1 * math.sqrt(gamma) * params.eps_g ** (-1.5)) + 1
    k2: int | None = None
    if params.eps_H is not None and params.holder.nu > 0.0:
        nu = params.holder.nu
        cm = c_meo(params.eta, params.theta, params.holder)
        k2 = math.ceil((f0 - f_low) / cm * params.eps_H ** (-(2.0 + nu) / nu)) + 1
    return k1, k2


# ---------------------------------------------------------------------------
# Direction scalings.


def scale_nc_direction(
    d: Array, hvp: Callable[[Array], Array], g: Array, sigma: float
) -> Array:
    """Rescale a raw negative-curvature direction for the line search.

    Returns -sgn(d.g) max{1, 1/sigma} (|d.Hd| / ||d||^3) d, which makes the
    Rayleigh quotient equal -min{1, sigma} ||d|| and keeps d.g <= 0.
    """
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        raise ValueError("negative-curvature direction must be nonzero")
    quad = float(d @ np.asarray(hvp(d), dtype=float))
    sign = 1.0 if float(d @ g) >= 0.0 else -1.0
    coef = max(1.0, 1.0 / sigma) * abs(quad) / dn**3
    return (-sign * coef) * d


def scale_meo_direction(v: Array, hvp: Callable[[Array], Array], g: Array) -> Array:
    """Rescale a unit eigenvalue-oracle direction: -sgn(v.g) |v.Hv| v."""
    curv = float(v @ np.asarray(hvp(v), dtype=float))
    sign = 1.0 if float(v @ g) >= 0.0 else -1.0
    return (-sign * abs(curv)) * v


# ---------------------------------------------------------------------------
# Line searches.


def line_search_sol(
    oracle,
    x: Array,
    d: Array,
    sigma_eps_sqrt: float,
    theta: float,
    eta: float,
    eps_g: float,
    j_max: int,
    f_x: float | None = None,
) -> LineSearchOutcome:
    """Line search for approximate-solution directions.

    Takes the full step when it already lands at small gradient without
    increasing f; otherwise backtracks to the smallest j with
    f(x + theta^j d) <= f(x) - eta sigma_eps_sqrt theta^(2j) ||d||^2.
    """
    if f_x is None:
        f_x = oracle.eval_f(x)
    dn2 = float(d @ d)
    f_full = oracle.eval_f(x + d)
    grad_full = None
    if f_full <= f_x:
        grad_full = oracle.eval_grad(x + d)
        if float(np.linalg.norm(grad_full)) <= eps_g:
            return LineSearchOutcome(1.0, 0, f_full, FULL_STEP, grad_full)
    j = 0
    f_trial = f_full
    while True:
        a = theta**j
        if f_trial <= f_x - eta * sigma_eps_sqrt * a * a * dn2:
            return LineSearchOutcome(
                a, j, f_trial, ARMIJO, grad_full if j == 0 else None
            )
        j += 1
        if j > j_max:
            raise LineSearchError("SOL backtracking exceeded its cap", j)
        f_trial = oracle.eval_f(x + theta**j * d)


def line_search_nc(
    oracle,
    x: Array,
    d: Array,
    sigma: float,
    theta: float,
    eta: float,
    j_max: int,
    f_x: float | None = None,
) -> LineSearchOutcome:
    """Backtracking with the cubic decrease test for negative-curvature steps."""
    if f_x is None:
        f_x = oracle.eval_f(x)
    dn3 = float(np.linalg.norm(d)) ** 3
    factor = eta * min(1.0, sigma) * dn3 / 4.0
    j = 0
    while True:
        a = theta**j
        f_trial = oracle.eval_f(x + a * d)
        if f_trial <= f_x - factor * a * a:
            return LineSearchOutcome(a, j, f_trial, ARMIJO)
        j += 1
        if j > j_max:
            raise LineSearchError("NC backtracking exceeded its cap", j)


def line_search_meo(
    oracle,
    x: Array,
    d: Array,
    theta: float,
    eta: float,
    j_max: int,
    f_x: float | None = None,
) -> LineSearchOutcome:
    """Backtracking for eigenvalue-oracle steps; alpha = 1 is the j = 0 trial."""
    if f_x is None:
        f_x = oracle.eval_f(x)
    factor = eta * float(np.linalg.norm(d)) ** 3 / 2.0
    j = 0
    while True:
        a = theta**j
        f_trial = oracle.eval_f(x + a * d)
        if f_trial <= f_x - factor * a * a:
            return LineSearchOutcome(a, j, f_trial, ARMIJO)
        j += 1
        if j > j_max:
            raise LineSearchError("MEO backtracking exceeded its cap", j)


# ---------------------------------------------------------------------------
# Driver.


def _meo_attempt(
    co: CountingOracle,
    x: Array,
    fx: float,
    gx: Array,
    eps_H: float,
    delta: float,
    theta: float,
    eta: float,
    j_max: int,
    seed: int,
    call_index: int,
):
    """Shared second-order stage: certify or produce one MEO step.

    Returns ("certified", outcome) or ("step", (d, line_search, outcome)).
    """
    n = co.dim
    hvp = lambda v: co.eval_hvp(x, v)
    norm_h = estimate_operator_norm(
        hvp, n, seed=seed, stream=sampling.STREAM_NORM_EST + call_index
    )
    outcome = minimum_eigenvalue_oracle(
        hvp,
        n,
        eps_H,
        delta,
        norm_h,
        seed=seed,
        stream=sampling.STREAM_MEO_START + call_index,
    )
    if outcome.kind == CERTIFICATE:
        return "certified", outcome
    d = scale_meo_direction(outcome.v, hvp, gx)
    ls = line_search_meo(co, x, d, theta, eta, j_max, f_x=fx)
    return "step", (d, ls, outcome)


def _default_max_outer(params: NcgParams, f0: float) -> int:
    if params.max_outer is not None:
        return params.max_outer
    if params.f_low is not None and f0 >= params.f_low:
        k1, k2 = complexity_bounds(params, f0, params.f_low)
        if params.eps_H is None:
            return 10 * k1
        if k2 is not None:
            return 10 * (k1 + 2 * k2)
    return _FALLBACK_MAX_OUTER


def newton_cg_solve(
    oracle: ProblemOracle, x0: Array, params: NcgParams
) -> SolveResult:
    """Minimize via damped-Newton capped-CG steps with known (nu, h_nu).

    Terminates at FOSP (gradient norm <= eps_g) when eps_H is absent, or at
    SOSP_certified once the eigenvalue oracle certifies the Hessian; returns
    MaxIterations / LineSearchFailure with the full trace otherwise.
    """
    co = CountingOracle(oracle)
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    fx = co.eval_f(x)
    gx = co.eval_grad(x)

    gamma = gamma_nu(params.eps_g, params.holder)
    eps_damp = math.sqrt(gamma * params.eps_g)
    budget = _default_max_outer(params, fx)

    trace: list[IterationRecord] = []
    counters = Counters()
    status = MAX_ITERATIONS
    detail: str | None = None
    meo_calls = 0

    for _ in range(budget):
        gnorm = float(np.linalg.norm(gx))
        if gnorm > params.eps_g:
            hvp = lambda v: co.eval_hvp(x, v)
            cg = capped_cg(hvp, gx, eps_damp, params.zeta)
            counters.capped_cg_calls += 1
            try:
                if cg.d_type == NC:
                    d = scale_nc_direction(cg.d, hvp, gx, gamma)
                    ls = line_search_nc(
                        co, x, d, gamma, params.theta, params.eta, params.j_max, f_x=fx
                    )
                else:
                    d = cg.d
                    ls = line_search_sol(
                        co,
                        x,
                        d,
                        eps_damp,
                        params.theta,
                        params.eta,
                        params.eps_g,
                        params.j_max,
                        f_x=fx,
                    )
            except LineSearchError as err:
                status = LINE_SEARCH_FAILURE
                detail = str(err)
                break
            trace.append(
                IterationRecord(
                    step_type=cg.d_type,
                    alpha=ls.alpha,
                    j=ls.j,
                    f_before=fx,
                    f_after=ls.f_new,
                    grad_norm=gnorm,
                    d_norm=float(np.linalg.norm(d)),
                    sigma=gamma,
                    inner_iterations=cg.iterations,
                    accepted_by=ls.accepted_by,
                )
            )
            x = x + ls.alpha * d
            fx = ls.f_new
            gx = ls.grad_new if ls.grad_new is not None else co.eval_grad(x)
        elif params.eps_H is None:
            status = FOSP
            break
        else:
            kind, payload = _meo_attempt(
                co,
                x,
                fx,
                gx,
                params.eps_H,
                params.delta,
                params.theta,
                params.eta,
                params.j_max,
                params.seed,
                meo_calls,
            )
            counters.meo_calls += 1
            meo_calls += 1
            if kind == "certified":
                status = SOSP_CERTIFIED
                break
            d, ls, outcome = payload
            trace.append(
                IterationRecord(
                    step_type=MEO,
                    alpha=ls.alpha,
                    j=ls.j,
                    f_before=fx,
                    f_after=ls.f_new,
                    grad_norm=gnorm,
                    d_norm=float(np.linalg.norm(d)),
                    sigma=None,
                    inner_iterations=outcome.iterations,
                    accepted_by=None,
                )
            )
            x = x + ls.alpha * d
            fx = ls.f_new
            gx = co.eval_grad(x)

    counters.f_evals = co.f_evals
    counters.grad_evals = co.grad_evals
    counters.hvp_evals = co.hvp_evals
    counters.subproblems = counters.capped_cg_calls
    return SolveResult(
        x_final=x,
        f_final=fx,
        grad_norm_final=float(np.linalg.norm(gx)),
        status=status,
        status_detail=detail,
        trace=trace,
        counters=counters,
    )
