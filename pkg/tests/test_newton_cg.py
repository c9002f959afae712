import math

import mpmath
import numpy as np
import pytest

from ncgopt import (
    FOSP,
    MAX_ITERATIONS,
    MEO,
    HolderClass,
    LineSearchError,
    NcgParams,
    ProblemOracle,
    c_meo,
    c_nc,
    c_sol,
    capped_cg,
    complexity_bounds,
    gamma_nu,
    gen_quadratic,
    line_search_meo,
    line_search_nc,
    line_search_sol,
    newton_cg_solve,
    scale_meo_direction,
    scale_nc_direction,
    taylor_error_modulus,
)
from ncgopt.oracle import CountingOracle
from ncgopt.sampling import generator


def make_norm_squared(n):
    return ProblemOracle(
        dim=n,
        eval_f=lambda x: 0.5 * float(x @ x),
        eval_grad=lambda x: x.copy(),
        eval_hvp=lambda x, v: v.copy(),
        name="half-norm-squared",
    )


def make_saddle():
    return ProblemOracle(
        2,
        lambda x: 0.5 * (x[0] ** 2 - x[1] ** 2),
        lambda x: np.array([x[0], -x[1]]),
        lambda x, v: np.array([v[0], -v[1]]),
        "saddle",
    )


# ---------------------------------------------------------------------------
# gamma_nu and related constants.


def test_gamma_nu_lipschitz_case():
    # Exponent on eps_g vanishes at nu = 1.
    for eps in (1e-6, 1e-2, 0.9):
        assert gamma_nu(eps, HolderClass(1.0, 2.0)) == 8.0


def test_gamma_nu_nu_zero():
    assert abs(gamma_nu(0.01, HolderClass(0.0, 1.0)) - 400.0) <= 1e-12 * 400.0


def test_gamma_nu_fractional_high_precision():
    with mpmath.workdps(50):
        expected = 4 * mpmath.mpf(3) ** (mpmath.mpf(4) / 3) * mpmath.mpf("1e-4") ** (
            -mpmath.mpf(1) / 3
        )
        got = gamma_nu(1e-4, HolderClass(0.5, 3.0))
        assert abs(got - float(expected)) <= 1e-12 * float(expected)


def test_taylor_error_modulus():
    holder = HolderClass(1.0, 7.0)
    assert taylor_error_modulus(0.3, holder) == 7.0  # 0^0 convention
    holder = HolderClass(0.5, 2.0)
    with mpmath.workdps(50):
        nu, h, delta = mpmath.mpf("0.5"), mpmath.mpf(2), mpmath.mpf("0.01")
        expected = ((1 - nu) / (2 * delta * (1 + nu))) ** ((1 - nu) / (1 + nu)) * h ** (
            2 / (1 + nu)
        )
        got = taylor_error_modulus(0.01, holder)
        assert abs(got - float(expected)) <= 1e-12 * float(expected)


def test_complexity_bounds_trivial_and_cross_checked():
    params = NcgParams(eps_g=1e-4, holder=HolderClass(1.0, 1.0))
    k1, k2 = complexity_bounds(params, f0=5.0, f_low=5.0)
    assert k1 == 1  # ceil(0) + 1
    assert k2 is None

    params = NcgParams(eps_g=1e-4, holder=HolderClass(1.0, 1.0), eta=0.01, theta=0.5, zeta=0.5)
    k1, _ = complexity_bounds(params, f0=1.0, f_low=0.0)
    with mpmath.workdps(60):
        eta, zeta, theta = mpmath.mpf("0.01"), mpmath.mpf("0.5"), mpmath.mpf("0.5")
        csol = eta * min(
            (2 / (4 + zeta + mpmath.sqrt((4 + zeta) ** 2 + 1))) ** 2,
            (2 * (1 - eta) * theta / 3) ** 2 / 6,
        )
        cnc = eta * theta**2 / 4
        gamma = mpmath.mpf(4)
        expected = int(mpmath.ceil(1 / min(csol, cnc) * mpmath.sqrt(gamma) * mpmath.mpf("1e-4") ** mpmath.mpf("-1.5"))) + 1
        assert k1 == expected


def test_complexity_bounds_k2_undefined_for_nu_zero():
    params = NcgParams(eps_g=1e-2, eps_H=1e-2, holder=HolderClass(0.0, 1.0))
    _, k2 = complexity_bounds(params, f0=1.0, f_low=0.0)
    assert k2 is None

    params = NcgParams(eps_g=1e-2, eps_H=1e-2, holder=HolderClass(0.5, 1.0))
    _, k2 = complexity_bounds(params, f0=1.0, f_low=0.0)
    assert k2 is not None and k2 >= 1


# ---------------------------------------------------------------------------
# Direction scaling.


def test_scale_nc_direction_examples():
    H = -2.0 * np.eye(3)
    hvp = lambda v: H @ v
    d = np.array([1.0, 0.0, 0.0])
    g = np.array([1.0, 0.0, 0.0])
    out = scale_nc_direction(d, hvp, g, sigma=1.0)
    np.testing.assert_allclose(out, -2.0 * d, atol=1e-14)
    out = scale_nc_direction(d, hvp, -g, sigma=4.0)
    np.testing.assert_allclose(out, 2.0 * d, atol=1e-14)
    with pytest.raises(ValueError):
        scale_nc_direction(np.zeros(3), hvp, g, 1.0)


def test_scale_nc_direction_rayleigh_property():
    # Scaled directions satisfy d'Hd / ||d||^2 = -min{1, sigma} ||d||.
    rng = generator(5, stream=31)
    for trial in range(40):
        n = int(rng.integers(2, 12))
        lam = rng.uniform(-4.0, 4.0, size=n)
        lam[0] = rng.uniform(-4.0, -0.5)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        H = (q * lam) @ q.T
        g = rng.standard_normal(n)
        eps = 0.3
        out = capped_cg(lambda v: H @ v, g, eps, 0.5)
        if out.d_type != "NC":
            continue
        sigma = float(rng.uniform(0.2, 5.0))
        d = scale_nc_direction(out.d, lambda v: H @ v, g, sigma)
        dn = np.linalg.norm(d)
        rayleigh = float(d @ (H @ d)) / dn**2
        assert abs(rayleigh + min(1.0, sigma) * dn) <= 1e-10 * max(1.0, dn)
        assert float(d @ g) <= 1e-12 * max(1.0, np.linalg.norm(g) * dn)


def test_scale_meo_direction():
    H = np.diag([1.0, -2.0])
    hvp = lambda v: H @ v
    v = np.array([0.0, 1.0])
    out = scale_meo_direction(v, hvp, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, np.array([0.0, -2.0]), atol=1e-14)
    # sgn(0) = +1 convention.
    out = scale_meo_direction(v, hvp, np.array([1.0, 0.0]))
    np.testing.assert_allclose(out, np.array([0.0, -2.0]), atol=1e-14)
    rng = generator(6, stream=32)
    for _ in range(25):
        n = int(rng.integers(2, 10))
        H = rng.standard_normal((n, n))
        H = (H + H.T) / 2
        g = rng.standard_normal(n)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        d = scale_meo_direction(v, lambda u: H @ u, g)
        assert float(d @ g) <= 1e-12


# ---------------------------------------------------------------------------
# Line searches.


def test_line_search_sol_quadratic_full_or_first():
    oracle = CountingOracle(make_norm_squared(4))
    x = np.array([1.0, 0.0, 0.0, 0.0])
    holder = HolderClass(1.0, 1e-8)
    eps_damp = math.sqrt(gamma_nu(1e-4, holder) * 1e-4)
    cg = capped_cg(lambda v: oracle.eval_hvp(x, v), oracle.eval_grad(x), eps_damp, 0.5)
    assert cg.d_type == "SOL"
    out = line_search_sol(oracle, x, cg.d, eps_damp, 0.5, 0.01, 1e-4, 60, f_x=0.5)
    assert out.alpha == 1.0
    assert out.f_new < 0.5


def test_line_search_sol_smallest_j_is_zero_on_descent():
    oracle = CountingOracle(make_norm_squared(3))
    x = np.array([2.0, 0.0, 0.0])
    d = np.array([-1.0, 0.0, 0.0])
    out = line_search_sol(oracle, x, d, 0.5, 0.5, 0.01, eps_g=1e-4, j_max=60, f_x=2.0)
    assert out.j == 0 and out.alpha == 1.0


def exhaustive_smallest_j(f, x, d, rhs, theta, j_max):
    """Independent oracle: scan every j and return the first acceptance."""
    for j in range(j_max + 1):
        if f(x + theta**j * d) <= rhs(j):
            return j
    return None


def test_line_search_sol_minimality_against_scan():
    # Steep curvature forces backtracking; compare against the exhaustive scan.
    curv = 400.0
    oracle = CountingOracle(
        ProblemOracle(
            1,
            lambda x: 0.5 * curv * float(x @ x),
            lambda x: curv * x,
            lambda x, v: curv * v,
        )
    )
    x = np.array([1.0])
    d = np.array([-2.2])  # overshooting direction: the full step increases f
    sigma_eps, theta, eta = 2.0, 0.5, 0.5
    f_x = oracle.eval_f(x)
    out = line_search_sol(oracle, x, d, sigma_eps, theta, eta, eps_g=1e-8, j_max=60, f_x=f_x)
    dn2 = float(d @ d)
    expected = exhaustive_smallest_j(
        lambda y: 0.5 * curv * float(y @ y),
        x,
        d,
        lambda j: f_x - eta * sigma_eps * theta ** (2 * j) * dn2,
        theta,
        60,
    )
    assert out.j == expected and out.j > 0
    # j - 1 must fail the Armijo inequality.
    jm = out.j - 1
    assert 0.5 * curv * float((x + theta**jm * d)[0] ** 2) > f_x - eta * sigma_eps * theta ** (2 * jm) * dn2


@pytest.mark.parametrize("search,extra", [(line_search_nc, (2.0,)), (line_search_meo, ())])
def test_cubic_line_searches_minimality(search, extra):
    curv = 60.0
    oracle = CountingOracle(
        ProblemOracle(
            1,
            lambda x: 0.5 * curv * float(x @ x),
            lambda x: curv * x,
            lambda x, v: curv * v,
        )
    )
    x = np.array([1.0])
    d = np.array([-1.8])
    theta, eta = 0.5, 0.9
    f_x = oracle.eval_f(x)
    out = search(oracle, x, d, *extra, theta, eta, 60, f_x)
    dn3 = abs(d[0]) ** 3
    if search is line_search_nc:
        rhs = lambda j: f_x - eta * min(1.0, extra[0]) * theta ** (2 * j) * dn3 / 4.0
    else:
        rhs = lambda j: f_x - eta * theta ** (2 * j) * dn3 / 2.0
    expected = exhaustive_smallest_j(
        lambda y: 0.5 * curv * float(y @ y), x, d, rhs, theta, 60
    )
    assert out.j == expected


def test_line_search_failure_raises():
    # Ascent direction on a monotone function never satisfies the test.
    oracle = CountingOracle(
        ProblemOracle(1, lambda x: float(x[0]), lambda x: np.ones(1), lambda x, v: np.zeros(1))
    )
    with pytest.raises(LineSearchError):
        line_search_nc(oracle, np.zeros(1), np.ones(1), 1.0, 0.5, 0.5, 20, f_x=0.0)


# ---------------------------------------------------------------------------
# Driver.


def test_solver_quadratic_reaches_fosp():
    oracle = make_norm_squared(5)
    x0 = np.zeros(5)
    x0[0] = 10.0
    params = NcgParams(eps_g=1e-4, holder=HolderClass(1.0, 1.0))
    res = newton_cg_solve(oracle, x0, params)
    assert res.status == FOSP
    assert np.linalg.norm(res.x_final) <= 1e-4
    fs = [r.f_before for r in res.trace] + [res.f_final]
    assert all(fs[i + 1] < fs[i] for i in range(len(fs) - 1))
    # Independent re-evaluation of the gradient at the final point.
    assert np.linalg.norm(oracle.eval_grad(res.x_final)) <= 1e-4


def test_solver_immediate_exit():
    oracle = make_norm_squared(4)
    params = NcgParams(eps_g=1e-2, holder=HolderClass(1.0, 1.0))
    res = newton_cg_solve(oracle, np.full(4, 1e-6), params)
    assert res.status == FOSP
    assert res.counters.capped_cg_calls == 0
    assert res.counters.meo_calls == 0
    assert len(res.trace) == 0


def test_solver_saddle_engages_meo():
    # Gradient starts in the positive-curvature eigenspace, so the solver
    # reaches the small-gradient gate and the eigenvalue oracle must step.
    oracle = make_saddle()
    params = NcgParams(
        eps_g=1e-4, eps_H=1e-2, holder=HolderClass(1.0, 1.0), max_outer=30, seed=0
    )
    res = newton_cg_solve(oracle, np.array([1.0, 0.0]), params)
    assert res.status == MAX_ITERATIONS  # curvature -1 can never be certified
    meo_steps = [r for r in res.trace if r.step_type == MEO]
    assert meo_steps
    for rec in meo_steps:
        assert rec.f_before - rec.f_after >= 0.01 / 2.0 * rec.alpha**2 * rec.d_norm**3 - 1e-12
    eigs = np.linalg.eigvalsh(np.diag([1.0, -1.0]))
    assert eigs[0] < -params.eps_H  # dense oracle: certificate is impossible


def test_solver_sosp_certified_on_psd_quadratic():
    oracle = gen_quadratic(12, np.linspace(1.0, 5.0, 12), seed=3)
    params = NcgParams(
        eps_g=1e-4, eps_H=1e-2, holder=HolderClass(1.0, 1e-8), seed=11, f_low=0.0
    )
    res = newton_cg_solve(oracle, np.full(12, 2.0), params)
    assert res.status == "SOSP_certified"
    lam_min = np.min(np.linalg.eigvalsh((oracle.meta.basis.T * oracle.meta.eigenvalues) @ oracle.meta.basis))
    assert lam_min >= -params.eps_H


def test_trace_step_inequalities_replay():
    # Every accepted step satisfies its own decrease inequality, replayed
    # from the recorded scalars.
    oracle = gen_quadratic(8, np.linspace(0.5, 4.0, 8), seed=5)
    holder = HolderClass(1.0, 1e-8)
    params = NcgParams(eps_g=1e-6, holder=holder)
    res = newton_cg_solve(oracle, np.full(8, 3.0), params)
    assert res.status == FOSP
    eps_damp = math.sqrt(gamma_nu(params.eps_g, holder) * params.eps_g)
    for rec in res.trace:
        if rec.step_type == "SOL" and rec.accepted_by == "armijo":
            assert rec.f_after <= rec.f_before - params.eta * eps_damp * rec.alpha**2 * rec.d_norm**2 + 1e-12
        elif rec.step_type == "NC":
            assert rec.f_after <= rec.f_before - params.eta * min(1.0, rec.sigma) * rec.alpha**2 * rec.d_norm**3 / 4.0 + 1e-12


def test_bounds_used_for_default_budget():
    oracle = make_norm_squared(3)
    params = NcgParams(eps_g=1e-2, holder=HolderClass(1.0, 1.0), f_low=0.0)
    res = newton_cg_solve(oracle, np.array([4.0, 0.0, 0.0]), params)
    assert res.status == FOSP


def test_c_constants_positive():
    assert c_sol(0.01, 0.5, 0.5) > 0
    assert c_nc(0.01, 0.5) > 0
    assert c_meo(0.01, 0.5, HolderClass(1.0, 1.0)) > 0
    with pytest.raises(ValueError):
        c_meo(0.01, 0.5, HolderClass(0.0, 1.0))


def test_outer_iterations_within_k1_on_valid_holder_data():
    # Quadratics have constant Hessians, so (nu, h_nu) = (1, 1e-8) is valid
    # smoothness data and the worst-case outer bound must hold.
    holder = HolderClass(1.0, 1e-8)
    for seed in range(3):
        oracle = gen_quadratic(20, np.linspace(0.5, 6.0, 20), seed=seed)
        x0 = np.full(20, 2.0)
        params = NcgParams(eps_g=1e-4, holder=holder, seed=seed)
        res = newton_cg_solve(oracle, x0, params)
        assert res.status == FOSP
        k1, _ = complexity_bounds(params, f0=oracle.eval_f(x0), f_low=0.0)
        assert len(res.trace) <= k1

        params_h = NcgParams(eps_g=1e-4, eps_H=1e-2, holder=holder, seed=seed)
        res_h = newton_cg_solve(oracle, x0, params_h)
        assert res_h.status == "SOSP_certified"
        k1, k2 = complexity_bounds(params_h, f0=oracle.eval_f(x0), f_low=0.0)
        assert len(res_h.trace) <= k1 + 2 * k2 - 1


def test_nc_steps_on_indefinite_quadratic():
    # Unbounded-below instance: the driver must ride negative curvature with
    # monotone f until the budget, and every NC step satisfies its decrease.
    lam = np.concatenate([[-2.0, -0.5], np.linspace(1.0, 4.0, 8)])
    oracle = gen_quadratic(10, lam, seed=6)
    params = NcgParams(
        eps_g=1e-4, holder=HolderClass(1.0, 1.0), max_outer=15, seed=2
    )
    res = newton_cg_solve(oracle, np.full(10, 1.0), params)
    assert res.status == MAX_ITERATIONS
    nc_steps = [r for r in res.trace if r.step_type == "NC"]
    assert nc_steps
    for rec in res.trace:
        assert rec.f_after <= rec.f_before
        if rec.step_type == "NC":
            assert rec.f_after <= rec.f_before - params.eta * min(1.0, rec.sigma) * rec.alpha**2 * rec.d_norm**3 / 4.0 + 1e-10


def test_backtracking_cap_yields_line_search_failure_status():
    lying = ProblemOracle(
        3,
        lambda x: 0.0,
        lambda x: np.ones(3),
        lambda x, v: v.copy(),
        "inconsistent",
    )
    params = NcgParams(eps_g=1e-4, holder=HolderClass(1.0, 1.0), j_max=10, max_outer=3)
    res = newton_cg_solve(lying, np.zeros(3), params)
    assert res.status == "LineSearchFailure"
    assert res.status_detail is not None
