import math

import mpmath
import numpy as np
import pytest

from ncgopt import (
    NC,
    SOL,
    CapParams,
    CappedCgError,
    capped_cg,
    iteration_cap,
    update_cap_params,
)
from ncgopt.sampling import generator


def matvec(H):
    return lambda v: H @ v


def random_symmetric(rng, n, lo=-5.0, hi=5.0):
    """Symmetric matrix with eigenvalues drawn uniformly from [lo, hi]."""
    lam = rng.uniform(lo, hi, size=n)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * lam) @ q.T


def check_sol_contract(H, g, eps, zeta, out, slack=1e-8):
    d = out.d
    hbar_d = H @ d + 2.0 * eps * d
    dn2 = float(d @ d)
    scale = max(1.0, abs(float(d @ hbar_d)))
    assert eps * dn2 <= float(d @ hbar_d) + slack * scale
    assert np.linalg.norm(d) <= 1.1 / eps * np.linalg.norm(g) * (1.0 + slack)
    lhs = float(d @ g)
    rhs = -float(d @ hbar_d)
    assert abs(lhs - rhs) <= slack * max(1.0, abs(lhs), abs(rhs))
    assert np.linalg.norm(hbar_d + g) <= zeta * eps * np.linalg.norm(d) / 2.0 + slack * scale


def check_nc_contract(H, g, eps, out):
    d = out.d
    dn2 = float(d @ d)
    assert dn2 > 0.0
    assert float(d @ g) <= 1e-12 * np.linalg.norm(d) * np.linalg.norm(g)
    assert float(d @ (H @ d)) <= -eps * dn2 * (1.0 - 1e-10)


def test_identity_system_single_step():
    # (I + 2 I) d = -e1 solved exactly in one CG step: d = -g / 3.
    for n in (1, 4, 10):
        g = np.zeros(n)
        g[0] = 1.0
        out = capped_cg(matvec(np.eye(n)), g, eps=1.0, zeta=0.5)
        assert out.d_type == SOL
        assert out.iterations == 1
        np.testing.assert_allclose(out.d, -g / 3.0, rtol=0, atol=1e-14)


def test_zero_damped_operator_is_immediate_nc():
    # H = -I with eps = 0.5 makes H + 2 eps I the zero operator, so the
    # pre-loop curvature test fires and returns p0 = -g.
    g = np.array([1.0, 0.0, 0.0])
    out = capped_cg(matvec(-np.eye(3)), g, eps=0.5, zeta=0.5)
    assert out.d_type == NC
    assert out.iterations == 0
    np.testing.assert_array_equal(out.d, -g)
    check_nc_contract(-np.eye(3), g, 0.5, out)


def test_diagonal_sol_matches_dense_solve():
    H = np.diag([10.0, 1.0, 0.1])
    g = np.ones(3)
    eps, zeta = 0.01, 0.5
    out = capped_cg(matvec(H), g, eps, zeta)
    assert out.d_type == SOL
    check_sol_contract(H, g, eps, zeta, out)
    dense = np.linalg.solve(H + 2 * eps * np.eye(3), -g)
    # The residual bound caps the distance to the dense solution.
    bound = zeta * eps * np.linalg.norm(out.d) / 2.0 / min(np.diag(H) + 2 * eps)
    assert np.linalg.norm(out.d - dense) <= bound + 1e-12


def test_update_cap_params_direct_formulas():
    base = CapParams.from_cap(0.0, eps=1.0, zeta=0.5)
    up = update_cap_params(base, 1.0)
    assert up.kappa == 3.0
    assert up.zeta_hat == 0.5 / 9.0
    assert up.tau == math.sqrt(3.0) / (math.sqrt(3.0) + 1.0)

    same = update_cap_params(up, up.U)
    assert same == up

    base2 = CapParams.from_cap(0.0, eps=0.5, zeta=0.5)
    up2 = update_cap_params(base2, 10.0)
    with mpmath.workdps(50):
        kappa = (mpmath.mpf(10) + 2 * mpmath.mpf("0.5")) / mpmath.mpf("0.5")
        tau = mpmath.sqrt(kappa) / (mpmath.sqrt(kappa) + 1)
        t_cap = 4 * kappa**4 / (1 - mpmath.sqrt(tau)) ** 2
        assert abs(up2.kappa - float(kappa)) <= 1e-12 * float(kappa)
        assert abs(up2.zeta_hat - float(mpmath.mpf("0.5") / (3 * kappa))) <= 1e-15
        assert abs(up2.tau - float(tau)) <= 1e-15
        assert abs(up2.T_cap - float(t_cap)) <= 1e-12 * float(t_cap)


def test_fuzzed_contract_suite():
    # Mix indefinite and positive-definite spectra so both outcome types
    # get broad coverage (indefinite draws almost always end NC).
    rng = generator(2024, stream=11)
    eps_choices = [1e-3, 1e-2, 1e-1, 1.0]
    n_sol = n_nc = 0
    for trial in range(90):
        n = int(rng.integers(2, 31))
        if trial % 3 == 2:
            H = random_symmetric(rng, n, lo=0.5, hi=5.0)
        else:
            H = random_symmetric(rng, n)
        g = rng.standard_normal(n)
        while np.linalg.norm(g) == 0.0:
            g = rng.standard_normal(n)
        eps = eps_choices[trial % len(eps_choices)]
        zeta = 0.5
        out = capped_cg(matvec(H), g, eps, zeta)
        norm_h = float(np.max(np.abs(np.linalg.eigvalsh(H))))
        if out.d_type == SOL:
            n_sol += 1
            check_sol_contract(H, g, eps, zeta, out)
        else:
            n_nc += 1
            check_nc_contract(H, g, eps, out)
        assert out.iterations <= iteration_cap(norm_h, eps, zeta, n)
        assert out.final_params.U <= norm_h + 1e-10
    assert n_sol >= 20 and n_nc >= 20


def test_preconditions():
    with pytest.raises(ValueError):
        capped_cg(matvec(np.eye(2)), np.zeros(2), 1.0, 0.5)
    with pytest.raises(ValueError):
        capped_cg(matvec(np.eye(2)), np.ones(2), 0.0, 0.5)
    with pytest.raises(ValueError):
        capped_cg(matvec(np.eye(2)), np.ones(2), 1.0, 1.5)


def test_nonfinite_operator_raises_with_iteration():
    def bad(v):
        out = np.full_like(v, np.nan)
        return out

    with pytest.raises((CappedCgError, ValueError)):
        capped_cg(bad, np.ones(3), 1.0, 0.5)


def test_hvp_budget_accounting():
    H = np.diag([3.0, 2.0, 1.0])
    out = capped_cg(matvec(H), np.ones(3), 0.5, 0.5)
    # One product per iteration plus the initial one, plus one cap-test
    # product per completed loop pass.
    assert out.hvp_calls == out.iterations + 1
    assert out.hvp_calls_aux <= out.iterations


def test_nonzero_initial_cap_input():
    # Optional input U > 0 seeds the derived constants and still satisfies
    # the SOL contract.
    H = np.diag([4.0, 2.0, 1.0])
    g = np.ones(3)
    out = capped_cg(matvec(H), g, eps=0.1, zeta=0.5, U=4.0)
    assert out.d_type == SOL
    assert out.final_params.U == 4.0  # never exceeded by observed ratios
    check_sol_contract(H, g, 0.1, 0.5, out)
