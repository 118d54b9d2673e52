import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnls_stability import melnikov as mk
from cnls_stability.model import ModelParams, beta1_critical, fd_second_derivative, uniform_grid


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 16.0), st.integers(0, 5))
def test_v1_parity_and_zeros(s, ell):
    x = uniform_grid(30.0, 3001)
    V = mk.v1_profile(s, ell, x)
    assert np.allclose(V, (-1) ** ell * V[::-1], atol=1e-13)
    assert mk.sign_changes(V, 1e-9) == ell


@pytest.mark.parametrize("s,ell", [(4.0, 0), (4.0, 2), (0.25, 3), (9.0, 4)])
def test_v1_solves_nve(s, ell):
    x = uniform_grid(25.0, 10001)
    V, dV = mk.v1_profile(s, ell, x, derivative=True)
    h = x[1] - x[0]
    b1 = beta1_critical(s, ell)
    res = -fd_second_derivative(V, h, 6) + (s - 2 * b1 / np.cosh(x[3:-3]) ** 2) * V[3:-3]
    assert np.max(np.abs(res)) < 1e-8 * np.max(np.abs(V))
    # analytic derivative against finite differences
    assert np.max(np.abs(dV[3:-3] - np.gradient(V, h)[3:-3])) < 1e-4


@pytest.mark.parametrize("s", [0.25, 1.0, 4.0, 9.0])
@pytest.mark.parametrize("ell", [0, 1, 2, 3, 4])
def test_a2_closed_vs_quadrature(s, ell):
    a = mk.melnikov_a2(s, ell)
    q = mk.melnikov_a2(s, ell, method="quadrature")
    assert abs(a - q) <= 1e-8 * abs(q)
    assert a < 0


@pytest.mark.parametrize("s", [0.25, 1.0, 4.0, 9.0])
@pytest.mark.parametrize("ell", [0, 1, 2, 3, 4])
def test_b2_double_sum_vs_polynomial(s, ell):
    P, Q = mk._b2_double_sum_parts(s, ell)
    Pp, Qp = mk.b2_polynomial_parts(s, ell)
    assert abs(P - Pp) <= 1e-10 * abs(Pp)
    assert abs(Q - Qp) <= 1e-10 * abs(Qp)


def test_b2_closed_example():
    # s = 4, ell = 0: sqrt(pi) Gamma(4)/Gamma(4.5) (8 - beta2)
    pref = math.sqrt(math.pi) * math.gamma(4) / math.gamma(4.5)
    for b in (-1.0, 0.0, 2.0, 20.0):
        assert math.isclose(mk.melnikov_b2(4.0, 0, b), pref * (8 - b), rel_tol=1e-12)
    assert math.isclose(mk.b2_threshold(4.0, 0), 8.0, rel_tol=1e-12)


@pytest.mark.parametrize("s,ell,beta2", [(4.0, 0, 2.0), (4.0, 2, 2.0), (1.0, 1, -1.0), (9.0, 3, 20.0)])
def test_b2_three_routes(s, ell, beta2):
    ds = mk.melnikov_b2(s, ell, beta2)
    assert abs(mk.melnikov_b2(s, ell, beta2, method="quadrature") - ds) <= 1e-6 * abs(ds)
    assert abs(mk.b2_from_u2(s, ell, beta2) - ds) <= 1e-6 * abs(ds)


def test_u2_solves_forced_equation():
    s, ell = 4.0, 2
    x = uniform_grid(25.0, 8001)
    h = x[1] - x[0]
    U2 = mk.u2_profile(s, ell, x)
    V1 = mk.v1_profile(s, ell, x)
    U0 = math.sqrt(2) / np.cosh(x)
    b1 = beta1_critical(s, ell)
    mu = 0.0
    lhs = -fd_second_derivative(U2, h, 6) + (1 - 3 * U0[3:-3] ** 2) * U2[3:-3]
    rhs = b1 * V1[3:-3] ** 2 * U0[3:-3]
    assert np.max(np.abs(lhs - rhs)) < 1e-6
    assert np.allclose(U2, U2[::-1], atol=1e-12)
    del mu


def test_polynomial_table_limit():
    with pytest.raises(ValueError):
        mk.b2_polynomial_parts(4.0, 5)


def test_classification():
    v = mk.classify_bifurcation(4.0, 0, 2.0)
    assert v.kind is mk.BifurcationKind.SUPERCRITICAL and v.beta1_star == 3.0
    assert mk.classify_bifurcation(4.0, 0, 20.0).kind is mk.BifurcationKind.SUBCRITICAL
    assert mk.classify_bifurcation(4.0, 0, 8.0).kind is mk.BifurcationKind.DEGENERATE


def test_approximate_branch_shape():
    x = uniform_grid(20.0, 801)
    mu, prof = mk.approximate_branch(4.0, 2, 2.0, 0.1, x)
    md = mk.melnikov_data(4.0, 2, 2.0, x)
    assert math.isclose(mu, md.mu_bar * 0.01, rel_tol=1e-12)
    assert prof.v_parity == 1
    assert np.allclose(prof.V, 0.1 * md.V1)


def test_omega_guard():
    with pytest.raises(ValueError):
        mk.melnikov_a2(4.0, 0, params=ModelParams(omega=2.0, s=4.0))
