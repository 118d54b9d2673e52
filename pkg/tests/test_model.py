import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnls_stability.model import (ModelParams, WaveProfile, amplitude_threshold, beta1_critical,
                                  cubic_derivs, default_half_length, fd_first_derivative,
                                  fd_second_derivative, fundamental_profile, load_profile,
                                  save_profile, steady_residual, uniform_grid)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(omega=0.0)
    with pytest.raises(ValueError):
        ModelParams(s=-1.0)
    with pytest.raises(ValueError):
        ModelParams(epsilon=-0.1)


def test_params_roundtrip():
    p = ModelParams(1.5, 4.0, 10.0, 2.0, 0.1, 0.05)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert p.with_(s=9.0).s == 9.0


def test_custom_nonlinearity_not_serialized():
    p = ModelParams(nonlinearity=lambda z1, z2, q: cubic_derivs(z1, z2, q.beta1, q.beta2))
    d = p.to_dict()
    assert d["nonlinearity"] == "custom"
    with pytest.raises(ValueError):
        ModelParams.from_dict(d)


def test_beta1_critical_values():
    # s = 4: (2*2 + 2 ell + 1)^2 - 1 over 8
    assert [beta1_critical(4.0, ell) for ell in range(5)] == [3.0, 6.0, 10.0, 15.0, 21.0]
    with pytest.raises(ValueError):
        beta1_critical(4.0, -1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 20), st.integers(0, 6), st.floats(0.2, 5))
def test_beta1_critical_scaling(s, ell, omega):
    # only s/omega matters
    assert math.isclose(beta1_critical(s, ell, omega), beta1_critical(s / omega, ell), rel_tol=1e-13)
    assert beta1_critical(s, ell + 1) > beta1_critical(s, ell)


def test_amplitude_threshold_cubic():
    p = ModelParams(2.0, 1.0, 1.0, 1.0)
    assert math.isclose(amplitude_threshold(p), math.sqrt(2 * 2.0), rel_tol=1e-12)


@pytest.mark.parametrize("omega", [0.5, 1.0, 3.0])
def test_fundamental_residual(omega):
    p = ModelParams(omega, 4.0, 10.0, 2.0)
    prof = fundamental_profile(p, uniform_grid(default_half_length(omega, 4.0), 8001))
    rU, rV = steady_residual(prof, p, order=6)
    assert np.max(np.abs(rU)) < 1e-8
    assert np.max(np.abs(rV)) == 0.0
    prof.validate()


def test_fundamental_derivative_exact():
    p = ModelParams(1.0, 4.0, 3.0, 0.0)
    prof = fundamental_profile(p)
    assert np.max(np.abs(prof.dU - fd_first_derivative(prof.U, prof.h))) < 1e-9


def test_fd_orders():
    x = np.linspace(-3, 3, 601)
    h = x[1] - x[0]
    f = np.sin(2 * x)
    exact = -4 * np.sin(2 * x)
    errs = [np.max(np.abs(fd_second_derivative(f, h, o) - exact[o // 2: -(o // 2)])) for o in (2, 4, 6)]
    assert errs[0] > errs[1] > errs[2]
    with pytest.raises(ValueError):
        fd_second_derivative(f, h, 3)


def test_residual_warns_on_coarse_grid():
    p = ModelParams(1.0, 4.0, 3.0, 0.0)
    prof = fundamental_profile(p, uniform_grid(20.0, 81))
    with pytest.warns(RuntimeWarning):
        steady_residual(prof, p, tol=1e-12)


def test_grid_must_be_odd():
    with pytest.raises(ValueError):
        uniform_grid(10.0, 100)


def test_validate_rejects_bad_profiles():
    x = uniform_grid(20.0, 401)
    U = 1 / np.cosh(x)
    with pytest.raises(ValueError):
        WaveProfile(x, U + 0.01 * x, 0 * x, (1, 1)).validate()
    with pytest.raises(ValueError):
        WaveProfile(x, U, np.tanh(x) / np.cosh(x), (1, 1), v_parity=1).validate()
    with pytest.raises(ValueError):
        WaveProfile(x, 1 / np.cosh(0.1 * x), 0 * x, (1, 1)).validate()


def test_save_load_roundtrip(tmp_path):
    p = ModelParams(1.0, 4.0, 10.0, 2.0)
    prof = fundamental_profile(p, uniform_grid(20.0, 201))
    csv_path, side = save_profile(prof, p, tmp_path / "prof.csv")
    back, p2 = load_profile(csv_path)
    assert p2 == p
    assert np.array_equal(back.U, prof.U) and np.array_equal(back.x, prof.x)
    assert side.exists()


def test_l2_norm_fundamental():
    p = ModelParams(1.0, 4.0, 10.0, 2.0)
    nu, nv = fundamental_profile(p).l2_norms()
    assert math.isclose(nu**2, 4.0, rel_tol=1e-9) and nv == 0.0
