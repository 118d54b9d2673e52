import math

import numpy as np
import pytest

from cnls_stability import continuation as ct
from cnls_stability.melnikov import approximate_branch, v1_profile
from cnls_stability.model import (ModelParams, WaveProfile, beta1_critical, fundamental_profile,
                                  steady_residual, uniform_grid)


@pytest.fixture(scope="module")
def fundamental_branch():
    p = ModelParams(1.0, 4.0, 2.0, 2.0)
    br = ct.continue_branch(fundamental_profile(p), p, (2.0, 22.0))
    return p, br


def test_fundamental_branch_is_flat(fundamental_branch):
    p, br = fundamental_branch
    assert br.beta1[0] == 2.0 and br.beta1[-1] == 22.0
    assert np.all(br.v_norms == 0)
    U0 = math.sqrt(2) / np.cosh(br.points[0].profile.x)
    for pt in br.points[:: max(1, len(br.points) // 5)]:
        assert np.max(np.abs(pt.profile.U - U0)) < 1e-8


def test_pitchforks_at_s4(fundamental_branch):
    p, br = fundamental_branch
    found = ct.detect_pitchfork(br, p, (2.0, 22.0))
    assert len(found) == 5
    for ell, b in enumerate(found):
        assert abs(b - beta1_critical(4.0, ell)) <= 1e-6


def test_nve_count_matches_ell(fundamental_branch):
    p, br = fundamental_branch
    prof = br.points[0].profile
    # between the ell-th and (ell+1)-th pitchfork there are ell+1 negative NVE eigenvalues
    for b, n in ((2.5, 0), (4.0, 1), (12.0, 3)):
        assert ct.nve_negative_count(prof, p, b) == n


def test_detect_requires_span(fundamental_branch):
    p, br = fundamental_branch
    with pytest.raises(ValueError):
        ct.detect_pitchfork(br, p, (1.0, 22.0))


@pytest.mark.parametrize("ell", [0, 2])
def test_solve_from_expansion(ell):
    s, beta2, eps = 4.0, 2.0, 0.1
    mu, guess = approximate_branch(s, ell, beta2, eps)
    p = ModelParams(1.0, s, beta1_critical(s, ell) + mu, beta2)
    prof = ct.solve_homoclinic(p, guess)
    rU, rV = steady_residual(prof, p)
    assert max(np.max(np.abs(rU)), np.max(np.abs(rV))) < 1e-6
    prof.validate()
    assert ct.count_zeros(prof.V) == ell
    # the correction to the expansion is O(eps^2) in V
    assert np.max(np.abs(prof.V - guess.V)) < 5 * eps**2 * np.max(np.abs(guess.V)) / eps
    H = ct.hamiltonian(prof, p)
    assert np.max(np.abs(H)) < 1e-7


def test_bad_guess_raises():
    p = ModelParams(1.0, 4.0, 3.5, 2.0)
    x = uniform_grid(20.0, 401)
    junk = WaveProfile(x, 5 * np.exp(-x**2 / 50), 3 * np.exp(-x**2 / 50), (1.0, 2.0))
    with pytest.raises((ct.NewtonDivergence, ct.DecayViolation)):
        ct.solve_homoclinic(p, junk)


def test_branch_from_pitchfork_grows():
    p = ModelParams(1.0, 4.0, 3.0, 2.0)
    br = ct.branch_from_pitchfork(p, 4.0, 0, 2.0, 3.6, eps=0.05)
    assert br.beta1.max() >= 3.6 - 1e-9
    vn = br.v_norms
    assert np.all(vn > 0)
    # supercritical branch (b2/a2 < 0) exists for beta1 above the pitchfork
    assert np.all(br.beta1 >= 3.0 - 1e-6)
    assert ct.count_zeros(br.points[-1].profile.V) == 0


def test_count_zeros_ignores_noise():
    x = uniform_grid(20.0, 2001)
    V = v1_profile(4.0, 3, x)
    assert ct.count_zeros(V) == 3
    assert ct.count_zeros(V + 1e-14 * np.sin(50 * x)) == 3
