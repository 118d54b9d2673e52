"""Embedded eigenvalues leaving the imaginary axis along the ell = 2 branch.

For small amplitude eps the zeros near -12i and -5i move into the right
half-plane with Re lambda growing like eps^2; the zero at 3i does not give
an eigenvalue. The leading coefficient comes from a closed-form integral.
"""
import numpy as np

from cnls_stability import spectral as sp

s, ell, beta2 = 4.0, 2, 2.0
eps = np.array([0.025, 0.05, 0.1])

for lam0 in (-12j, -5j, 3j):
    data = sp.perturbation_data(sp.classify_case(lam0, s, ell, beta2))
    print(f"lambda0 = {lam0}: case {data.case.value}, {data.outcome.value}, "
          f"Re coefficient {data.re_coeff:+.6f}")
    if data.outcome is not sp.Outcome.UNSTABLE_PAIR:
        continue
    path = sp.trace_eigenvalue(s, ell, beta2, lam0, eps)
    re = np.array([z.real for _, z in path])
    for (e, z), r in zip(path, re):
        print(f"   eps={e:<6g} lambda = {z.real:.5e} {z.imag:+.6f}i   predicted Re {data.re_coeff * e * e:.5e}")
    print(f"   log-log slope {np.polyfit(np.log(eps), np.log(re), 1)[0]:.4f}")
