"""Counting unstable directions with negative-eigenvalue counts.

The Hamiltonian-Krein index n(L-) + n(L+) - n(D) bounds the number of
eigenvalues off the axis plus those with negative signature. Below the
first pitchfork it vanishes; on the ell = 2 branch it is 4, and the Evans
search above accounts for all of it with two complex quartets.
"""
from cnls_stability import spectral as sp
from cnls_stability.model import ModelParams, fundamental_profile


def counts(profile, params, D):
    a = sp.sturm_negative_count(sp.l_minus(profile, params)).negative
    b = sp.sturm_negative_count(sp.l_plus(profile, params)).negative
    return sp.krein_index(a, b, D)


for beta1 in (2.0, 4.0, 10.0):
    p = ModelParams(1.0, 4.0, beta1, 2.0)
    k = counts(fundamental_profile(p), p, sp.d_matrix_fundamental(p))
    print(f"scalar wave beta1={beta1:<4g} n(L-)={k.n_L_minus} n(L+)={k.n_L_plus} K={k.K_Ham}  {k.verdict.value}")

for ell in (0, 2):
    prof, p = sp.bifurcated_profile(4.0, ell, 2.0, 0.05)
    k = counts(prof, p, sp.d_matrix_bifurcated(4.0, ell, 2.0))
    print(f"branch ell={ell} eps=0.05   n(L-)={k.n_L_minus} n(L+)={k.n_L_plus} n(D)={k.n_D} K={k.K_Ham}")

rep = sp.stability_report(4.0, 2.0, ell=0, eps=0.05, search=False)
print("\n" + rep.summary())
