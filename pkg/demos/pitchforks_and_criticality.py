"""Where does the vector soliton branch off, and in which direction?

Continues the scalar wave in beta1 at s = 4, locates the pitchforks, then
asks the Melnikov coefficients whether each new branch opens toward larger
or smaller beta1 for a few values of beta2.
"""
from cnls_stability import continuation as ct
from cnls_stability import melnikov as mk
from cnls_stability.model import ModelParams, beta1_critical, fundamental_profile

s = 4.0
p = ModelParams(1.0, s, 2.0, 2.0)
branch = ct.continue_branch(fundamental_profile(p), p, (2.0, 22.0))
forks = ct.detect_pitchfork(branch, p, (2.0, 22.0))

print("ell  numeric beta1     closed form")
for ell, b in enumerate(forks):
    print(f"{ell:3d}  {b:.10f}  {beta1_critical(s, ell):g}")

# b2 changes sign at a threshold in beta2; that flips the criticality
print("\nell  beta2  a2          b2          kind")
for ell in range(3):
    for beta2 in (-1.0, 2.0, 20.0):
        v = mk.classify_bifurcation(s, ell, beta2)
        print(f"{ell:3d}  {beta2:5g}  {v.a2:+.5f}  {v.b2:+.5f}  {v.kind.value}")
    print(f"     threshold beta2 = {mk.b2_threshold(s, ell):.6f}")
