"""The Evans function of the scalar wave, numerically and in closed form.

At beta1 = 10 the V-block factor has integer index, which makes its zero set
easy to read off: eigenvalues embedded in the continuous spectrum, the
origin, and a resonance pole sitting exactly on the branch point 4i.
"""
import numpy as np

from cnls_stability import evans as ev
from cnls_stability.model import ModelParams

p = ModelParams(1.0, 4.0, 10.0, 2.0)
ctx = ev.CoefficientMatrix.fundamental(p)

print("lambda            |E| numeric        rel. diff to closed form")
for lam in (0.5 + 0.5j, 0.2 - 3.0j, 1.0 + 8.0j, -0.4 + 0.2j):
    num = ev.evans_eval(ctx, lam)
    closed = ev.evans_closed_fundamental(lam, p).value
    print(f"{lam!s:16}  {abs(num.value):.6e}  {abs(num.value - closed) / abs(closed):.2e}")


def e_b(z):
    return ev.evans_b_closed(ev.nu_values(z, p.omega, p.s)[3], p.beta1)


print("\nzeros of the V-block factor")
for guess in (-12j, -5j, 0j, 3j):
    z, _ = ev.newton_polish(e_b, guess + 0.05 + 0.05j)
    kind = ev.classify_point(ctx, guess).kind.value if guess else "zero mode"
    print(f"  {z.real:+.2e} {z.imag:+.10f}i   {kind}")

pole = ev.classify_point(ctx, 4j, branch_point="+is", gam=0.0)
print(f"\nat the branch point 4i: {pole.kind.value}")

# nothing leaves the axis for the scalar wave: the argument principle on a
# box hugging the embedded eigenvalue at -12i finds no zeros
box = ev.Rectangle(1e-4, 0.5, -12.5, -11.5)
print("zeros in Re in [1e-4, 0.5], Im in [-12.5, -11.5]:",
      ev.winding_number(lambda z: ev.evans_eval(ctx, z, x_check=False).value, box))
print("conjugation:", np.isclose(ev.evans_eval(ctx, 0.3 - 2j).value,
                                 np.conj(ev.evans_eval(ctx, 0.3 + 2j).value), rtol=1e-8))
