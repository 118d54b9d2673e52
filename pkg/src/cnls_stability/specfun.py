"""Special functions used by the closed-form evaluations.

Complex Gamma (Lanczos), Pochhammer symbols, generalized hypergeometric
series, associated Legendre functions and the sech-power integrals

    K_r      = int sech^r x dx
    K_r(a)   = int exp(-i a x) sech^r x dx
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_POLE_TOL = 1e-14
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class PoleError(ValueError):
    """Argument sits on a pole of Gamma (a non-positive integer)."""


class DivergenceError(ValueError):
    """Hypergeometric series does not converge at the requested argument."""


def _near_nonpositive_integer(z: complex, tol: float = _POLE_TOL) -> bool:
    z = complex(z)
    if z.real > 0.5:
        return False
    n = round(z.real)
    return abs(z - n) <= tol * max(1.0, abs(n))


def _lanczos_loggamma(z: complex) -> complex:
    # valid for Re z >= 0.5
    z = z - 1.0
    x = _LANCZOS_COEF[0]
    for k in range(1, 9):
        x += _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def _stirling_loggamma(z: complex) -> complex:
    # asymptotic series, used after shifting Re z above 15
    shift = 0j
    while z.real < 15.0:
        shift += cmath.log(z)
        z += 1.0
    zi = 1.0 / z
    zi2 = zi * zi
    series = zi * (1.0 / 12 + zi2 * (-1.0 / 360 + zi2 * (1.0 / 1260 + zi2 * (
        -1.0 / 1680 + zi2 * (1.0 / 1188 + zi2 * (-691.0 / 360360 + zi2 * (1.0 / 156)))))))
    return (z - 0.5) * cmath.log(z) - z + _HALF_LOG_2PI + series - shift


def loggamma(z: complex) -> complex:
    """log Gamma(z) for Re z >= 0.5 (no branch bookkeeping needed by callers)."""
    z = complex(z)
    if z.real < 0.5:
        raise ValueError("loggamma is only provided for Re z >= 0.5")
    if abs(z.imag) > 10.0 or z.real > 20.0:
        return _stirling_loggamma(z)
    return _lanczos_loggamma(z)


def gamma(z: complex) -> complex:
    """Complex Gamma function.

    Lanczos (g=7, 9 terms) near the real axis, Stirling with upward shift
    for large |Im z|, reflection for Re z < 1/2.
    """
    z = complex(z)
    if _near_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at z={z}")
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * gamma(1.0 - z))
    if z.imag == 0.0 and z.real == round(z.real) and z.real <= 30:
        return complex(math.factorial(int(z.real) - 1))
    return cmath.exp(loggamma(z))


def rgamma(z: complex) -> complex:
    """1/Gamma(z), entire; exactly zero at non-positive integers."""
    z = complex(z)
    if _near_nonpositive_integer(z):
        return 0j
    if z.real < 0.5:
        return cmath.sin(math.pi * z) * gamma(1.0 - z) / math.pi
    return 1.0 / gamma(z)


def pochhammer(x: complex, j: int) -> complex:
    """Rising factorial (x)_j by direct product."""
    if j < 0:
        raise ValueError("j must be non-negative")
    out = 1.0 + 0j
    for k in range(j):
        out *= x + k
    return out


@dataclass(frozen=True)
class HypergeometricSpec:
    numerator_params: tuple
    denominator_params: tuple
    argument: complex

    def __post_init__(self):
        object.__setattr__(self, "numerator_params", tuple(complex(a) for a in self.numerator_params))
        object.__setattr__(self, "denominator_params", tuple(complex(b) for b in self.denominator_params))
        object.__setattr__(self, "argument", complex(self.argument))

    def terminating_order(self) -> int | None:
        """Smallest n such that some numerator parameter equals -n, else None."""
        orders = [int(round(-a.real)) for a in self.numerator_params if _near_nonpositive_integer(a, 1e-12)]
        return min(orders) if orders else None


def _series(a: Sequence[complex], b: Sequence[complex], z: complex, nterms: int | None,
            max_terms: int = 100_000) -> complex:
    term = 1.0 + 0j
    total = 1.0 + 0j
    small = 0
    limit = nterms if nterms is not None else max_terms
    for k in range(limit):
        num = 1.0 + 0j
        for ai in a:
            num *= ai + k
        den = float(k + 1)
        for bi in b:
            if bi + k == 0:
                raise PoleError("denominator parameter hits a non-positive integer before termination")
            den *= bi + k
        term *= num / den * z
        total += term
        if nterms is None:
            if abs(term) < 1e-16 * abs(total):
                small += 1
                if small >= 3:
                    return total
            else:
                small = 0
    if nterms is None:
        raise DivergenceError(f"series did not converge in {max_terms} terms")
    return total


def hyp_pfq(spec: HypergeometricSpec | None = None, *, a=(), b=(), z=0.0) -> complex:
    """Generalized hypergeometric function pFq(a; b; z).

    Accepts either a HypergeometricSpec or keyword arguments a, b, z.
    """
    if spec is None:
        spec = HypergeometricSpec(tuple(a), tuple(b), z)
    a, b, z = spec.numerator_params, spec.denominator_params, spec.argument
    n = spec.terminating_order()
    if n is not None:
        return _series(a, b, z, n)
    if z == 0:
        return 1.0 + 0j
    if abs(z) < 1.0:
        return _series(a, b, z, None)
    if abs(z) == 1.0 and len(a) == 2 and len(b) == 1 and z == 1.0:
        return gauss_2f1_unit(a[0], a[1], b[0])
    if abs(z) == 1.0 and len(a) == len(b) + 1:
        excess = sum(b) - sum(a)
        if excess.real > 0:
            return _series(a, b, z, None)
    raise DivergenceError(f"non-terminating series at |z|={abs(z)} is not summable here")


def gauss_2f1_unit(a: complex, b: complex, c: complex) -> complex:
    """2F1(a, b; c; 1) = Gamma(c)Gamma(c-a-b) / (Gamma(c-a)Gamma(c-b)), Re(c-a-b) > 0."""
    a, b, c = complex(a), complex(b), complex(c)
    if (c - a - b).real <= 0:
        raise DivergenceError("Gauss summation needs Re(c-a-b) > 0")
    return gamma(c) * gamma(c - a - b) * rgamma(c - a) * rgamma(c - b)


def hyp2f1(a: complex, b: complex, c: complex, z: float, one_minus_z: float | None = None) -> complex:
    """2F1(a, b; c; z) for real z in [0, 1] and complex parameters.

    Direct series for z <= 0.75 or terminating input; above that the
    z -> 1-z connection formula (requires c-a-b non-integer). Pass
    one_minus_z when 1-z is known more accurately than z itself.
    """
    a, b, c = complex(a), complex(b), complex(c)
    spec = HypergeometricSpec((a, b), (c,), z)
    if spec.terminating_order() is not None or abs(z) <= 0.75:
        return hyp_pfq(spec)
    w = 1.0 - z if one_minus_z is None else one_minus_z
    if w == 0.0:
        return gauss_2f1_unit(a, b, c)
    d = c - a - b
    if abs(d - round(d.real)) < 1e-6:
        return _series((a, b), (c,), complex(z), None)
    t1 = gamma(c) * gamma(d) * rgamma(c - a) * rgamma(c - b) * _series((a, b), (1.0 - d,), w, None)
    t2 = (w ** d) * gamma(c) * gamma(-d) * rgamma(a) * rgamma(b) * _series((c - a, c - b), (1.0 + d,), w, None)
    return t1 + t2


def hyp2f1_regularized(a: complex, b: complex, c: complex, z: float) -> complex:
    """2F1(a, b; c; z)/Gamma(c), finite when c is a non-positive integer."""
    c = complex(c)
    if _near_nonpositive_integer(c, 1e-12):
        m = int(round(-c.real))
        coef = pochhammer(a, m + 1) * pochhammer(b, m + 1) / math.factorial(m + 1)
        return coef * z ** (m + 1) * hyp2f1(a + m + 1, b + m + 1, m + 2, z)
    return rgamma(c) * hyp2f1(a, b, c, z)


def saalschutz_3f2(n: int, b: complex, c: complex, d: complex, e: complex | None = None) -> complex:
    """Balanced terminating 3F2(-n, b, c; d, e; 1) in closed form.

    e defaults to the value forced by the balance condition -n+b+c+1 = d+e.
    """
    if n < 0:
        raise ValueError("n must be a non-negative integer")
    forced = -n + b + c + 1 - d
    if e is not None and abs(complex(e) - forced) > 1e-12 * max(1.0, abs(forced)):
        raise ValueError("parameters violate the Saalschutz balance condition")
    num = pochhammer(d - b, n) * pochhammer(d - c, n)
    den = pochhammer(d, n) * pochhammer(d - b - c, n)
    return num / den


def legendre_p(nu: complex, mu: complex, z: float) -> complex:
    """Associated Legendre function of the first kind P^mu_nu(z), -1 < z < 1.

    P^mu_nu(z) = ((1+z)/(1-z))^(mu/2) 2F1(-nu, nu+1; 1-mu; (1-z)/2) / Gamma(1-mu)
    """
    if not -1.0 < z < 1.0:
        raise ValueError("z must lie in (-1, 1)")
    nu, mu = complex(nu), complex(mu)
    ratio = ((1.0 + z) / (1.0 - z)) ** (mu / 2)
    return ratio * hyp2f1_regularized(-nu, nu + 1.0, 1.0 - mu, (1.0 - z) / 2.0)


def sech_moment(r: float) -> float:
    """K_r = int_R sech^r x dx = sqrt(pi) Gamma(r/2) / Gamma((r+1)/2)."""
    if r <= 0:
        raise ValueError("r must be positive")
    return math.sqrt(math.pi) * math.exp(math.lgamma(r / 2) - math.lgamma((r + 1) / 2))


def sech_fourier(r: float, alpha: float) -> float:
    """K_r(alpha) = int_R exp(-i alpha x) sech^r x dx = 2^(r-1)|Gamma((r+i alpha)/2)|^2 / Gamma(r)."""
    if r <= 0:
        raise ValueError("r must be positive")
    z = complex(r / 2, alpha / 2)
    # shift up once so loggamma stays in its half-plane: Gamma(z) = Gamma(z+1)/z
    lg = loggamma(z).real if r >= 1 else loggamma(z + 1).real - math.log(abs(z))
    return math.exp((r - 1) * math.log(2.0) + 2 * lg - math.lgamma(r))


def sech_fourier_odd(r: float, alpha: float) -> complex:
    """int_R exp(-i alpha x) sech^r x tanh x dx = -(i alpha / r) K_r(alpha)."""
    return -1j * alpha / r * sech_fourier(r, alpha)


def pochhammer_array(x: float, j: np.ndarray) -> np.ndarray:
    """Vectorized real Pochhammer (x)_j for an integer array j."""
    j = np.asarray(j)
    out = np.ones(j.shape)
    for idx, jj in np.ndenumerate(j):
        out[idx] = pochhammer(x, int(jj)).real
    return out
