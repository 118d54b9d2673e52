"""Pitchfork data for the cubic model at the resonances beta1 = beta1_critical(s, ell).

Everything here is normalized to omega = 1, so U0 = sqrt(2) sech x. The
bifurcated branch is (U0 + eps^2 U2, eps V1) at beta1 = beta1_star + mu_bar eps^2
with mu_bar = -b2/a2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .model import (ModelParams, WaveProfile, beta1_critical, default_half_length,
                    nonlinearity_derivs, uniform_grid)
from .specfun import pochhammer

SQRT2 = math.sqrt(2.0)
_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)


def _check_unit_omega(params: ModelParams | None):
    if params is not None and params.omega != 1.0:
        raise ValueError("Melnikov data are implemented for omega = 1 (rescale x and s otherwise)")


def _poly_coeffs(s: float, ell: int) -> tuple[np.ndarray, int]:
    """Coefficients c_k of the terminating 2F1 in sech^2 and the tanh power.

    V1(x) = sech^a x * tanh^p x * sum_k c_k sech^(2k) x, a = sqrt(s).
    """
    a = math.sqrt(s)
    half, p = divmod(ell, 2)
    A = -half
    B = a + half + 0.5 + p
    C = a + 1.0
    c = np.zeros(half + 1)
    c[0] = 1.0
    for k in range(half):
        c[k + 1] = c[k] * (A + k) * (B + k) / ((C + k) * (k + 1))
    return c, p


def v1_profile(s: float, ell: int, x, derivative: bool = False):
    """Bounded solution of V'' = (s - 2 beta1_star sech^2 x) V with ell zeros.

    Normalized so that the leading factor is sech^sqrt(s) x (tanh x for odd ell).
    With derivative=True returns (V1, V1').
    """
    if s <= 0:
        raise ValueError("s must be positive")
    x = np.asarray(x, dtype=float)
    a = math.sqrt(s)
    c, p = _poly_coeffs(s, ell)
    sech = 1.0 / np.cosh(x)
    tanh = np.tanh(x)
    w = sech**2
    poly = np.polynomial.polynomial.polyval(w, c)
    lead = sech**a * (tanh if p else 1.0)
    v = lead * poly
    if not derivative:
        return v
    dpoly = np.polynomial.polynomial.polyval(w, np.polynomial.polynomial.polyder(c)) if len(c) > 1 else 0.0 * w
    dlead = -a * sech**a * tanh * (tanh if p else 1.0) + (sech**a * w if p else 0.0)
    dv = dlead * poly + lead * dpoly * (-2.0 * w * tanh)
    return v, dv


def sign_changes(f: np.ndarray, rel_tol: float = 1e-12) -> int:
    f = np.asarray(f)
    f = f[np.abs(f) > rel_tol * np.max(np.abs(f))]
    return int(np.count_nonzero(np.sign(f[1:]) != np.sign(f[:-1])))


def _phi_closed(xi: np.ndarray):
    sech = 1.0 / np.cosh(xi)
    tanh = np.tanh(xi)
    p12 = sech * tanh
    d12 = sech * (sech**2 - tanh**2)
    p11 = 0.5 * sech * (3.0 - np.cosh(xi) ** 2 - 3.0 * xi * tanh)
    d11 = 0.5 * (-6.0 * sech * tanh - np.sinh(xi) - 3.0 * xi * d12)
    return p11, p12, d11, d12


def phi_fundamental(params: ModelParams, x, method: str = "closed",
                    u0: Callable | None = None, derivative: bool = False):
    """Fundamental solutions (phi11 even, phi12 odd) of -dU'' + omega dU - q(x) dU = 0.

    q = 2 d11F(U0^2,0) U0^2 + d1F(U0^2,0); Phi(0) = I.

    method="closed" uses the cubic formulas (rescaled for omega != 1).
    method="quadrature" evaluates the reduction-of-order integral for a
    general U0; u0(x) must return (U0, U0', U0'') and defaults to the cubic.
    """
    x = np.asarray(x, dtype=float)
    k = math.sqrt(params.omega)
    if method == "closed":
        if not params.is_cubic:
            raise ValueError("closed form is only available for the cubic")
        p11, p12, d11, d12 = _phi_closed(k * x)
        out = (p11, p12 / k, k * d11, d12)
        return out if derivative else out[:2]
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if u0 is None:
        def u0(y):
            y = np.asarray(y, dtype=float)
            sech = 1.0 / np.cosh(k * y)
            t = np.tanh(k * y)
            U = math.sqrt(2 * params.omega) * sech
            return U, -k * U * t, params.omega * U * (t**2 - sech**2)
    upp0 = float(u0(np.array([0.0]))[2][0])
    if upp0 >= 0:
        raise ValueError("U0''(0) must be negative for a homoclinic fundamental wave")

    def q(y):
        U = u0(y)[0]
        d = nonlinearity_derivs(U**2, 0.0 * U, params)
        return params.omega - 2 * d.d11 * U**2 - d.d1

    ax = np.abs(x)
    p11 = np.empty_like(x)
    small = ax < 1e-2
    # even Taylor series of phi'' = q phi about 0
    hq = 0.05
    qv = q(np.array([-2 * hq, -hq, 0.0, hq, 2 * hq]))
    q0 = qv[2]
    q2 = (-qv[0] + 16 * qv[1] - 30 * qv[2] + 16 * qv[3] - qv[4]) / (12 * hq**2)
    q4 = (qv[0] - 4 * qv[1] + 6 * qv[2] - 4 * qv[3] + qv[4]) / hq**4
    a2 = q0 / 2
    a4 = (q0 * a2 + q2 / 2) / 12
    a6 = (q0 * a4 + q2 / 2 * a2 + q4 / 24) / 30
    xs = ax[small]
    p11[small] = 1 + a2 * xs**2 + a4 * xs**4 + a6 * xs**6

    x0 = 1.0
    limit0 = _taylor_ratio(u0, upp0)

    def c2_integrand(y):
        if y < 1e-4:
            return limit0
        _, up, upp = (v[0] for v in u0(np.array([y])))
        return (upp - upp0) / up**2

    c2 = 1.0 / u0(np.array([x0]))[1][0] + quad(c2_integrand, 0.0, x0, epsabs=1e-14,
                                               epsrel=1e-13, limit=200)[0]
    big = ~small
    for i in np.nonzero(big)[0]:
        xi = ax[i]
        integ = quad(lambda y: 1.0 / u0(np.array([y]))[1][0] ** 2, x0, xi,
                     epsabs=0.0, epsrel=1e-13, limit=400)[0]
        p11[i] = u0(np.array([xi]))[1][0] * (-upp0 * integ + c2)
    U, Up, Upp = u0(x)
    p12 = Up / upp0
    if not derivative:
        return p11, p12
    d12 = Upp / upp0
    d11 = np.gradient(p11, x, edge_order=2)
    return p11, p12, d11, d12


def _taylor_ratio(u0, upp0) -> float:
    # limit of (U0''(y) - U0''(0)) / U0'(y)^2 as y -> 0: U0''''(0) / (2 U0''(0)^2)
    h = 1e-3
    vals = np.array([u0(np.array([t]))[2][0] for t in (-2 * h, -h, 0.0, h, 2 * h)])
    d2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h**2)
    return d2 / (2 * upp0**2)


def _cell_integrals(f: Callable, edges: np.ndarray) -> np.ndarray:
    """Integral of f over each cell [edges[i], edges[i+1]] by 8-point Gauss-Legendre."""
    a, b = edges[:-1], edges[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    nodes = mid[:, None] + half[:, None] * _GL_T[None, :]
    return (f(nodes) * _GL_W[None, :]).sum(axis=1) * half


def _half_grid(x: np.ndarray) -> tuple[np.ndarray, int]:
    x = np.asarray(x, dtype=float)
    i0 = int(np.argmin(np.abs(x)))
    if x[i0] != 0.0 or not np.allclose(x[i0:], -x[i0::-1], atol=1e-12):
        raise ValueError("grid must be symmetric with a node at x=0")
    return x[i0:], i0


def u2_profile(s: float, ell: int, x, params: ModelParams | None = None,
               derivative: bool = False):
    """Bounded even solution of -U'' + U - 3 U0^2 U = beta1_star U0 V1^2 (omega = 1).

    Variation of constants with phi11, phi12; cell integrals by Gauss-Legendre.
    """
    _check_unit_omega(params)
    beta1 = beta1_critical(s, ell)
    p = ModelParams(1.0, s, beta1, 0.0)
    xh, i0 = _half_grid(x)

    def g(y):
        return beta1 * SQRT2 / np.cosh(y) * v1_profile(s, ell, y) ** 2

    def f12(y):
        return phi_fundamental(p, y)[1] * g(y)

    def f11(y):
        return phi_fundamental(p, y)[0] * g(y)

    edges = xh
    tail_end = xh[-1] + 30.0
    c12 = _cell_integrals(f12, edges)
    tail = _cell_integrals(f12, np.linspace(xh[-1], tail_end, 61)).sum()
    A = np.concatenate([np.cumsum(c12[::-1])[::-1], [0.0]]) + tail
    B = np.concatenate([[0.0], np.cumsum(_cell_integrals(f11, edges))])
    p11, p12, d11, d12 = phi_fundamental(p, xh, derivative=True)
    u = -p11 * A - p12 * B
    du = -d11 * A - d12 * B
    U2 = np.concatenate([u[:0:-1], u])
    if not derivative:
        return U2
    return U2, np.concatenate([-du[:0:-1], du])


def a2_closed(s: float, ell: int) -> float:
    r = math.sqrt(s)
    pre = math.sqrt(math.pi) * math.exp(math.lgamma(r) - math.lgamma(r + 0.5))
    return -pre * 2 * math.factorial(ell) * r / ((r + ell + 0.5) * pochhammer(2 * r + 1, ell).real)


def a2_quadrature(s: float, ell: int, params: ModelParams | None = None) -> float:
    """-int d2dmuF(U0^2, 0) V1^2 dx evaluated by adaptive quadrature."""
    _check_unit_omega(params)
    p = params if params is not None else ModelParams(1.0, s, beta1_critical(s, ell), 0.0)
    L = default_half_length(1.0, s)

    def f(y):
        U0 = SQRT2 / math.cosh(y)
        d = nonlinearity_derivs(U0 * U0, 0.0, p)
        return float(d.d2mu) * float(v1_profile(s, ell, y)) ** 2

    val = quad(f, 0.0, L, epsabs=1e-11, epsrel=1e-12, limit=500)[0]
    return -2.0 * val


def melnikov_a2(s: float, ell: int, method: str = "closed", params: ModelParams | None = None) -> float:
    if method == "closed":
        _check_unit_omega(params)
        return a2_closed(s, ell)
    if method == "quadrature":
        return a2_quadrature(s, ell, params)
    raise ValueError(f"unknown method {method!r}")


def _rf(x: Fraction, j: int) -> Fraction:
    out = Fraction(1)
    for k in range(j):
        out *= x + k
    return out


def _c_exact(r: Fraction, ell: int) -> list[Fraction]:
    half = Fraction(1, 2)
    return [(-1) ** j * math.comb(ell, j) * _rf(2 * r + ell + 1, j) * _rf(r + half, j)
            / (_rf(2 * r + 1, j) * _rf(r + 1, j)) for j in range(ell + 1)]


def c_coeffs(s: float, ell: int) -> np.ndarray:
    """C_j with V1^2 = sech^(2 sqrt s) x * sum_j C_j sech^(2j) x."""
    return np.array([float(c) for c in _c_exact(Fraction(math.sqrt(s)), ell)])


def _b2_prefactor(s: float) -> float:
    r = math.sqrt(s)
    return math.sqrt(math.pi) * math.exp(math.lgamma(2 * r) - math.lgamma(2 * r + 0.5))


def _b2_double_sum_parts(s: float, ell: int) -> tuple[float, float]:
    """b2 = P - beta2 * Q; returns (P, Q).

    The alternating sums cancel heavily for larger ell, so they are carried
    out in exact rational arithmetic on the binary value of sqrt(s).
    """
    r = Fraction(math.sqrt(s))
    half = Fraction(1, 2)
    C = _c_exact(r, ell)
    chi = r + ell
    P = Q = Fraction(0)
    for j1 in range(ell + 1):
        for j2 in range(ell + 1):
            n = j1 + j2
            w = C[j1] * C[j2] * _rf(2 * r, n) / _rf(2 * r + half, n)
            P += w * chi**2 * (chi + 1) ** 2 * (2 * r + n) / ((r + j1 + 1) * (2 * r + n + 2))
            Q += w
    pre = _b2_prefactor(s)
    return pre * float(P), pre * float(Q)


_Q1 = {
    0: lambda x: x**3,
    1: lambda x: x * (7 * x**2 - 4),
    2: lambda x: x * (145 * x**5 + 571 * x**4 + 487 * x**3 - 663 * x**2 - 1260 * x - 540),
    3: lambda x: 27 * x * (229 * x**5 + 1343 * x**4 + 1655 * x**3 - 3271 * x**2 - 8336 * x - 4560),
    4: lambda x: 27 * x * (16627 * x**8 + 245867 * x**7 + 1380611 * x**6 + 3183693 * x**5
                           - 660138 * x**4 - 19430100 * x**3 - 41883400 * x**2
                           - 38216000 * x - 13040000),
}
_Q2 = {
    0: lambda x: 1,
    1: lambda x: 3,
    2: lambda x: 41 * x**3 + 167 * x**2 + 227 * x + 105,
    3: lambda x: 27 * (49 * x**3 + 303 * x**2 + 603 * x + 385),
    4: lambda x: 81 * (961 * x**6 + 14721 * x**5 + 92393 * x**4 + 303879 * x**3
                       + 551546 * x**2 + 522180 * x + 200200),
}


def _q3(x, ell: int):
    out = 1
    for j in range(1, ell // 2 + 1):
        out *= (x + j) ** 3
    for k in range(1, 2 * ell + 1):
        out *= 4 * x + 2 * k - 1
    return out


def b2_polynomial_parts(s: float, ell: int) -> tuple[float, float]:
    if ell > 4:
        raise ValueError("polynomial form is tabulated only for ell <= 4")
    x = Fraction(math.sqrt(s))
    pre = _b2_prefactor(s)
    q3 = _q3(x, ell)
    return pre * float(_Q1[ell](x) / q3), pre * float(Fraction(_Q2[ell](x)) / q3)


def b2_quadrature(s: float, ell: int, beta2: float, n_grid: int = 4001) -> float:
    """8 beta1^2 int phi11 V1^2 sech (int_x^inf phi12 V1^2 sech) - beta2 int V1^4."""
    beta1 = beta1_critical(s, ell)
    L = default_half_length(1.0, s)
    p = ModelParams(1.0, s, beta1, beta2)
    xh = np.linspace(0.0, L, (n_grid + 1) // 2)

    def inner_f(y):
        return phi_fundamental(p, y)[1] * v1_profile(s, ell, y) ** 2 / np.cosh(y)

    cells = _cell_integrals(inner_f, xh)
    tail = _cell_integrals(inner_f, np.linspace(L, L + 30.0, 61)).sum()
    G = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) + tail
    # G is even; spline it on the full grid so the natural ends sit at +-L where G'' ~ 0
    spline = CubicSpline(np.concatenate([-xh[:0:-1], xh]), np.concatenate([G[:0:-1], G]),
                         bc_type="natural")

    def outer(y):
        return float(phi_fundamental(p, np.array([y]))[0][0] * v1_profile(s, ell, y) ** 2
                     / math.cosh(y) * spline(abs(y)))

    I1 = 2.0 * quad(outer, 0.0, L, epsabs=1e-11, epsrel=1e-12, limit=500)[0]
    I2 = 2.0 * quad(lambda y: float(v1_profile(s, ell, y)) ** 4, 0.0, L,
                    epsabs=1e-11, epsrel=1e-12, limit=500)[0]
    return 8.0 * beta1**2 * I1 - beta2 * I2


def b2_from_u2(s: float, ell: int, beta2: float, x=None) -> float:
    """-2 int d12F U0 U2 V1^2 - int d22F V1^4 with U2 from variation of constants."""
    beta1 = beta1_critical(s, ell)
    if x is None:
        x = uniform_grid(default_half_length(1.0, s), 8001)
    U2 = u2_profile(s, ell, x)
    V1 = v1_profile(s, ell, x)
    U0 = SQRT2 / np.cosh(x)
    from scipy.integrate import simpson
    return (-2 * beta1 * simpson(U0 * U2 * V1**2, x=x) - beta2 * simpson(V1**4, x=x))


def melnikov_b2(s: float, ell: int, beta2: float, method: str = "double_sum") -> float:
    if method == "double_sum":
        P, Q = _b2_double_sum_parts(s, ell)
        return P - beta2 * Q
    if method == "polynomial":
        P, Q = b2_polynomial_parts(s, ell)
        return P - beta2 * Q
    if method == "quadrature":
        return b2_quadrature(s, ell, beta2)
    raise ValueError(f"unknown method {method!r}")


def b2_threshold(s: float, ell: int) -> float:
    """beta2 at which b2 changes sign (b2 > 0 below it)."""
    P, Q = _b2_double_sum_parts(s, ell)
    return P / Q


class BifurcationKind(str, Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class BifurcationVerdict:
    kind: BifurcationKind
    beta1_star: float
    ell: int
    a2: float
    b2: float

    @property
    def mu_bar(self) -> float:
        return -self.b2 / self.a2


def classify_bifurcation(s: float, ell: int, beta2: float) -> BifurcationVerdict:
    a2 = a2_closed(s, ell)
    P, Q = _b2_double_sum_parts(s, ell)
    b2 = P - beta2 * Q
    scale = abs(P) + abs(beta2 * Q)
    if abs(b2) <= 1e-10 * scale:
        kind = BifurcationKind.DEGENERATE
    elif a2 * b2 < 0:
        kind = BifurcationKind.SUPERCRITICAL
    else:
        kind = BifurcationKind.SUBCRITICAL
    return BifurcationVerdict(kind, beta1_critical(s, ell), ell, a2, b2)


@dataclass(frozen=True)
class MelnikovData:
    x: np.ndarray
    V1: np.ndarray
    phi11: np.ndarray
    phi12: np.ndarray
    U2: np.ndarray
    a2: float
    b2: float
    s: float
    ell: int
    beta2: float

    @property
    def mu_bar(self) -> float:
        return -self.b2 / self.a2

    @property
    def beta1_star(self) -> float:
        return beta1_critical(self.s, self.ell)


def melnikov_data(s: float, ell: int, beta2: float, x=None) -> MelnikovData:
    if x is None:
        x = uniform_grid(default_half_length(1.0, s))
    x = np.asarray(x, dtype=float)
    p = ModelParams(1.0, s, beta1_critical(s, ell), beta2)
    p11, p12 = phi_fundamental(p, x)
    return MelnikovData(x, v1_profile(s, ell, x), p11, p12, u2_profile(s, ell, x),
                        a2_closed(s, ell), melnikov_b2(s, ell, beta2), s, ell, beta2)


def approximate_branch(s: float, ell: int, beta2: float, eps: float, x=None) -> tuple[float, WaveProfile]:
    """(mu, profile) with profile = (U0 + eps^2 U2, eps V1) and mu = -(b2/a2) eps^2."""
    if x is None:
        x = uniform_grid(default_half_length(1.0, s))
    x = np.asarray(x, dtype=float)
    a2 = a2_closed(s, ell)
    b2 = melnikov_b2(s, ell, beta2)
    mu = -(b2 / a2) * eps**2
    sech = 1.0 / np.cosh(x)
    U0 = SQRT2 * sech
    dU0 = -U0 * np.tanh(x)
    if eps == 0:
        zero = np.zeros_like(x)
        return 0.0, WaveProfile(x, U0, zero, (1.0, math.sqrt(s)), 1, dU0, zero.copy())
    U2, dU2 = u2_profile(s, ell, x, derivative=True)
    V1, dV1 = v1_profile(s, ell, x, derivative=True)
    prof = WaveProfile(x, U0 + eps**2 * U2, eps * V1, (1.0, math.sqrt(s)), (-1) ** ell,
                       dU0 + eps**2 * dU2, eps * dV1)
    return mu, prof
