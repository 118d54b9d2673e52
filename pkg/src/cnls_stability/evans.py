"""Evans function for the linearization about a solitary wave.

The eigenvalue problem is written as Y' = A(x, lam) Y with
Y = (psi1..psi4, psi1'..psi4') and

    A = [[0, I], [diag(omega - i lam, omega + i lam, s - i lam, s + i lam) - B(x), 0]],

B(x) real symmetric. The Evans function is det(Y1-, .., Y4-, Y5+, .., Y8+)
of the Jost solutions; Y_j- ~ exp(nu_j x) v_j at -inf and Y_{j+4}+ ~
exp(-nu_j x) v_{j+4} at +inf.
"""
from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from . import _ode
from .model import (ModelParams, WaveProfile, default_half_length, fd_first_derivative,
                    nonlinearity_derivs, uniform_grid)
from .specfun import PoleError, gamma, hyp2f1, rgamma

_ROT_M = cmath.exp(-0.25j * math.pi)
_ROT_P = cmath.exp(0.25j * math.pi)
_ORTH_DX = 2.0
RTOL = 1e-11
ATOL = 1e-13


class EvansIntegrationError(RuntimeError):
    """The Jost integration failed or the determinant depends on x."""


class BoundaryTooClose(RuntimeError):
    """A contour kept passing too close to a zero after repeated jitter."""


def n_threads() -> int:
    """Worker count for data-parallel lambda sweeps (CNLS_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("CNLS_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(f: Callable, items: Sequence, threads: int | None = None) -> list:
    threads = n_threads() if threads is None else threads
    if threads <= 1 or len(items) < 2:
        return [f(z) for z in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(f, items))


# ---------------------------------------------------------------- spectral points

def nu_values(lam: complex, omega: float, s: float) -> np.ndarray:
    """(nu1, nu2, nu3, nu4) with the horizontal leftward branch cuts.

    nu1 = sqrt(omega - i lam), arg in (-3pi/4, pi/4]; nu2 = sqrt(omega + i lam),
    arg in (-pi/4, 3pi/4]; nu3, nu4 likewise with s.
    """
    lam = complex(lam)
    return np.array([_ROT_M * cmath.sqrt(lam + 1j * omega), _ROT_P * cmath.sqrt(lam - 1j * omega),
                     _ROT_M * cmath.sqrt(lam + 1j * s), _ROT_P * cmath.sqrt(lam - 1j * s)])


def branch_points(omega: float, s: float) -> dict[str, complex]:
    return {"+iw": 1j * omega, "-iw": -1j * omega, "+is": 1j * s, "-is": -1j * s}


def on_branch_cut(lam: complex, omega: float, s: float, tol: float = 0.0) -> bool:
    lam = complex(lam)
    if lam.real > tol:
        return False
    return any(abs(lam.imag - b) <= tol for b in (omega, -omega, s, -s))


def in_omega(lam: complex, omega: float, s: float) -> bool:
    lam = complex(lam)
    if lam.real > 0:
        return True
    return -min(omega, s) < lam.imag < min(omega, s)


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    nu: tuple
    in_Omega: bool
    in_Omega_e: bool
    in_essential_spectrum: bool
    nearest_branch_point: complex
    branch_distance: float


def spectral_point(lam: complex, params: ModelParams, kappa: float | None = None,
                   tol: float = 1e-12) -> SpectralPoint:
    """nu_j at lam and the region flags.

    kappa is the decay rate of the wave; it defaults to min(sqrt(omega), sqrt(s)).
    """
    lam = complex(lam)
    w, s = params.omega, params.s
    if kappa is None:
        kappa = min(math.sqrt(w), math.sqrt(s))
    nu = nu_values(lam, w, s)
    cut = on_branch_cut(lam, w, s)
    in_e = (not cut) and float(np.min(nu.real)) > -kappa / 2
    ess = abs(lam.real) <= tol and abs(lam.imag) >= min(w, s)
    bps = list(branch_points(w, s).values())
    d = [abs(lam - b) for b in bps]
    i = int(np.argmin(d))
    return SpectralPoint(lam, tuple(complex(v) for v in nu), in_omega(lam, w, s), in_e, ess,
                         bps[i], float(d[i]))


# ---------------------------------------------------------------- coefficient matrix

def _triple(f, df, d2f):
    return np.stack([np.asarray(f, float), np.asarray(df, float), np.asarray(d2f, float)], axis=-1)


def _prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(fg, (fg)', (fg)'') from (f, f', f'') and (g, g', g'')."""
    f, df, d2f = a[..., 0], a[..., 1], a[..., 2]
    g, dg, d2g = b[..., 0], b[..., 1], b[..., 2]
    return _triple(f * g, df * g + f * dg, d2f * g + 2 * df * dg + f * d2g)


def _assemble(entries: dict) -> np.ndarray:
    n = next(iter(entries.values())).shape[0]
    table = np.zeros((n, 10, 3))
    for m, key in enumerate(_ode.TRIU):
        if key in entries:
            table[:, m, :] = entries[key]
    return table


def _cubic_table(UU, UV, VV, beta1: float, beta2: float) -> np.ndarray:
    diag1 = 2 * UU + beta1 * VV
    cross = beta1 * UV
    diag2 = beta1 * UU + 2 * beta2 * VV
    return _assemble({(0, 0): diag1, (1, 1): diag1, (0, 1): UU,
                      (0, 2): cross, (0, 3): cross, (1, 2): cross, (1, 3): cross,
                      (2, 2): diag2, (3, 3): diag2, (2, 3): beta2 * VV})


@dataclass(frozen=True)
class CoefficientMatrix:
    """Tabulated potential B(x) on a uniform grid plus the background constants.

    table[i, m, d] holds the d-th x-derivative of the m-th upper-triangle
    entry of B at x[i]. Build with from_profile, fundamental or
    from_expansion.
    """
    x: np.ndarray
    table: np.ndarray
    omega: float
    s: float
    kappa: float
    source: str = "profile"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def half_length(self) -> float:
        return float(self.x[-1])

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @classmethod
    def from_profile(cls, profile: WaveProfile, params: ModelParams) -> "CoefficientMatrix":
        """Linearization about a sampled steady state (U, V)."""
        x = profile.x
        U, V = profile.U, profile.V
        dU, dV = profile.derivatives()
        d = nonlinearity_derivs(U**2, V**2, params)
        d2U = params.omega * U - d.d1 * U
        d2V = params.s * V - d.d2 * V
        if params.is_cubic:
            tu, tv = _triple(U, dU, d2U), _triple(V, dV, d2V)
            table = _cubic_table(_prod(tu, tu), _prod(tu, tv), _prod(tv, tv),
                                 params.beta1, params.beta2)
        else:
            h = profile.h
            vals = {(0, 0): d.d1 + d.d11 * U**2, (1, 1): d.d1 + d.d11 * U**2, (0, 1): d.d11 * U**2,
                    (2, 2): d.d2 + d.d22 * V**2, (3, 3): d.d2 + d.d22 * V**2, (2, 3): d.d22 * V**2}
            for key in ((0, 2), (0, 3), (1, 2), (1, 3)):
                vals[key] = d.d12 * U * V
            ent = {}
            for key, v in vals.items():
                v = np.asarray(v, float) * np.ones_like(x)
                dv = fd_first_derivative(v, h)
                ent[key] = _triple(v, dv, fd_first_derivative(dv, h))
            table = _assemble(ent)
        kappa = min(math.sqrt(params.omega), math.sqrt(params.s))
        return cls(np.asarray(x, float), table, params.omega, params.s, kappa, "profile",
                   {"params": params.to_dict()})

    @classmethod
    def fundamental(cls, params: ModelParams, half_length: float | None = None,
                    n: int = 4001) -> "CoefficientMatrix":
        """Exact cubic fundamental wave U0 = sqrt(2 omega) sech(sqrt(omega) x), V = 0."""
        if not params.is_cubic:
            raise ValueError("the analytic fundamental table is for the cubic model")
        L = default_half_length(params.omega, params.s) if half_length is None else half_length
        x = uniform_grid(L, n)
        k = math.sqrt(params.omega)
        sech = 1.0 / np.cosh(k * x)
        t = np.tanh(k * x)
        U = math.sqrt(2 * params.omega) * sech
        tu = _triple(U, -k * t * U, params.omega * U * (1 - 2 * sech**2))
        zero = np.zeros((x.size, 3))
        table = _cubic_table(_prod(tu, tu), zero, zero, params.beta1, params.beta2)
        return cls(x, table, params.omega, params.s, k, "fundamental", {"params": params.to_dict()})

    @classmethod
    def from_expansion(cls, s: float, ell: int, beta2: float, eps: float,
                       x: np.ndarray | None = None) -> "CoefficientMatrix":
        """A0 + eps A1 + eps^2 A2 about the bifurcating branch (cubic, omega = 1).

        U = U0 + eps^2 U2, V = eps V1 and beta1 = beta1_star + mu_bar eps^2,
        with B truncated after the eps^2 terms.
        """
        from .melnikov import a2_closed, melnikov_b2, u2_profile, v1_profile
        from .model import beta1_critical

        if x is None:
            x = uniform_grid(default_half_length(1.0, s))
        x = np.asarray(x, float)
        bstar = beta1_critical(s, ell)
        mu_bar = -melnikov_b2(s, ell, beta2) / a2_closed(s, ell)
        sech = 1.0 / np.cosh(x)
        U0 = math.sqrt(2.0) * sech
        tu0 = _triple(U0, -np.tanh(x) * U0, U0 - U0**3)
        V1, dV1 = v1_profile(s, ell, x, derivative=True)
        tv1 = _triple(V1, dV1, s * V1 - bstar * U0**2 * V1)
        U2, dU2 = u2_profile(s, ell, x, derivative=True)
        tu2 = _triple(U2, dU2, U2 - 3 * U0**2 * U2 - bstar * U0 * V1**2)
        e2 = eps * eps
        u0u0, u0v1, u0u2, v1v1 = _prod(tu0, tu0), _prod(tu0, tv1), _prod(tu0, tu2), _prod(tv1, tv1)
        diag1 = 2 * u0u0 + e2 * (4 * u0u2 + bstar * v1v1)
        cross = eps * bstar * u0v1
        diag2 = bstar * u0u0 + e2 * (mu_bar * u0u0 + 2 * bstar * u0u2 + 2 * beta2 * v1v1)
        table = _assemble({(0, 0): diag1, (1, 1): diag1, (0, 1): u0u0 + 2 * e2 * u0u2,
                           (0, 2): cross, (0, 3): cross, (1, 2): cross, (1, 3): cross,
                           (2, 2): diag2, (3, 3): diag2, (2, 3): e2 * beta2 * v1v1})
        meta = {"s": s, "ell": ell, "beta2": beta2, "eps": eps, "beta1": bstar + mu_bar * e2}
        return cls(x, table, 1.0, s, min(1.0, math.sqrt(s)), "expansion", meta)

    def potential(self, x: float) -> np.ndarray:
        out = np.empty(10)
        _ode._potential(float(x), self.table, self.x[0], self.h, out)
        B = np.zeros((4, 4))
        for m, (i, j) in enumerate(_ode.TRIU):
            B[i, j] = B[j, i] = out[m]
        return B

    def background(self, lam: complex) -> np.ndarray:
        lam = complex(lam)
        w, s = self.omega, self.s
        return np.array([w - 1j * lam, w + 1j * lam, s - 1j * lam, s + 1j * lam])

    def matrix(self, x: float, lam: complex) -> np.ndarray:
        """A(x, lam) as an 8x8 complex array."""
        A = np.zeros((8, 8), dtype=complex)
        A[:4, 4:] = np.eye(4)
        A[4:, :4] = np.diag(self.background(lam)) - self.potential(x)
        return A

    def limit(self, lam: complex) -> np.ndarray:
        A = np.zeros((8, 8), dtype=complex)
        A[:4, 4:] = np.eye(4)
        A[4:, :4] = np.diag(self.background(lam))
        return A


# ---------------------------------------------------------------- Jost solutions

def _eigvec(j: int, nu: complex, sign: int) -> np.ndarray:
    v = np.zeros(8, dtype=complex)
    v[j] = 1.0
    v[j + 4] = sign * nu
    return v


def _run(ctx: CoefficientMatrix, W0: np.ndarray, xstart: float, checkpoints, sigma: complex,
         orth_dx: float, lam: complex, rtol: float = RTOL):
    cps = np.asarray(checkpoints, dtype=float)
    Ws, logs, status, nsteps = _ode.integrate(
        np.ascontiguousarray(W0, dtype=np.complex128), float(xstart), cps, ctx.table,
        float(ctx.x[0]), ctx.h, ctx.background(lam).astype(np.complex128), complex(sigma),
        float(orth_dx), rtol, ATOL, 0.05, 5_000_000)
    if status == 1:
        raise EvansIntegrationError(f"step size underflow at lambda={lam}")
    if status == 2:
        raise EvansIntegrationError(f"step budget exhausted at lambda={lam}")
    return Ws, logs


@dataclass(frozen=True)
class JostBundle:
    """Jost solutions Y_j- (j = 1..4) and Y_j+ (j = 5..8) sampled on x.

    Y[j] has shape (len(x), 8). Columns are integrated one at a time in the
    rescaled variable exp(-nu x) Y, so a column is only as accurate as the
    gap between its own growth rate and the faster ones allows.
    """
    lam: complex
    x: np.ndarray
    Y: dict
    nu: tuple
    v: dict
    normalization: str = "raw"

    def component(self, j: int, comp: int) -> np.ndarray:
        return self.Y[j][:, comp]


def jost_solutions(ctx: CoefficientMatrix, lam: complex, x: np.ndarray | None = None,
                   nu: np.ndarray | None = None, rtol: float = RTOL) -> JostBundle:
    lam = complex(lam)
    L = ctx.half_length
    if nu is None:
        nu = nu_values(lam, ctx.omega, ctx.s)
    x = np.linspace(-L / 2, L / 2, 201) if x is None else np.sort(np.asarray(x, float))
    if x[0] < -L or x[-1] > L:
        raise ValueError("sample points must lie inside the table range")
    Y, V = {}, {}
    for j in range(4):
        for sign, idx, start, pts in ((1, j + 1, -L, x), (-1, j + 5, L, x[::-1])):
            v = _eigvec(j, nu[j], sign)
            rate = sign * nu[j]
            Ws, _ = _run(ctx, v[:, None], start, pts, rate, 0.0, lam, rtol)
            vals = Ws[:, :, 0] * np.exp(rate * pts)[:, None]
            Y[idx] = vals if sign > 0 else vals[::-1]
            V[idx] = v
    return JostBundle(lam, x, Y, tuple(complex(z) for z in nu), V)


# ---------------------------------------------------------------- Evans function

@dataclass(frozen=True)
class EvansValue:
    lam: complex
    value: complex
    factors: tuple | None = None
    extended: bool = False
    gamma: complex | None = None
    x_values: dict = field(default_factory=dict, compare=False)
    scale: float = float("nan")

    def x_spread(self) -> float:
        """Largest relative deviation of the determinant over the evaluation points."""
        if not self.x_values:
            return 0.0
        ref = self.value
        den = max(abs(ref), 1e-300)
        return max(abs(v - ref) for v in self.x_values.values()) / den


@dataclass
class _Frames:
    lam: complex
    nu: np.ndarray
    order: np.ndarray
    W_minus: dict
    W_plus: dict
    log_minus: dict
    log_plus: dict


def _frames(ctx: CoefficientMatrix, lam: complex, nu: np.ndarray, points) -> _Frames:
    L = ctx.half_length
    order = np.argsort(-nu.real, kind="stable")
    sigma = complex(np.mean(nu))
    Wm = np.stack([_eigvec(j, nu[j], 1) for j in order], axis=1)
    Wp = np.stack([_eigvec(j, nu[j], -1) for j in order], axis=1)
    up = sorted(points)
    Wsm, lm = _run(ctx, Wm, -L, up, sigma, _ORTH_DX, lam)
    Wsp, lp = _run(ctx, Wp, L, up[::-1], -sigma, _ORTH_DX, lam)
    Wsp, lp = Wsp[::-1], lp[::-1]
    return _Frames(lam, nu, order, dict(zip(up, Wsm)), dict(zip(up, Wsp)),
                   dict(zip(up, lm)), dict(zip(up, lp)))


def _det_at(fr: _Frames, x: float) -> tuple[complex, float]:
    M = np.concatenate([fr.W_minus[x], fr.W_plus[x]], axis=1)
    logs = fr.log_minus[x] + fr.log_plus[x]
    hadamard = float(np.prod(np.linalg.norm(M, axis=0)))
    # the same column permutation on both sides leaves the sign unchanged
    return complex(np.linalg.det(M)) * math.exp(logs), hadamard * math.exp(logs)


def _evans_numeric(ctx: CoefficientMatrix, lam: complex, nu: np.ndarray, check: bool = True,
                   x_check: bool = True) -> EvansValue:
    L = ctx.half_length
    pts = (-L / 4, 0.0, L / 4) if x_check else (0.0,)
    fr = _frames(ctx, lam, nu, pts)
    vals = {}
    scale = 0.0
    for x in pts:
        vals[x], sc = _det_at(fr, x)
        if x == 0.0:
            scale = sc
    E0 = vals[0.0]
    if check and x_check:
        dev = max(abs(v - E0) for v in vals.values())
        if dev > 1e-6 * max(abs(E0), 1e-300) and dev > 1e-10 * scale:
            raise EvansIntegrationError(
                f"determinant depends on x at lambda={lam}: relative spread {dev / max(abs(E0), 1e-300):.2e}")
    return EvansValue(complex(lam), E0, x_values=vals, scale=scale)


def evans_eval(ctx: CoefficientMatrix, lam: complex, check: bool = True, x_check: bool = True) -> EvansValue:
    """Evans function at lam, from Jost frames evaluated at x = 0 (and +-L/4)."""
    lam = complex(lam)
    if on_branch_cut(lam, ctx.omega, ctx.s) and not any(
            abs(lam - b) < 1e-14 for b in branch_points(ctx.omega, ctx.s).values()):
        raise ValueError(f"lambda={lam} lies on a branch cut")
    return _evans_numeric(ctx, lam, nu_values(lam, ctx.omega, ctx.s), check, x_check)


def evans_grid(ctx: CoefficientMatrix, lams: Sequence[complex], threads: int | None = None,
               x_check: bool = False) -> np.ndarray:
    """Evans values on a sequence of lambdas, evaluated in parallel."""
    return np.array(parallel_map(lambda z: evans_eval(ctx, z, x_check=x_check).value, list(lams), threads))


# ---------------------------------------------------------------- closed forms (cubic, fundamental)

def _chi(beta1: float) -> complex:
    return (-1 + cmath.sqrt(1 + 8 * beta1)) / 2


def evans_a_closed(nu1: complex, nu2: complex, omega: float = 1.0) -> complex:
    a = nu1 / math.sqrt(omega)
    b = nu2 / math.sqrt(omega)
    return omega * 4 * a * b * (a - 1) ** 2 * (b - 1) ** 2 / ((a + 1) ** 2 * (b + 1) ** 2)


def evans_b_closed(nu: complex, beta1: float, omega: float = 1.0) -> complex:
    """-2 Gamma(nu+1)^2 / (Gamma(nu-chi) Gamma(nu+chi+1)) in the omega = 1 scaling."""
    a = nu / math.sqrt(omega)
    chi = _chi(beta1)
    try:
        g = gamma(a + 1)
    except PoleError:
        return complex("inf")
    return math.sqrt(omega) * (-2 * g * g * rgamma(a - chi) * rgamma(a + chi + 1))


def evans_closed_fundamental(lam: complex, params: ModelParams, nu: np.ndarray | None = None) -> EvansValue:
    """E = E_A E_B E_C for the cubic fundamental wave.

    E_C uses nu3(lam) in the E_B formula; this is E_B(-lam) continued with the
    branch cuts of nu3.
    """
    if not params.is_cubic:
        raise ValueError("closed forms are available for the cubic model only")
    lam = complex(lam)
    if nu is None:
        nu = nu_values(lam, params.omega, params.s)
    EA = evans_a_closed(nu[0], nu[1], params.omega)
    EB = evans_b_closed(nu[3], params.beta1, params.omega)
    EC = evans_b_closed(nu[2], params.beta1, params.omega)
    return EvansValue(lam, EA * EB * EC, (EA, EB, EC))


def jost_closed(lam: complex, params: ModelParams, x, nu: np.ndarray | None = None) -> dict:
    """Closed-form Jost data for the cubic fundamental wave.

    Returns arrays for p1, q1, p2, q2 and p4 (with derivatives, keys ending
    in 'd'), normalized so that exp(-nu_j x) Y_j -> v_j as x -> -inf.
    """
    w = params.omega
    k = math.sqrt(w)
    if nu is None:
        nu = nu_values(lam, w, params.s)
    x = np.asarray(x, float)
    y = k * x
    t = np.tanh(y)
    sech2 = 1.0 / np.cosh(y) ** 2

    def pair(n):
        a = n / k
        e = np.exp(a * y) / (a + 1) ** 2
        p = e * (a - t) ** 2
        q = -e * sech2
        dp = e * (a * (a - t) ** 2 - 2 * (a - t) * sech2) * k
        dq = -e * sech2 * (a - 2 * t) * k
        return p, q, dp, dq

    p1, q1, dp1, dq1 = pair(nu[0])
    q2, p2, dq2, dp2 = pair(nu[1])
    a4 = nu[3] / k
    chi = _chi(params.beta1)
    A, B, C = a4 - chi, a4 + chi + 1, a4 + 1
    z, zc = expit(2 * y), expit(-2 * y)
    F = np.array([hyp2f1(A, B, C, zz, ww) for zz, ww in zip(z, zc)])
    if abs(A) < 1e-14:
        dF = np.zeros_like(F)
    else:
        dF = np.array([A * B / C * hyp2f1(A + 1, B + 1, C + 1, zz, ww) for zz, ww in zip(z, zc)])
    half_sech = np.sqrt(sech2) / 2
    base = half_sech ** a4
    p4 = base * F
    dp4 = (-a4 * t * base * F + base * dF * sech2 / 2) * k
    return {"p1": p1, "q1": q1, "p1d": dp1, "q1d": dq1, "p2": p2, "q2": q2, "p2d": dp2, "q2d": dq2,
            "p4": p4, "p4d": dp4}


# ---------------------------------------------------------------- extended Evans function

_EXT = {"+is": (3, 1), "+iw": (1, 1), "-is": (2, -1), "-iw": (0, -1)}


def _branch_lambda(gam: complex, branch_point: str, omega: float, s: float) -> tuple[complex, int]:
    if branch_point not in _EXT:
        raise ValueError(f"branch_point must be one of {sorted(_EXT)}")
    j, sgn = _EXT[branch_point]
    lam_br = branch_points(omega, s)[branch_point]
    # +i branch points: gamma^2 = i(lam - lam_br); -i branch points: gamma^2 = -i(lam - lam_br)
    lam = lam_br - 1j * gam * gam if sgn > 0 else lam_br + 1j * gam * gam
    return lam, j


def _extended_nu(gam: complex, branch_point: str, omega: float, s: float) -> tuple[complex, np.ndarray]:
    lam, j = _branch_lambda(complex(gam), branch_point, omega, s)
    nu = nu_values(lam, omega, s)
    nu[j] = complex(gam)
    return lam, nu


def _check_radius(gam: complex, omega: float, s: float):
    r = 0.5 * min(math.sqrt(omega), math.sqrt(s))
    if abs(gam) > r:
        raise ValueError(f"|gamma|={abs(gam):.3g} exceeds the admissible radius {r:.3g}")


def extended_evans(ctx: CoefficientMatrix, gam: complex, branch_point: str, check: bool = True) -> EvansValue:
    """Evans function on the two-sheeted cover near a branch point.

    The nu_j that vanishes at the branch point is replaced by gamma, which
    makes the determinant analytic in gamma.
    """
    _check_radius(gam, ctx.omega, ctx.s)
    lam, nu = _extended_nu(gam, branch_point, ctx.omega, ctx.s)
    ev = _evans_numeric(ctx, lam, nu, check)
    return EvansValue(lam, ev.value, None, True, complex(gam), ev.x_values, ev.scale)


def extended_evans_closed(gam: complex, branch_point: str, params: ModelParams) -> EvansValue:
    _check_radius(gam, params.omega, params.s)
    lam, nu = _extended_nu(gam, branch_point, params.omega, params.s)
    ev = evans_closed_fundamental(lam, params, nu)
    return EvansValue(lam, ev.value, ev.factors, True, complex(gam))


# ---------------------------------------------------------------- root location

@dataclass(frozen=True)
class Rectangle:
    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if not (self.re1 > self.re0 and self.im1 > self.im0):
            raise ValueError("rectangle must have positive width and height")

    @property
    def center(self) -> complex:
        return complex((self.re0 + self.re1) / 2, (self.im0 + self.im1) / 2)

    @property
    def size(self) -> float:
        return max(self.re1 - self.re0, self.im1 - self.im0)

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (self.re0 + margin <= z.real <= self.re1 - margin
                and self.im0 + margin <= z.imag <= self.im1 - margin)

    def corners(self) -> list[complex]:
        return [complex(self.re0, self.im0), complex(self.re1, self.im0),
                complex(self.re1, self.im1), complex(self.re0, self.im1)]

    def shifted(self, d: float) -> "Rectangle":
        return Rectangle(self.re0 - d, self.re1 + d, self.im0 - d, self.im1 + d)


class _BoundaryHit(Exception):
    pass


def _wrap(d: float) -> float:
    return (d + math.pi) % (2 * math.pi) - math.pi


def winding_number(f: Callable[[complex], complex], rect: Rectangle, n: int = 512,
                   max_depth: int = 12, rel_floor: float = 1e-10, threads: int | None = None) -> int:
    """Argument-principle zero count inside rect (boundary must avoid zeros).

    n base samples around the perimeter, refined by bisection wherever the
    phase jumps by more than pi/4 between neighbours.
    """
    c = rect.corners()
    lengths = [abs(c[(i + 1) % 4] - c[i]) for i in range(4)]
    per = sum(lengths)
    pts = []
    for i in range(4):
        m = max(16, int(round(n * lengths[i] / per)))
        pts.extend(c[i] + (c[(i + 1) % 4] - c[i]) * np.arange(m) / m)
    pts.append(c[0])
    vals = parallel_map(f, pts, threads)
    amax = max(abs(v) for v in vals)
    if not np.isfinite(amax):
        raise _BoundaryHit("non-finite value on the contour")
    floor = rel_floor * amax

    def seg(z0, z1, f0, f1, depth):
        if min(abs(f0), abs(f1)) <= floor:
            raise _BoundaryHit("zero on or near the contour")
        d = _wrap(cmath.phase(f1) - cmath.phase(f0))
        if abs(d) <= math.pi / 4 or depth >= max_depth:
            if abs(d) > math.pi / 2:
                raise _BoundaryHit("unresolved phase jump on the contour")
            return d
        zm = (z0 + z1) / 2
        fm = f(zm)
        return seg(z0, zm, f0, fm, depth + 1) + seg(zm, z1, fm, f1, depth + 1)

    total = sum(seg(pts[i], pts[i + 1], vals[i], vals[i + 1], 0) for i in range(len(pts) - 1))
    w = total / (2 * math.pi)
    if abs(w - round(w)) > 0.05:
        raise _BoundaryHit("non-integer winding number")
    return int(round(w))


def _derivative(f, z: complex, h: float) -> complex:
    return (-f(z + 2 * h) + 8 * f(z + h) - 8 * f(z - h) + f(z - 2 * h)) / (12 * h)


def newton_polish(f: Callable[[complex], complex], z: complex, tol: float = 1e-10,
                  max_iter: int = 40, h: float = 1e-4) -> tuple[complex, bool]:
    z = complex(z)
    for _ in range(max_iter):
        fz = f(z)
        if fz == 0:
            return z, True
        dz = fz / _derivative(f, z, h)
        z = z - dz
        h = min(h, max(abs(dz), 1e-6))
        if abs(dz) < tol:
            return z, True
    return z, False


def _robust_winding(f, rect: Rectangle, n: int, rng, jitter: float, max_jitter: int = 5,
                    threads: int | None = None) -> tuple[int, Rectangle]:
    r = rect
    for _ in range(max_jitter + 1):
        try:
            return winding_number(f, r, n, threads=threads), r
        except _BoundaryHit:
            d = jitter * rect.size * (0.5 + rng.random())
            r = Rectangle(rect.re0 - d * rng.random(), rect.re1 + d * rng.random(),
                          rect.im0 - d * rng.random(), rect.im1 + d * rng.random())
    raise BoundaryTooClose(f"contour of {rect} stays too close to a zero after {max_jitter} jitters")


def find_zeros(f: Callable[[complex], complex], rect: Rectangle, tol: float = 1e-8, n: int = 512,
               newton_size: float = 0.5, min_size: float = 1e-6, seed: int = 0,
               threads: int | None = None) -> list[tuple[complex, int]]:
    """All zeros of an analytic f in rect: winding numbers plus quadtree plus Newton."""
    rng = np.random.default_rng(seed)
    total, rect = _robust_winding(f, rect, n, rng, 1e-3, threads=threads)
    found: list[tuple[complex, int]] = []

    def solve(r: Rectangle, count: int):
        if count == 0:
            return
        if count == 1 and r.size <= newton_size:
            z, ok = newton_polish(f, r.center, tol=tol * 1e-2)
            if ok and r.contains(z):
                found.append((z, 1))
                return
        if r.size < min_size:
            z = r.center
            if count == 1:
                z, _ = newton_polish(f, z, tol=tol * 1e-2)
            found.append((z, count))
            return
        for attempt in range(6):
            fx = 0.5 + (0.1 * (rng.random() - 0.5) if attempt else 0.0)
            fy = 0.5 + (0.1 * (rng.random() - 0.5) if attempt else 0.0)
            xm = r.re0 + fx * (r.re1 - r.re0)
            ym = r.im0 + fy * (r.im1 - r.im0)
            kids = [Rectangle(r.re0, xm, r.im0, ym), Rectangle(xm, r.re1, r.im0, ym),
                    Rectangle(r.re0, xm, ym, r.im1), Rectangle(xm, r.re1, ym, r.im1)]
            try:
                counts = [winding_number(f, k, max(64, n // 4), threads=threads) for k in kids]
            except _BoundaryHit:
                continue
            if sum(counts) == count:
                for k, cnt in zip(kids, counts):
                    solve(k, cnt)
                return
        raise BoundaryTooClose(f"could not split {r} cleanly")

    solve(rect, total)
    if sum(m for _, m in found) != total:
        raise RuntimeError("located zeros do not account for the winding number")
    return found


def _cut_lines(omega: float, s: float) -> list[float]:
    return [omega, -omega, s, -s]


def locate_zeros(ctx: CoefficientMatrix | Callable, rect: Rectangle, tol: float = 1e-8,
                 n: int = 512, threads: int | None = None, **kw) -> list[tuple[complex, int]]:
    """Zeros (with multiplicity) of the Evans function inside rect.

    ctx is a CoefficientMatrix or any analytic callable. Rectangles touching
    a branch cut are pushed off it by 1e-6; crossing one is an error.
    """
    if isinstance(ctx, CoefficientMatrix):
        w, s = ctx.omega, ctx.s

        def f(z):
            return evans_eval(ctx, z, x_check=False).value
    else:
        f, w, s = ctx, kw.pop("omega", None), kw.pop("s", None)
    if w is not None and rect.re0 <= 0:
        for c in _cut_lines(w, s):
            if rect.im0 < c < rect.im1:
                raise ValueError(f"rectangle crosses the branch cut Im lambda = {c}")
            if abs(rect.im0 - c) < 1e-6:
                rect = Rectangle(rect.re0, rect.re1, c + 1e-6, rect.im1)
            if abs(rect.im1 - c) < 1e-6:
                rect = Rectangle(rect.re0, rect.re1, rect.im0, c - 1e-6)
    return find_zeros(f, rect, tol=tol, n=n, threads=threads, **kw)


# ---------------------------------------------------------------- classification

class PointKind(str, Enum):
    EIGENVALUE = "eigenvalue"
    RESONANCE_POLE = "resonance_pole"
    REGULAR = "regular"


@dataclass(frozen=True)
class PointClass:
    kind: PointKind
    lam: complex
    boundary_case: bool = False
    nondecaying_weight: float = 0.0
    detail: str = ""


def _null_weight(ctx: CoefficientMatrix, lam: complex, nu: np.ndarray) -> float:
    """Share of the null combination carried by non-decaying Jost columns."""
    fr = _frames(ctx, lam, nu, (0.0,))
    M = np.concatenate([fr.W_minus[0.0], fr.W_plus[0.0]], axis=1)
    M = M / np.linalg.norm(M, axis=0)
    _, _, vh = np.linalg.svd(M)
    d = vh[-1].conj()
    decaying = np.concatenate([nu[fr.order].real > 1e-12] * 2)
    return float(np.linalg.norm(d[~decaying]) / np.linalg.norm(d))


def classify_point(ctx: CoefficientMatrix, lam0: complex, branch_point: str | None = None,
                   gam: complex | None = None, zero_tol: float = 1e-6, decay_tol: float = 1e-6) -> PointClass:
    """eigenvalue / resonance_pole / regular for a candidate point.

    A zero of E in Omega is an eigenvalue. Otherwise the null Jost
    combination decides: an eigenfunction may only use decaying columns.
    Given (branch_point, gamma) the sheet rule on arg gamma is used instead.
    """
    lam0 = complex(lam0)
    w, s = ctx.omega, ctx.s
    if gam is not None:
        lam0, nu = _extended_nu(gam, branch_point, w, s)
    else:
        nu = nu_values(lam0, w, s)
    ring = [lam0 + 1e-3 * cmath.exp(2j * math.pi * k / 8) for k in range(8)]
    if gam is None:
        E0 = abs(evans_eval(ctx, lam0, x_check=False).value)
        ref = np.mean([abs(evans_eval(ctx, z, x_check=False).value) for z in ring
                       if not on_branch_cut(z, w, s)])
    else:
        E0 = abs(extended_evans(ctx, gam, branch_point, check=False).value)
        gring = [gam + 1e-3 * cmath.exp(2j * math.pi * k / 8) for k in range(8)]
        ref = np.mean([abs(extended_evans(ctx, g, branch_point, check=False).value) for g in gring])
    if E0 > zero_tol * ref:
        return PointClass(PointKind.REGULAR, lam0, detail=f"|E|/|E_ring| = {E0 / ref:.2e}")
    if gam is not None and abs(gam) >= 1e-9:
        a = cmath.phase(gam)
        sheet = -math.pi / 4 < a < 3 * math.pi / 4
        if sheet and in_omega(lam0, w, s):
            return PointClass(PointKind.EIGENVALUE, lam0, detail="first sheet, inside Omega")
        if not sheet:
            return PointClass(PointKind.RESONANCE_POLE, lam0, detail="second sheet")
    if gam is None and in_omega(lam0, w, s):
        return PointClass(PointKind.EIGENVALUE, lam0, detail="zero inside Omega")
    weight = _null_weight(ctx, lam0, nu)
    boundary = gam is not None and abs(gam) < 1e-9 or any(abs(nu.real) < 1e-12) and \
        any(abs(lam0 - b) < 1e-9 for b in branch_points(w, s).values())
    kind = PointKind.EIGENVALUE if weight < decay_tol else PointKind.RESONANCE_POLE
    return PointClass(kind, lam0, boundary, weight,
                      "null solution uses non-decaying Jost columns" if kind is PointKind.RESONANCE_POLE
                      else "null solution decays at both ends")
