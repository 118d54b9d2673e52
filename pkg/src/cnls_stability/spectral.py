"""Stability verdicts: Sturm counts, Krein index, embedded-eigenvalue cases.

The bifurcated-wave material assumes the cubic model with omega = 1, the
same normalization as the melnikov module.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.integrate import quad, quad_vec, simpson
from scipy.linalg import eigvals_banded
from scipy.special import expit

from . import evans as ev
from .model import (ModelParams, WaveProfile, beta1_critical, default_half_length, fundamental_profile,
                    nonlinearity_derivs, uniform_grid)
from .specfun import gamma, hyp2f1, pochhammer, rgamma, sech_fourier


class Case(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"


class Outcome(str, Enum):
    VANISHES = "vanishes"
    UNSTABLE_PAIR = "becomes_unstable_pair"
    STAYS_IMAGINARY = "stays_imaginary"
    ENDPOINT_DETACH = "endpoint_detach"
    UNDETERMINED = "undetermined"


class Verdict(str, Enum):
    ORBITALLY_STABLE = "orbitally_stable"
    ORBITALLY_UNSTABLE = "orbitally_unstable"
    SPECTRALLY_UNSTABLE = "spectrally_unstable"
    UNDETERMINED = "undetermined_by_index"


# ---------------------------------------------------------------- Sturm counts

_STENCILS = {2: (2.0, -1.0), 4: (30 / 12, -16 / 12, 1 / 12), 6: (490 / 180, -270 / 180, 27 / 180, -2 / 180)}


@dataclass(frozen=True)
class SchrodingerBlock:
    """The operator -d^2/dx^2 + Q(x) with Q real symmetric m x m, Dirichlet at the grid ends."""
    x: np.ndarray
    Q: np.ndarray  # shape (n, m, m)
    name: str = ""

    @property
    def m(self) -> int:
        return self.Q.shape[1]

    @classmethod
    def scalar(cls, x, q, name: str = "") -> "SchrodingerBlock":
        q = np.asarray(q, float)
        return cls(np.asarray(x, float), q[:, None, None], name)

    def coarsened(self) -> "SchrodingerBlock":
        return SchrodingerBlock(self.x[::2], self.Q[::2], self.name)


def l_minus(profile: WaveProfile, params: ModelParams) -> SchrodingerBlock:
    d = nonlinearity_derivs(profile.U**2, profile.V**2, params)
    n = profile.x.size
    Q = np.zeros((n, 2, 2))
    Q[:, 0, 0] = params.omega - d.d1
    Q[:, 1, 1] = params.s - d.d2
    return SchrodingerBlock(profile.x, Q, "L-")


def l_plus(profile: WaveProfile, params: ModelParams) -> SchrodingerBlock:
    U, V = profile.U, profile.V
    d = nonlinearity_derivs(U**2, V**2, params)
    Q = l_minus(profile, params).Q.copy()
    Q[:, 0, 0] -= 2 * d.d11 * U**2
    Q[:, 1, 1] -= 2 * d.d22 * V**2
    Q[:, 0, 1] -= 2 * d.d12 * U * V
    Q[:, 1, 0] = Q[:, 0, 1]
    return SchrodingerBlock(profile.x, Q, "L+")


def _banded(block: SchrodingerBlock, order: int) -> np.ndarray:
    x, Q = block.x[1:-1], block.Q[1:-1]
    h = float(block.x[1] - block.x[0])
    m = block.m
    n = x.size
    N = n * m
    coef = np.array(_STENCILS[order]) / h**2
    band = np.zeros((len(coef) * m, N))
    for i in range(m):
        for j in range(i + 1):
            band[i - j, j::m][:n] += Q[:, i, j]
    for c in range(m):
        band[0, c::m] += coef[0]
        for k in range(1, len(coef)):
            band[k * m, c::m][: n - k] = coef[k]
    return band


def _small_spectrum(block: SchrodingerBlock, order: int, upper: float) -> np.ndarray:
    band = _banded(block, order)
    lo = -(float(np.max(np.abs(block.Q))) + 1.0) * block.m
    return eigvals_banded(band, lower=True, select="v", select_range=(lo, upper))


@dataclass(frozen=True)
class SturmCount:
    negative: int
    zero_modes: int
    boundary_case: bool
    certified: bool
    eigenvalues: tuple

    def __int__(self) -> int:
        return self.negative


def sturm_negative_count(block: SchrodingerBlock, order: int = 6, zero_tol: float = 1e-8,
                         check_doubling: bool = True) -> SturmCount:
    """Negative eigenvalues of a finite-difference discretization, by banded inertia.

    Eigenvalues with |lambda| <= zero_tol are reported as zero modes (the
    symmetry kernel). The count is certified when it agrees on the grid with
    twice the spacing; a near-zero eigenvalue that is not resolved on both
    grids sets boundary_case.
    """
    fine = _small_spectrum(block, order, 1e-3)
    neg = int(np.count_nonzero(fine < -zero_tol))
    zero = int(np.count_nonzero(np.abs(fine) <= zero_tol))
    certified = True
    boundary = False
    if check_doubling:
        coarse = _small_spectrum(block.coarsened(), order, 1e-3)
        tol_c = max(zero_tol, 2.0 ** order * zero_tol)
        neg_c = int(np.count_nonzero(coarse < -tol_c))
        certified = neg_c == neg
        near = fine[np.abs(fine) < 1e-6]
        boundary = bool(np.any(np.abs(near) > zero_tol))
    return SturmCount(neg, zero, boundary, certified, tuple(float(v) for v in fine[fine < 1e-6]))


# ---------------------------------------------------------------- D matrix and Krein index

def d_matrix_fundamental(params: ModelParams) -> np.ndarray:
    """diag(|U0|^2/2, -d/domega |U0|^2) for the cubic fundamental wave."""
    if not params.is_cubic:
        raise ValueError("closed D is available for the cubic model only")
    w = params.omega
    return np.diag([2 * math.sqrt(w), -2 / math.sqrt(w)])


def d_matrix_bifurcated(s: float, ell: int, beta2: float, x: np.ndarray | None = None) -> np.ndarray:
    """Leading-order 3x3 D along the branch born at the ell-th pitchfork (omega = 1)."""
    from .melnikov import melnikov_b2, u2_profile, v1_profile

    if x is None:
        x = uniform_grid(default_half_length(1.0, s))
    b2 = melnikov_b2(s, ell, beta2)
    U0 = math.sqrt(2.0) / np.cosh(x)
    U2 = u2_profile(s, ell, x)
    V1 = v1_profile(s, ell, x)
    u0u2 = simpson(U0 * U2, x=x)
    v1n = simpson(V1**2, x=x)
    D = np.zeros((3, 3))
    D[0, 0] = simpson(U0**2, x=x) / 2
    D[1, 1] = -2.0 + 4 * u0u2**2 / b2
    D[1, 2] = D[2, 1] = 2 * u0u2 * v1n / b2
    D[2, 2] = v1n**2 / b2
    return D


def d_matrix_numeric(profile: WaveProfile, params: ModelParams, h: float = 1e-3, **solve_kw) -> np.ndarray:
    """D from finite differences of |U|^2, |V|^2 over (omega, s) along the family.

    Uses the cubic scaling U(x; omega, s) = sqrt(omega) U(sqrt(omega) x; 1, s/omega)
    so only re-solves in s at omega = 1 are needed.
    """
    from .continuation import solve_homoclinic

    if not params.is_cubic or params.omega != 1.0:
        raise ValueError("numeric D is implemented for the cubic model at omega = 1")
    nu, nv = profile.l2_norms()
    nu, nv = nu**2, nv**2
    norms = {}
    for ds in (-h, h):
        p = params.with_(s=params.s + ds)
        pr = solve_homoclinic(p, profile, **solve_kw)
        a, b = pr.l2_norms()
        norms[ds] = (a * a, b * b)
    dNu = (norms[h][0] - norms[-h][0]) / (2 * h)
    dNv = (norms[h][1] - norms[-h][1]) / (2 * h)
    s = params.s
    # d/domega [sqrt(omega) N(s/omega)] at omega = 1
    D = np.zeros((3, 3))
    D[0, 0] = (nu + nv) / 2
    D[1, 1] = -(nu / 2 - s * dNu)
    D[1, 2] = -(nv / 2 - s * dNv)
    D[2, 1] = -dNu
    D[2, 2] = -dNv
    return D


def d_matrix(family: str, params: ModelParams, eps: float = 0.0, ell: int | None = None) -> np.ndarray:
    if family == "fundamental":
        return d_matrix_fundamental(params)
    if family == "bifurcated":
        if ell is None:
            raise ValueError("the bifurcated family needs ell")
        return d_matrix_bifurcated(params.s, ell, params.beta2)
    raise ValueError("family must be 'fundamental' or 'bifurcated'")


@dataclass(frozen=True)
class KreinReport:
    n_L_minus: int
    n_L_plus: int
    n_D: int
    D: list
    K_Ham: int
    k_r: int
    k_c: int
    k_i_minus: int
    verdict: Verdict
    d_singular: bool = False
    boundary_case: bool = False
    notes: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d


def krein_index(n_L_minus: int, n_L_plus: int, D: np.ndarray, k_r: int = 0, k_c: int = 0,
                boundary_case: bool = False) -> KreinReport:
    """K_Ham = n(L-) + n(L+) - n(D), split as k_r + 2 k_c + 2 k_i^-.

    k_r and k_c come from an eigenvalue inventory when one is available; the
    remainder is attributed to negative-signature imaginary eigenvalues.
    """
    D = np.asarray(D, float)
    w = np.linalg.eigvalsh((D + D.T) / 2)
    singular = abs(float(np.linalg.det(D))) < 1e-10
    n_D = int(np.count_nonzero(w < 0))
    K = int(n_L_minus) + int(n_L_plus) - n_D
    notes = []
    rest = K - k_r - 2 * k_c
    if rest < 0 or rest % 2:
        notes.append(f"inventory (k_r={k_r}, k_c={k_c}) inconsistent with K_Ham={K}")
        k_i = max(rest, 0) // 2
    else:
        k_i = rest // 2
    if singular:
        verdict = Verdict.UNDETERMINED
        notes.append("D is singular; the index theorem does not apply")
    elif K == 0:
        verdict = Verdict.ORBITALLY_STABLE
    elif K % 2:
        verdict = Verdict.ORBITALLY_UNSTABLE
    else:
        verdict = Verdict.UNDETERMINED
    if k_r + k_c > 0 and verdict is not Verdict.ORBITALLY_UNSTABLE:
        verdict = Verdict.SPECTRALLY_UNSTABLE
    return KreinReport(int(n_L_minus), int(n_L_plus), n_D, D.tolist(), K, k_r, k_c, k_i, verdict,
                       singular, boundary_case, tuple(notes))


# ---------------------------------------------------------------- I^ell integrals

def _hyp_terminating(n: int, b: complex, c: complex, z: np.ndarray) -> np.ndarray:
    """2F1(-n, b; c; z) as a polynomial, vectorized in z."""
    out = np.ones_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    for m in range(n):
        term = term * (-n + m) * (b + m) / ((c + m) * (m + 1)) * z
        out = out + term
    return out


def _hyp_vec(a: complex, b: complex, c: complex, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = -a.real
    if abs(a.imag) < 1e-14 and n > -1e-12 and abs(n - round(n)) < 1e-12:
        return _hyp_terminating(int(round(n)), b, c, z)
    return np.array([hyp2f1(a, b, c, float(zz), float(ww))
                     for zz, ww in zip(np.atleast_1d(z), np.atleast_1d(w))])


def i_ell_integrand(ell: int, mu: complex, nu: complex, s: float, x):
    from .melnikov import v1_profile

    x = np.atleast_1d(np.asarray(x, float))
    r = math.sqrt(s)
    t = np.tanh(x)
    sech = 1.0 / np.cosh(x)
    F = _hyp_vec(complex(mu - r - ell), complex(mu + r + ell + 1), complex(mu + 1), expit(2 * x), expit(-2 * x))
    return np.exp(nu * x) * v1_profile(s, ell, x) * ((nu - t) ** 2 - sech**2) * sech ** (mu + 1) * F


def i_ell_integral(ell: int, mu: complex, nu: complex, s: float, half_length: float = 40.0,
                   tol: float = 1e-10) -> complex:
    """Oscillatory-decaying integral of V1 against the Jost product, on [-L, L] adaptively."""
    mu, nu = complex(mu), complex(nu)

    def f(x):
        v = i_ell_integrand(ell, mu, nu, s, x)[0]
        return np.array([v.real, v.imag])

    val, err = quad_vec(f, -half_length, half_length, epsabs=tol * 1e-2, epsrel=1e-13, limit=2000)
    if err > tol:
        raise RuntimeError(f"I^ell quadrature error estimate {err:.2e} exceeds {tol:.2e}")
    return complex(val[0], val[1])


def lambda0(s: float, k: int) -> complex:
    """Zero of the V-block factor with nu4 = sqrt(s) + k (omega = 1, beta1 at a pitchfork)."""
    return -1j * k * (2 * math.sqrt(s) + k)


def _k_range(s: float, ell: int) -> range:
    return range(-int(math.floor(math.sqrt(s) + 1e-12)), ell + 1)


def i_ell_closed_negative_k(s: float, k: int) -> complex:
    """Closed I^0(nu4, nu2) at lambda0(k), k = -floor(sqrt s) .. -1."""
    r = math.sqrt(s)
    if not (-math.floor(r + 1e-12) <= k <= -1):
        raise ValueError("k must lie in -floor(sqrt s) .. -1")
    m = -k * (2 * r + k)
    nu = math.sqrt(m - 1)
    K = sech_fourier(2 * r + k + 1, nu)
    den = pochhammer(r + k + 1, -k).real
    if k % 2 == 0:
        prod = math.prod((j + 0.5) ** 2 + nu * nu / 4 for j in range(-k // 2))
        return (-1) ** (-k // 2) * k * (2 * r + k) / den * prod * K
    prod = math.prod(j * j + nu * nu / 4 for j in range(1, (-k - 1) // 2 + 1))
    sign = (-1) ** ((-(k - 1)) // 2)
    return 1j * nu / 2 * sign * k * (2 * r + k) / den * prod * K


def i_ell_closed_top(s: float, ell: int) -> complex:
    """Closed I^ell(nu4, nu1) at lambda0(ell), ell >= 1."""
    if ell < 1:
        raise ValueError("ell must be positive")
    r = math.sqrt(s)
    nu = math.sqrt(ell * (2 * r + ell) - 1)
    K = sech_fourier(2 * r + ell + 1, nu)
    den = pochhammer(r + 1, ell).real
    if ell % 2 == 0:
        prod = math.prod((j + 0.5) ** 2 + nu * nu / 4 for j in range(ell // 2))
        return (-1) ** (ell // 2 + 1) * ell * (2 * r + ell) / den * prod * K
    prod = math.prod(j * j + nu * nu / 4 for j in range(1, (ell - 1) // 2 + 1))
    # nu1(lambda0) = -i nu here, so the odd part picks up (-1)^((ell-1)/2)
    return 1j * nu / 2 * (-1) ** ((ell - 1) // 2) * ell * (2 * r + ell) / den * prod * K


def i_ell_closed_endpoint(s: float) -> complex:
    """Closed I^0(nu4(i), nu2(i)) for 0 < s < 1."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    r = math.sqrt(s)
    nu = math.sqrt(1 - s)
    num = gamma(1 + 1j * nu) * gamma((r + 1 + 1j * nu) / 2) * gamma((r + 1 - 1j * nu) / 2)
    return -math.sqrt(math.pi) * num * rgamma(r + 1) * rgamma((r + 2 + 1j * nu) / 2) * rgamma((-r + 1 + 1j * nu) / 2)


def i_two_closed_km2(s: float) -> float:
    """Closed I^2(nu4, nu2) at lambda0(-2); vanishes at sqrt(s) = 3."""
    r = math.sqrt(s)
    if r < 2:
        raise ValueError("k = -2 needs s >= 4")
    pre = -4 * (r - 1) * (r - 3) / (s * (r + 2) * (r + 3) * (2 * r - 1))
    return pre * sech_fourier(2 * r - 1, math.sqrt(4 * r - 5))


# ---------------------------------------------------------------- Jost data at lambda0

def _p4_at_zero(s: float, ell: int, k: int, x: np.ndarray) -> np.ndarray:
    """p4(x, lambda0(k)) from the terminating hypergeometric form (real)."""
    r = math.sqrt(s)
    nu = r + k
    chi = r + ell
    z = (1 + np.tanh(x)) / 2
    F = _hyp_terminating(ell - k, nu + chi + 1, nu + 1, z).real
    return (1 / (2 * np.cosh(x))) ** nu * F


def p4_norm2(s: float, ell: int, k: int, half_length: float = 40.0) -> float:
    val, _ = quad(lambda y: float(_p4_at_zero(s, ell, k, np.array([y]))[0]) ** 2,
                  -half_length, half_length, epsabs=1e-14, epsrel=1e-12, limit=500)
    return val


def p4_parity(s: float, ell: int, k: int) -> int:
    """tau with p4(x) = tau p4(-x) at lambda0(k)."""
    xs = np.array([0.37, -0.37])
    a, b = _p4_at_zero(s, ell, k, xs)
    return 1 if a * b > 0 else -1


def _bilinear(pa, dpa, pb, dpb) -> complex:
    """Y_a . Z_b = sum (p_a' p_b - p_a p_b') for componentwise (value, derivative)."""
    return complex(np.sum(np.asarray(dpa) * np.asarray(pb) - np.asarray(pa) * np.asarray(dpb)))


@dataclass(frozen=True)
class PairingConstants:
    C1: complex
    C2: complex
    C3: complex
    C4: complex
    C5: complex | None
    tau: int | None
    nu: tuple

    @property
    def a4_1(self) -> bool:
        return abs(self.C1) > 1e-12

    @property
    def a4_2(self) -> bool:
        return abs(self.C2) > 1e-12


def pairing_constants(lam0: complex, params: ModelParams) -> PairingConstants:
    """C1..C5 and tau at lam0 from the closed-form cubic Jost solutions.

    The growing solutions at the far end are taken in the closed-form gauge,
    where for the U-block they are multiples of the decaying-side ones; this
    makes C3 and C4 vanish. C5 is only defined where nu4 is imaginary
    (lam0 = i omega with s < omega) and is None otherwise.
    """
    if not params.is_cubic:
        raise ValueError("closed-form pairings need the cubic model")
    lam0 = complex(lam0)
    w, s = params.omega, params.s
    if ev.on_branch_cut(lam0, w, s) and not any(abs(lam0 - b) < 1e-14 for b in ev.branch_points(w, s).values()):
        raise ValueError("lambda0 lies on a branch cut")
    nu = ev.nu_values(lam0, w, s)
    J = ev.jost_closed(lam0, params, np.array([0.0]), nu)

    def block(j):
        p, q = J[f"p{j}"][0], J[f"q{j}"][0]
        dp, dq = J[f"p{j}d"][0], J[f"q{j}d"][0]
        return (p, q), (dp, dq)

    (v1, d1), (v2, d2) = block(1), block(2)
    # partner at +inf obtained by x -> -x: value kept, derivative flips sign
    C1 = _bilinear(v1, d1, v1, tuple(-d for d in d1))
    C2 = _bilinear(v2, d2, v2, tuple(-d for d in d2))
    g1 = (nu[0] / math.sqrt(w) + 1) ** 2 / (nu[0] / math.sqrt(w) - 1) ** 2
    g2 = (nu[1] / math.sqrt(w) + 1) ** 2 / (nu[1] / math.sqrt(w) - 1) ** 2
    C4 = _bilinear(v1, d1, tuple(g1 * v for v in v1), tuple(g1 * d for d in d1))
    C3 = _bilinear(v2, d2, tuple(g2 * v for v in v2), tuple(g2 * d for d in d2))
    C5 = None
    if abs(nu[3].real) < 1e-12 * max(1.0, abs(nu[3])):
        # the +inf partner is the conjugate of the -inf one when nu4 is imaginary
        C5 = 2 * (J["p4"][0] * np.conj(J["p4d"][0])).real
    tau = None
    Jx = ev.jost_closed(lam0, params, np.array([0.37, -0.37]), nu)
    a, b = Jx["p4"]
    if abs(a) > 0 and abs(abs(a / b) - 1) < 1e-8:
        tau = 1 if (a / b).real > 0 else -1
    return PairingConstants(C1, C2, C3, C4, C5, tau, tuple(complex(z) for z in nu))


# ---------------------------------------------------------------- case classification

@dataclass(frozen=True)
class CaseRecord:
    lam0: complex
    case: Case
    s: float
    ell: int
    beta2: float
    k: int | None = None
    simple: bool = True
    collision: tuple | None = None
    tau: int | None = None
    flags: dict = field(default_factory=dict)
    notes: tuple = ()


def _collision_partners(s: float, ell: int, k: int, tol: float = 1e-9) -> list[int]:
    r = math.sqrt(s)
    out = []
    for kp in _k_range(s, ell):
        if kp == k or k + kp == 0:
            continue
        cand = Fraction(-(k * k + kp * kp), 2 * (k + kp))
        if abs(float(cand) - r) <= tol:
            out.append(kp)
    return out


def classify_case(lam0: complex, s: float, ell: int, beta2: float = 0.0, omega: float = 1.0,
                  tol: float = 1e-9) -> CaseRecord:
    """Which of the six embedded/isolated situations lam0 falls in (cubic, beta1 at the ell-th pitchfork)."""
    if omega != 1.0:
        raise ValueError("case analysis is implemented for omega = 1")
    lam0 = complex(lam0)
    if abs(lam0.real) > tol:
        raise ValueError("lambda0 must be purely imaginary")
    y = lam0.imag
    r = math.sqrt(s)
    m = min(omega, s)
    notes = []
    k = None
    for kk in _k_range(s, ell):
        if abs(y - lambda0(s, kk).imag) <= tol:
            k = kk
    if abs(abs(y) - m) <= tol:
        case = Case.II
    elif abs(y) < m:
        case = Case.I
    elif k is not None and omega < s and abs(y - s) <= tol:
        case = Case.V
    elif abs(abs(y) - omega) <= tol and s < omega:
        case = Case.VI
    elif k is not None and omega < y < s:
        case = Case.III
    elif k is not None and y < -m:
        case = Case.IV
    else:
        raise ValueError(f"lambda0={lam0} is not a zero of the unperturbed Evans function")
    simple = True
    collision = None
    if k is not None and k != 0:
        partners = _collision_partners(s, ell, k, tol)
        if partners:
            simple = False
            collision = (k, partners[0])
            notes.append(f"lambda0(k={k}) = -lambda0(k'={partners[0]})")
        if k == -1 and abs(s - 1) <= tol:
            simple = False
            collision = (k, None)
            notes.append("lambda0 = i coincides with the resonance pole of the U-block factor")
    params = ModelParams(omega, s, beta1_critical(s, ell, omega), beta2)
    flags = {}
    tau = None
    if k is not None and case in (Case.III, Case.IV):
        pc = pairing_constants(lam0, params)
        tau = p4_parity(s, ell, k)
        flags["A4-1"] = pc.a4_1
        flags["A4-2"] = pc.a4_2
        nu = ev.nu_values(lam0, omega, s)
        mu = r + k
        if case is Case.III:
            flags["A5-1"] = abs(i_ell_integral(ell, mu, nu[1], s)) > 1e-10
        else:
            flags["A5-2"] = abs(i_ell_integral(ell, mu, nu[0], s)) > 1e-10
    elif case is Case.V:
        tau = p4_parity(s, ell, k)
    return CaseRecord(lam0, case, s, ell, beta2, k, simple, collision, tau, flags, tuple(notes))


# ---------------------------------------------------------------- perturbation predictions

@dataclass(frozen=True)
class PerturbationData:
    lam0: complex
    case: Case
    tau: int | None
    constants: PairingConstants | None
    I_plus: complex | None
    I_minus: complex | None
    I_ell: complex | None
    p4_norm: float | None
    re_coeff: float | None
    outcome: Outcome
    reason: str = ""

    def predict(self, eps: float) -> complex | None:
        """lambda(eps) to leading order; None when no eigenvalue is predicted."""
        if self.outcome in (Outcome.UNSTABLE_PAIR,):
            return complex(self.re_coeff * eps * eps, self.lam0.imag)
        if self.outcome in (Outcome.STAYS_IMAGINARY, Outcome.ENDPOINT_DETACH):
            return complex(0.0, self.lam0.imag)
        return None


def perturbation_data(record: CaseRecord) -> PerturbationData:
    """Leading-order eps^2 behaviour of the zero at record.lam0."""
    lam0, case = record.lam0, record.case
    s, ell = record.s, record.ell
    if case is Case.I:
        return PerturbationData(lam0, case, None, None, None, None, None, None, 0.0, Outcome.STAYS_IMAGINARY,
                                "simple isolated imaginary eigenvalue persists on the axis")
    if case is Case.II:
        return PerturbationData(lam0, case, None, None, None, None, None, None, 0.0, Outcome.ENDPOINT_DETACH,
                                "endpoint zero stays on the imaginary axis")
    if case in (Case.V, Case.VI):
        return PerturbationData(lam0, case, record.tau, None, None, None, None, None, None, Outcome.VANISHES,
                                "resonance pole at a branch point")
    if not record.simple:
        return PerturbationData(lam0, case, record.tau, None, None, None, None, None, None, Outcome.UNDETERMINED,
                                "lambda0 is not a simple zero: " + "; ".join(record.notes))
    params = ModelParams(1.0, s, beta1_critical(s, ell), record.beta2)
    pc = pairing_constants(lam0, params)
    nu = ev.nu_values(lam0, 1.0, s)
    mu = math.sqrt(s) + record.k
    pn = p4_norm2(s, ell, record.k)
    pre = 2 ** (-mu + 0.5) * params.beta1
    if case is Case.III:
        I = i_ell_integral(ell, mu, nu[1], s)
        Ip = pre / (nu[1] + 1) ** 2 * I
        if abs(I) <= 1e-10:
            return PerturbationData(lam0, case, record.tau, pc, Ip, None, I, pn, None, Outcome.UNDETERMINED,
                                    "nondegeneracy A5-1 fails (I^ell = 0)")
        coeff = -(abs(Ip) ** 2 - (pc.C3 / pc.C2 * Ip**2).real) / (2 * pn * nu[1].imag)
        return PerturbationData(lam0, case, record.tau, pc, Ip, None, I, pn, float(coeff), Outcome.VANISHES,
                                "positive-signature embedded eigenvalue leaves as a resonance")
    I = i_ell_integral(ell, mu, nu[0], s)
    Im_ = pre / (nu[0] + 1) ** 2 * I
    if abs(I) <= 1e-10:
        return PerturbationData(lam0, case, record.tau, pc, None, Im_, I, pn, None, Outcome.UNDETERMINED,
                                "nondegeneracy A5-2 fails (I^ell = 0)")
    coeff = (abs(Im_) ** 2 - (pc.C4 / pc.C1 * Im_**2).real) / (-2 * pn * nu[0].imag)
    return PerturbationData(lam0, case, record.tau, pc, None, Im_, I, pn, float(coeff), Outcome.UNSTABLE_PAIR,
                            "negative-signature embedded eigenvalue splits off the axis")


def perturbed_eigenvalue(record: CaseRecord, eps: float) -> tuple[complex | None, Outcome, PerturbationData]:
    data = perturbation_data(record)
    return data.predict(eps), data.outcome, data


def coupling_integral_direct(s: float, ell: int, k: int, side: str = "-", beta2: float = 0.0,
                             half_length: float = 40.0) -> complex:
    """int a(x)(p_j + q_j) p4 dx with a = beta1 U0 V1, straight from the Jost solutions.

    side "-" uses the nu1 pair (p1, q1), side "+" the nu2 pair (p2, q2).
    """
    if side not in ("-", "+"):
        raise ValueError("side must be '-' or '+'")
    j = 1 if side == "-" else 2
    from .melnikov import v1_profile

    lam0_ = lambda0(s, k)
    params = ModelParams(1.0, s, beta1_critical(s, ell), beta2)

    def f(y):
        x = np.array([y])
        J = ev.jost_closed(lam0_, params, x)
        a = params.beta1 * math.sqrt(2) / np.cosh(x) * v1_profile(s, ell, x)
        v = (a * (J[f"p{j}"] + J[f"q{j}"]) * _p4_at_zero(s, ell, k, x))[0]
        return np.array([v.real, v.imag])

    val, _ = quad_vec(f, -half_length, half_length, epsabs=1e-13, epsrel=1e-12, limit=2000)
    return complex(val[0], val[1])


# ---------------------------------------------------------------- reports

def bifurcated_profile(s: float, ell: int, beta2: float, eps: float, x: np.ndarray | None = None):
    """Solve for the branch point at beta1 = beta1_ell + mu_bar eps^2 from the expansion guess."""
    from .continuation import solve_homoclinic
    from .melnikov import approximate_branch

    if x is None:
        x = uniform_grid(default_half_length(1.0, s))
    mu, guess = approximate_branch(s, ell, beta2, eps, x)
    params = ModelParams(1.0, s, beta1_critical(s, ell) + mu, beta2)
    return solve_homoclinic(params, guess), params


def candidate_points(s: float, ell: int, omega: float = 1.0) -> list[complex]:
    """Zeros of the unperturbed V-block factor other than the origin, with their mirrors."""
    pts = []
    for k in _k_range(s, ell):
        if k == 0:
            continue
        z = lambda0(s, k)
        pts.extend([z, -z])
    m = min(omega, s)
    pts.extend([1j * m, -1j * m])
    out = []
    for z in pts:
        if all(abs(z - w) > 1e-9 for w in out):
            out.append(z)
    return sorted(out, key=lambda z: z.imag)


def search_boxes(points, half_height: float = 0.3, re_min: float = 1e-6, re_max: float = 0.3) -> list:
    return [ev.Rectangle(re_min, re_max, z.imag - half_height, z.imag + half_height) for z in points]


@dataclass
class StabilityReport:
    family: str
    params: dict
    eps: float
    ell: int | None
    krein: KreinReport
    sturm: dict
    zeros: list
    predictions: list
    verdict: Verdict
    spectrally_stable: bool | None
    cross_checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "family": self.family, "params": self.params, "eps": self.eps, "ell": self.ell,
            "krein": self.krein.to_dict(), "sturm": self.sturm,
            "zeros": [{"re": z.real, "im": z.imag, "multiplicity": m, "kind": kind} for z, m, kind in self.zeros],
            "predictions": self.predictions, "verdict": self.verdict.value,
            "spectrally_stable": self.spectrally_stable, "cross_checks": self.cross_checks,
            "errors": self.errors,
        }

    def summary(self) -> str:
        lines = [f"{self.family} wave, eps={self.eps:g}, ell={self.ell}",
                 f"n(L-)={self.krein.n_L_minus} n(L+)={self.krein.n_L_plus} n(D)={self.krein.n_D} "
                 f"K_Ham={self.krein.K_Ham} (k_r={self.krein.k_r}, k_c={self.krein.k_c}, "
                 f"k_i-={self.krein.k_i_minus})"]
        for z, m, kind in self.zeros:
            lines.append(f"  zero {z.real:+.6e} {z.imag:+.6f}i  x{m}  {kind}")
        for c in self.cross_checks:
            lines.append(f"  lambda0={c['lam0']}: predicted Re={c['predicted_re']:.4e} found Re={c['found_re']:.4e}")
        for e in self.errors:
            lines.append(f"  error: {e}")
        lines.append(f"verdict: {self.verdict.value}")
        return "\n".join(lines)


def _inventory(ctx: ev.CoefficientMatrix, boxes, threads: int | None, errors: list) -> list:
    def run(box):
        try:
            return [(z, m) for z, m in ev.locate_zeros(ctx, box, threads=1)]
        except Exception as exc:  # attached to the report, never dropped
            errors.append(f"zero search in {box}: {exc}")
            return []

    found = []
    for res in ev.parallel_map(run, boxes, threads):
        for z, m in res:
            if all(abs(z - w) > 1e-7 for w, _, _ in found):
                found.append((z, m, ev.classify_point(ctx, z).kind.value))
    return sorted(found, key=lambda t: t[0].imag)


def _count_quadrant(zeros, re_tol: float = 1e-6) -> tuple[int, int]:
    k_r = sum(m for z, m, kind in zeros if z.real > re_tol and abs(z.imag) <= re_tol and kind == "eigenvalue")
    k_c = sum(m for z, m, kind in zeros if z.real > re_tol and z.imag > re_tol and kind == "eigenvalue")
    return k_r, k_c


def stability_report(s: float, beta2: float, ell: int | None = None, eps: float = 0.0, beta1: float | None = None,
                     omega: float = 1.0, boxes: list | None = None, search: bool = True,
                     threads: int | None = None) -> StabilityReport:
    """Krein counts, Evans zero inventory and eps^2 predictions in one verdict.

    ell=None (or eps=0) selects the fundamental wave at the given beta1; otherwise
    the bifurcated wave on the branch born at the ell-th pitchfork.
    """
    errors: list = []
    if ell is None or eps == 0.0:
        if beta1 is None:
            raise ValueError("the fundamental wave needs beta1")
        params = ModelParams(omega, s, beta1, beta2)
        prof = fundamental_profile(params)
        ctx = ev.CoefficientMatrix.fundamental(params)
        D = d_matrix_fundamental(params)
        family = "fundamental"
        preds = []
        if boxes is None:
            boxes = [ev.Rectangle(1e-3, 1.0, -20.0, 20.0)]
    else:
        if omega != 1.0:
            raise ValueError("bifurcated waves are handled at omega = 1")
        prof, params = bifurcated_profile(s, ell, beta2, eps)
        ctx = ev.CoefficientMatrix.from_profile(prof, params)
        D = d_matrix_bifurcated(s, ell, beta2)
        family = "bifurcated"
        cands = candidate_points(s, ell, omega)
        base = [lambda0(s, k) for k in _k_range(s, ell) if k != 0] + [1j * min(omega, s), -1j * min(omega, s)]
        records = []
        for z in base:
            try:
                records.append(classify_case(z, s, ell, beta2, omega))
            except Exception as exc:
                errors.append(f"case analysis at {z}: {exc}")

        def pred(rec):
            try:
                return perturbation_data(rec)
            except Exception as exc:
                errors.append(f"prediction at {rec.lam0}: {exc}")
                return None

        pdata = [p for p in ev.parallel_map(pred, records, threads) if p is not None]
        preds = [{"lam0": [p.lam0.real, p.lam0.imag], "case": p.case.value, "outcome": p.outcome.value,
                  "re_coeff": p.re_coeff, "predicted": None if p.predict(eps) is None
                  else [p.predict(eps).real, p.predict(eps).imag], "reason": p.reason} for p in pdata]
        if boxes is None:
            boxes = search_boxes(cands)
    sturm = {}
    try:
        sm = sturm_negative_count(l_minus(prof, params))
        sp = sturm_negative_count(l_plus(prof, params))
        sturm = {"L-": asdict(sm), "L+": asdict(sp)}
        boundary = sm.boundary_case or sp.boundary_case or not (sm.certified and sp.certified)
    except Exception as exc:
        errors.append(f"Sturm count: {exc}")
        sm = sp = None
        boundary = True
    zeros = _inventory(ctx, boxes, threads, errors) if search else []
    k_r, k_c = _count_quadrant(zeros)
    krein = krein_index(sm.negative if sm else 0, sp.negative if sp else 0, D, k_r, k_c, boundary)
    cross = []
    if family == "bifurcated":
        for p in preds:
            if p["outcome"] != Outcome.UNSTABLE_PAIR.value:
                continue
            z0 = complex(*p["lam0"])
            near = [z for z, _, kind in zeros if abs(z.imag - z0.imag) < 0.3 and kind == "eigenvalue"]
            if near:
                z = min(near, key=lambda w: abs(w.imag - z0.imag))
                cross.append({"lam0": p["lam0"], "predicted_re": p["predicted"][0], "found_re": z.real,
                              "relative_difference": abs(z.real - p["predicted"][0]) / abs(z.real)})
    unstable = any(z.real > 1e-6 and kind == "eigenvalue" for z, _, kind in zeros)
    spectrally_stable = (not unstable) if search else None
    verdict = krein.verdict
    if unstable:
        verdict = Verdict.SPECTRALLY_UNSTABLE
    return StabilityReport(family, params.to_dict(), eps, ell, krein, sturm, zeros, preds, verdict,
                           spectrally_stable, cross, errors)


def trace_eigenvalue(s: float, ell: int, beta2: float, lam0: complex, eps_values, use_profile: bool = True,
                     ) -> list[tuple[float, complex]]:
    """Follow the Evans zero emanating from lam0 as eps increases (Newton continuation)."""
    out = []
    guess = complex(lam0)
    prev = None
    for eps in sorted(eps_values):
        if use_profile:
            prof, params = bifurcated_profile(s, ell, beta2, eps)
            ctx = ev.CoefficientMatrix.from_profile(prof, params)
        else:
            ctx = ev.CoefficientMatrix.from_expansion(s, ell, beta2, eps)
        start = guess + 1e-3 if prev is None and abs(guess.real) < 1e-12 else guess
        z, ok = ev.newton_polish(lambda w: ev.evans_eval(ctx, w, x_check=False).value, start)
        if not ok:
            raise RuntimeError(f"Newton failed to follow the zero at eps={eps}")
        out.append((float(eps), z))
        prev, guess = z, z
    return out
