"""Homoclinic orbits of the steady system by collocation and continuation in beta1.

The half-line problem on [0, L] is discretized with 4-stage Lobatto IIIA
collocation (order 6) on a mesh clustered near x = 0. Symmetry conditions at
x = 0 fix the parity of V, and Robin conditions at x = L impose the linear decay
rates sqrt(omega), sqrt(s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvals_banded
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .model import (ModelParams, WaveProfile, default_half_length, nonlinearity_derivs,
                    uniform_grid)


class NewtonDivergence(RuntimeError):
    pass


class DecayViolation(RuntimeError):
    pass


class StepUnderflow(RuntimeError):
    pass


def _lobatto_tableau():
    r5 = math.sqrt(5.0)
    c = np.array([0.0, (5 - r5) / 10, (5 + r5) / 10, 1.0])
    P = np.polynomial.polynomial
    basis = []
    for j in range(4):
        others = [c[k] for k in range(4) if k != j]
        poly = P.polyfromroots(others)
        basis.append(poly / P.polyval(c[j], poly))
    integ = [P.polyint(b) for b in basis]
    A = np.array([[P.polyval(ci, integ[j]) for j in range(4)] for ci in c])
    return c, A, basis, integ


_C, _A, _BASIS, _INTEG = _lobatto_tableau()
_W = _A[-1]


def graded_mesh(half_length: float, n_intervals: int, grading: float = 2.5) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n_intervals + 1)
    return half_length * np.sinh(grading * t) / math.sinh(grading)


class CollocationSystem:
    """Discrete steady system for (U, V, U', V') on a graded half-line mesh.

    The unknown vector stacks node states in increasing x: y_0, then for every
    interval the two interior stages and the right endpoint.
    """

    def __init__(self, params: ModelParams, half_length: float, n_intervals: int = 400,
                 v_parity: int = 1, grading: float = 2.5):
        self.params = params
        self.L = float(half_length)
        self.v_parity = 1 if v_parity >= 0 else -1
        self.mesh = graded_mesh(self.L, n_intervals, grading)
        self.h = np.diff(self.mesh)
        self.M = n_intervals
        self.X = np.concatenate([[0.0], (self.mesh[:-1, None] + self.h[:, None] * _C[None, 1:]).ravel()])
        self.size = 4 + 12 * self.M
        qw = np.zeros(3 * self.M + 1)
        for k in range(4):
            qw[np.arange(self.M) * 3 + k] += self.h * _W[k]
        self.qweights = qw
        self._build_pattern()

    def _build_pattern(self):
        M = self.M
        n = np.repeat(np.arange(M), 12)
        i = np.tile(np.repeat(np.arange(1, 4), 4), M)
        j = np.tile(np.arange(4), 3 * M)
        self._blk_n, self._blk_i, self._blk_j = n, i, j

    def with_params(self, params: ModelParams) -> "CollocationSystem":
        out = object.__new__(CollocationSystem)
        out.__dict__.update(self.__dict__)
        out.params = params
        return out

    def _rhs(self, Y: np.ndarray, beta1: float):
        p = self.params.with_(beta1=beta1)
        U, V, P, Q = Y.T
        d = nonlinearity_derivs(U**2, V**2, p)
        F = np.column_stack([P, Q, p.omega * U - d.d1 * U, p.s * V - d.d2 * V])
        J = np.zeros((len(U), 4, 4))
        J[:, 0, 2] = 1.0
        J[:, 1, 3] = 1.0
        J[:, 2, 0] = p.omega - d.d1 - 2 * U**2 * d.d11
        J[:, 2, 1] = -2 * U * V * d.d12
        J[:, 3, 0] = -2 * U * V * d.d12
        J[:, 3, 1] = p.s - d.d2 - 2 * V**2 * d.d22
        return F, J

    def _rhs_beta(self, Y: np.ndarray, beta1: float) -> np.ndarray:
        if self.params.is_cubic:
            U, V = Y[:, 0], Y[:, 1]
            out = np.zeros_like(Y)
            out[:, 2] = -V**2 * U
            out[:, 3] = -U**2 * V
            return out
        db = 1e-7 * max(1.0, abs(beta1))
        return (self._rhs(Y, beta1 + db)[0] - self._rhs(Y, beta1 - db)[0]) / (2 * db)

    def residual(self, z: np.ndarray, beta1: float) -> np.ndarray:
        Y = z.reshape(-1, 4)
        F, _ = self._rhs(Y, beta1)
        return self._assemble_residual(Y, F)

    def _stage_index(self) -> np.ndarray:
        return 3 * np.arange(self.M)[:, None] + np.arange(4)[None, :]

    def _assemble_residual(self, Y, F) -> np.ndarray:
        p = self.params
        idx = self._stage_index()
        Ys, Fs = Y[idx], F[idx]
        eqs = Ys[:, 1:] - Ys[:, :1] - self.h[:, None, None] * np.einsum("ij,njk->nik", _A[1:], Fs)
        bc0 = [Y[0, 2], Y[0, 3] if self.v_parity > 0 else Y[0, 1]]
        yl = Y[-1]
        bcl = [yl[2] + math.sqrt(p.omega) * yl[0], yl[3] + math.sqrt(p.s) * yl[1]]
        return np.concatenate([bc0, eqs.ravel(), bcl])

    def jacobian(self, z: np.ndarray, beta1: float) -> sp.csc_matrix:
        Y = z.reshape(-1, 4)
        _, J = self._rhs(Y, beta1)
        rows, cols, vals = [], [], []
        eye = np.eye(4)
        n, i, j = self._blk_n, self._blk_i, self._blk_j
        node = 3 * n + j
        blocks = -(self.h[n] * _A[i, j])[:, None, None] * J[node]
        blocks += np.where((i == j)[:, None, None], eye, 0.0)
        blocks -= np.where((j == 0)[:, None, None], eye, 0.0)
        r0 = 2 + 12 * n + 4 * (i - 1)
        c0 = 4 * node
        rr = (r0[:, None, None] + np.arange(4)[None, :, None]) * np.ones((1, 1, 4), int)
        cc = (c0[:, None, None] + np.arange(4)[None, None, :]) * np.ones((1, 4, 1), int)
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(blocks.ravel())
        p = self.params
        last = self.size - 4
        bc_r = [0, 1, self.size - 2, self.size - 2, self.size - 1, self.size - 1]
        bc_c = [2, 3 if self.v_parity > 0 else 1, last + 2, last + 0, last + 3, last + 1]
        bc_v = [1.0, 1.0, 1.0, math.sqrt(p.omega), 1.0, math.sqrt(p.s)]
        rows.append(np.array(bc_r))
        cols.append(np.array(bc_c))
        vals.append(np.array(bc_v))
        return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.size, self.size))

    def beta_derivative(self, z: np.ndarray, beta1: float) -> np.ndarray:
        Y = z.reshape(-1, 4)
        Fb = self._rhs_beta(Y, beta1)
        out = np.zeros(self.size)
        Fs = Fb[self._stage_index()]
        out[2:-2] = (-self.h[:, None, None] * np.einsum("ij,njk->nik", _A[1:], Fs)).ravel()
        return out

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.qweights[:, None] * a.reshape(-1, 4) * b.reshape(-1, 4)))

    def v_norm(self, z: np.ndarray) -> float:
        """||V||_{L^2(R)} from the Lobatto quadrature on the half-line."""
        V = z.reshape(-1, 4)[:, 1]
        return math.sqrt(2.0 * float(np.sum(self.qweights * V**2)))

    def from_profile(self, profile: WaveProfile) -> np.ndarray:
        iu, iv = profile.interpolants()
        X = self.X
        Y = np.column_stack([iu(X), iv(X), iu.derivative()(X), iv.derivative()(X)])
        return Y.ravel()

    def dense(self, z: np.ndarray, beta1: float, x: np.ndarray) -> np.ndarray:
        """Evaluate the collocation polynomial (U, V, U', V') at points 0 <= x <= L."""
        Y = z.reshape(-1, 4)
        F, _ = self._rhs(Y, beta1)
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.L)
        n = np.clip(np.searchsorted(self.mesh, x, side="right") - 1, 0, self.M - 1)
        theta = (x - self.mesh[n]) / self.h[n]
        P = np.polynomial.polynomial
        out = Y[3 * n].copy()
        dout = np.zeros_like(out)
        for j in range(4):
            Fj = F[3 * n + j]
            out += (self.h[n] * P.polyval(theta, _INTEG[j]))[:, None] * Fj
            dout += P.polyval(theta, _BASIS[j])[:, None] * Fj
        return np.column_stack([out, dout])

    def to_profile(self, z: np.ndarray, beta1: float, grid: np.ndarray) -> WaveProfile:
        grid = np.asarray(grid, dtype=float)
        d = self.dense(z, beta1, np.abs(grid))
        U, V = d[:, 0], d[:, 1]
        dU, dV = d[:, 4], d[:, 5]
        sgn = np.sign(grid)
        if self.v_parity < 0:
            V = V * sgn
        else:
            dV = dV * sgn
        dU = dU * sgn
        p = self.params
        return WaveProfile(grid, U, V, (math.sqrt(p.omega), math.sqrt(p.s)), self.v_parity, dU, dV)


def _newton(system: CollocationSystem, z: np.ndarray, beta1: float, tol: float = 1e-10,
            max_iter: int = 25) -> tuple[np.ndarray, int]:
    for it in range(1, max_iter + 1):
        G = system.residual(z, beta1)
        lu = splu(system.jacobian(z, beta1))
        dz = lu.solve(-G)
        z = z + dz
        res = np.max(np.abs(system.residual(z, beta1)))
        if not np.isfinite(res):
            break
        if res <= tol and np.max(np.abs(dz)) <= 1e-6:
            return z, it
    raise NewtonDivergence(f"Newton did not converge in {max_iter} iterations")


def _check_decay(system: CollocationSystem, z: np.ndarray, rel: float = 1e-8):
    Y = z.reshape(-1, 4)
    tail = abs(Y[-1, 0]) + abs(Y[-1, 1])
    if tail > rel * np.max(np.abs(Y[:, 0])):
        raise DecayViolation(f"profile does not decay at x=L (tail {tail:.2e})")


def solve_homoclinic(params: ModelParams, initial_guess: WaveProfile, n_intervals: int = 400,
                     tol: float = 1e-10, return_system: bool = False):
    """Newton-refine a guess into a homoclinic profile at params.beta1.

    The result is sampled on the guess's grid; parity of V is inherited.
    """
    system = CollocationSystem(params, initial_guess.half_length, n_intervals, initial_guess.v_parity)
    z0 = system.from_profile(initial_guess)
    z, _ = _newton(system, z0, params.beta1, tol)
    _check_decay(system, z)
    prof = system.to_profile(z, params.beta1, initial_guess.x)
    if return_system:
        return prof, system, z
    return prof


def hamiltonian(profile: WaveProfile, params: ModelParams) -> np.ndarray:
    """H = (-omega U^2 - s V^2 + F(U^2, V^2) + U'^2 + V'^2)/2 along the orbit."""
    dU, dV = profile.derivatives()
    F = nonlinearity_derivs(profile.U**2, profile.V**2, params).F
    return 0.5 * (-params.omega * profile.U**2 - params.s * profile.V**2 + F + dU**2 + dV**2)


class ZeroCount(int):
    trivial: bool = False


def count_zeros(V, rel_threshold: float = 1e-9) -> ZeroCount:
    """Number of sign changes of V, ignoring values below rel_threshold * max|V|."""
    V = np.asarray(V, dtype=float)
    vmax = np.max(np.abs(V)) if V.size else 0.0
    if vmax == 0.0:
        out = ZeroCount(0)
        out.trivial = True
        return out
    w = V[np.abs(V) > rel_threshold * vmax]
    return ZeroCount(int(np.count_nonzero(np.sign(w[1:]) != np.sign(w[:-1]))))


@dataclass
class BranchPoint:
    beta1: float
    profile: WaveProfile
    v_norm: float


@dataclass
class Branch:
    points: list = field(default_factory=list)
    parity: int = 1
    ell: int = 0
    origin: str = "fundamental"

    @property
    def beta1(self) -> np.ndarray:
        return np.array([p.beta1 for p in self.points])

    @property
    def v_norms(self) -> np.ndarray:
        return np.array([p.v_norm for p in self.points])


def continue_branch(start: WaveProfile, params: ModelParams, beta1_range: tuple[float, float],
                    ds: float = 0.05, ds_min: float = 1e-6, ds_max: float = 0.25,
                    n_intervals: int = 400, max_points: int = 2000, origin: str | None = None,
                    grid: np.ndarray | None = None) -> Branch:
    """Pseudo-arclength continuation from a converged profile at params.beta1.

    Continues toward whichever end of beta1_range lies ahead of params.beta1
    (the far end) and stops once that end is reached. Step control: a corrector
    converging in at most 5 iterations doubles ds, otherwise ds is halved and
    the step retried.
    """
    lo, hi = beta1_range
    b0 = params.beta1
    target = hi if abs(hi - b0) >= abs(lo - b0) else lo
    direction = 1.0 if target >= b0 else -1.0
    grid = start.x if grid is None else grid
    system = CollocationSystem(params, start.half_length, n_intervals, start.v_parity)
    z, _ = _newton(system, system.from_profile(start), b0)
    _check_decay(system, z)
    beta = b0

    def point(zz, bb):
        prof = system.with_params(params.with_(beta1=bb)).to_profile(zz, bb, grid)
        vn = system.v_norm(zz) if np.any(zz.reshape(-1, 4)[:, 1]) else 0.0
        return BranchPoint(bb, prof, vn)

    def norm2(tz, tb):
        return system.inner(tz, tz) + tb * tb

    def tangent(zz, bb, ref_z, ref_b):
        Gz = system.jacobian(zz, bb)
        Gb = system.beta_derivative(zz, bb)[:, None]
        wz = (system.qweights[:, None] * np.ones((1, 4))).ravel() * ref_z
        K = sp.bmat([[Gz, sp.csc_matrix(Gb)], [sp.csc_matrix(wz[None, :]), sp.csc_matrix([[ref_b]])]],
                    format="csc")
        rhs = np.zeros(system.size + 1)
        rhs[-1] = 1.0
        t = splu(K).solve(rhs)
        tz, tb = t[:-1], t[-1]
        nrm = math.sqrt(norm2(tz, tb))
        return tz / nrm, tb / nrm

    tz, tb = tangent(z, beta, np.zeros(system.size), 1.0)
    if tb * direction < 0:
        tz, tb = -tz, -tb
    par = start.v_parity
    V0 = start.V
    branch = Branch([point(z, beta)], par, int(count_zeros(V0)),
                    origin or ("fundamental" if not np.any(V0) else f"pitchfork at {b0:.12g}"))
    while len(branch.points) < max_points:
        remaining = (target - beta) * direction
        if remaining <= 1e-12:
            break
        step = ds
        zp, bp = z + step * tz, beta + step * tb
        if (bp - target) * direction > 0:
            # land exactly on the range end with a fixed-beta1 solve
            frac = (target - beta) / (bp - beta) if bp != beta else 1.0
            try:
                zn, _ = _newton(system, z + frac * step * tz, target)
            except NewtonDivergence:
                ds *= 0.5
                if ds < ds_min:
                    raise StepUnderflow("step size fell below the minimum")
                continue
            z, beta = zn, target
            branch.points.append(point(z, beta))
            break
        ok, zn, bn = _corrector(system, zp, bp, tz, tb)
        if not ok:
            ds *= 0.5
            if ds < ds_min:
                raise StepUnderflow("step size fell below the minimum")
            continue
        ntz, ntb = tangent(zn, bn, tz, tb)
        if system.inner(ntz, tz) + ntb * tb < 0:
            ntz, ntb = -ntz, -ntb
        z, beta, tz, tb = zn, bn, ntz, ntb
        branch.points.append(point(z, beta))
        ds = min(2 * ds, ds_max)
    return branch


def _corrector(system: CollocationSystem, zp, bp, tz, tb, tol: float = 1e-10, max_iter: int = 5):
    z, b = zp.copy(), bp
    wz = (system.qweights[:, None] * np.ones((1, 4))).ravel() * tz
    for it in range(max_iter):
        G = system.residual(z, b)
        arc = float(wz @ (z - zp) + tb * (b - bp))
        Gz = system.jacobian(z, b)
        Gb = system.beta_derivative(z, b)[:, None]
        K = sp.bmat([[Gz, sp.csc_matrix(Gb)], [sp.csc_matrix(wz[None, :]), sp.csc_matrix([[tb]])]],
                    format="csc")
        d = splu(K).solve(-np.concatenate([G, [arc]]))
        z = z + d[:-1]
        b = b + d[-1]
        res = np.max(np.abs(system.residual(z, b)))
        if not np.isfinite(res):
            return False, z, b
        if res <= tol and np.max(np.abs(d)) <= 1e-6:
            return True, z, b
    return False, z, b


def _nve_banded(profile: WaveProfile, params: ModelParams, beta1: float) -> np.ndarray:
    """Lower banded form of the 6th-order FD matrix of -d^2 + s - d2F(U^2, 0)."""
    h2 = profile.h ** 2
    p = params.with_(beta1=beta1)
    pot = p.s - nonlinearity_derivs(profile.U**2, 0.0 * profile.U, p).d2
    pot = pot[1:-1]
    n = pot.size
    band = np.zeros((4, n))
    band[0] = 490.0 / (180 * h2) + pot
    band[1, :-1] = -270.0 / (180 * h2)
    band[2, :-2] = 27.0 / (180 * h2)
    band[3, :-3] = -2.0 / (180 * h2)
    return band


def nve_eigenvalue(profile: WaveProfile, params: ModelParams, beta1: float, index: int) -> float:
    band = _nve_banded(profile, params, beta1)
    return float(eigvals_banded(band, lower=True, select="i", select_range=(index, index))[0])


def nve_negative_count(profile: WaveProfile, params: ModelParams, beta1: float) -> int:
    band = _nve_banded(profile, params, beta1)
    vals = eigvals_banded(band, lower=True, select="v", select_range=(-1e300, 0.0))
    return int(vals.size)


def detect_pitchfork(branch: Branch, params: ModelParams, window: tuple[float, float],
                     xtol: float = 1e-10) -> list[float]:
    """Pitchfork points on a fundamental branch: zeros of the NVE eigenvalues in beta1.

    The k-th eigenvalue of -d^2 + s - d2F(U^2, 0) (6th-order finite differences,
    Dirichlet at +-L) crosses zero as beta1 passes the k-th pitchfork. Each
    crossing is bracketed by eigenvalue counts and refined by Brent's method.
    """
    lo, hi = window
    betas = branch.beta1
    if betas.min() > lo + 1e-12 or betas.max() < hi - 1e-12:
        raise ValueError("branch does not span the requested window")
    if np.any(branch.v_norms != 0):
        raise ValueError("pitchfork detection expects the fundamental branch")

    def prof_at(b):
        return branch.points[int(np.argmin(np.abs(betas - b)))].profile

    n_lo = nve_negative_count(prof_at(lo), params, lo)
    n_hi = nve_negative_count(prof_at(hi), params, hi)
    out = []
    for k in range(n_lo, n_hi):
        root = brentq(lambda b: nve_eigenvalue(prof_at(b), params, b, k), lo, hi,
                      xtol=xtol, rtol=4 * np.finfo(float).eps)
        out.append(root)
    return out


def branch_from_pitchfork(params: ModelParams, s: float, ell: int, beta2: float,
                          beta1_end: float, eps: float = 0.05, n_intervals: int = 400,
                          grid: np.ndarray | None = None, **kw) -> Branch:
    """Switch onto the ell-th bifurcated branch and continue it to beta1_end."""
    from .melnikov import approximate_branch, v1_profile
    from .model import beta1_critical, fundamental_profile

    if grid is None:
        grid = uniform_grid(default_half_length(params.omega, s))
    bstar = beta1_critical(s, ell)
    base = params.with_(s=s, beta2=beta2)
    mu, _ = approximate_branch(s, ell, beta2, eps, grid)
    fund = fundamental_profile(base, grid)
    V1, dV1 = v1_profile(s, ell, grid, derivative=True)
    seed = WaveProfile(grid, fund.U, eps * V1, fund.decay_rates, (-1) ** ell, fund.dU, eps * dV1)
    p0 = base.with_(beta1=bstar + mu)
    start = solve_homoclinic(p0, seed, n_intervals)
    return continue_branch(start, p0, (min(bstar, beta1_end), max(bstar, beta1_end)),
                           n_intervals=n_intervals, origin=f"pitchfork at {bstar:.12g}",
                           grid=grid, **kw)
