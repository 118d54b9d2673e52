"""Coupled NLS model: parameters, nonlinearity, steady equations, profiles.

Steady solitary waves (U, V) solve

    -U'' + omega U - d1F(U^2, V^2) U = 0
    -V'' + s V     - d2F(U^2, V^2) V = 0

with the cubic F = z1^2/2 + beta1 z1 z2 + beta2 z2^2/2 built in.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq


@dataclass(frozen=True)
class NonlinearityDerivs:
    F: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d22: np.ndarray
    d12: np.ndarray
    d111: np.ndarray
    d112: np.ndarray
    d2mu: np.ndarray
    dmu: np.ndarray


def cubic_derivs(z1, z2, beta1: float, beta2: float) -> NonlinearityDerivs:
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    one = np.ones_like(z1 + z2)
    zero = np.zeros_like(one)
    return NonlinearityDerivs(
        F=0.5 * z1**2 + beta1 * z1 * z2 + 0.5 * beta2 * z2**2,
        d1=z1 + beta1 * z2,
        d2=beta1 * z1 + beta2 * z2,
        d11=one,
        d22=beta2 * one,
        d12=beta1 * one,
        d111=zero,
        d112=zero,
        d2mu=z1 * one,
        dmu=z1 * z2,
    )


@dataclass(frozen=True)
class ModelParams:
    omega: float = 1.0
    s: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    mu: float = 0.0
    epsilon: float = 0.0
    nonlinearity: Callable[..., NonlinearityDerivs] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.omega > 0 or not self.s > 0:
            raise ValueError("omega and s must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def is_cubic(self) -> bool:
        return self.nonlinearity is None

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("nonlinearity")
        d["nonlinearity"] = "cubic" if self.is_cubic else "custom"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if d.get("nonlinearity", "cubic") != "cubic":
            raise ValueError("only the cubic nonlinearity can be restored from JSON")
        keys = ("omega", "s", "beta1", "beta2", "mu", "epsilon")
        return cls(**{k: float(d[k]) for k in keys if k in d})


def nonlinearity_derivs(z1, z2, params: ModelParams) -> NonlinearityDerivs:
    """F and the partial derivatives used throughout, at (z1, z2) = (U^2, V^2)."""
    if params.nonlinearity is not None:
        return params.nonlinearity(z1, z2, params)
    return cubic_derivs(z1, z2, params.beta1, params.beta2)


def beta1_critical(s: float, ell: int, omega: float = 1.0) -> float:
    """Coupling beta1 at which the ell-th pitchfork leaves the fundamental branch."""
    if s <= 0 or omega <= 0:
        raise ValueError("s and omega must be positive")
    if ell < 0:
        raise ValueError("ell must be non-negative")
    r = math.sqrt(s / omega)
    return ((2 * r + 2 * ell + 1) ** 2 - 1) / 8


def amplitude_threshold(params: ModelParams, zmax: float = 50.0) -> float:
    """zeta0 = inf{z > 0 : F(z^2, 0) = omega z^2}; sqrt(2 omega) for the cubic."""
    def g(z):
        return float(nonlinearity_derivs(z * z, 0.0, params).F) - params.omega * z * z

    zs = np.linspace(1e-3, zmax, 20001)
    vals = np.array([g(z) for z in zs])
    idx = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if idx.size == 0:
        raise ValueError("no positive root of F(z^2,0) = omega z^2 below zmax")
    i = idx[0]
    return brentq(g, zs[i], zs[i + 1], xtol=1e-15, rtol=1e-15)


def default_half_length(omega: float, s: float) -> float:
    return max(20.0, 20.0 / min(math.sqrt(omega), math.sqrt(s)))


def uniform_grid(half_length: float, n: int = 4001) -> np.ndarray:
    if n % 2 == 0:
        raise ValueError("use an odd number of points so that x=0 is a node")
    return np.linspace(-half_length, half_length, n)


@dataclass(frozen=True)
class WaveProfile:
    """Sampled (U, V) on a uniform symmetric grid.

    dU, dV hold x-derivatives when known analytically or from a solver;
    otherwise they are reconstructed by finite differences on demand.
    """
    x: np.ndarray
    U: np.ndarray
    V: np.ndarray
    decay_rates: tuple
    v_parity: int = 1
    dU: np.ndarray | None = field(default=None, compare=False)
    dV: np.ndarray | None = field(default=None, compare=False)

    @property
    def half_length(self) -> float:
        return float(self.x[-1])

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def is_fundamental(self) -> bool:
        return not np.any(self.V)

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        dU = self.dU if self.dU is not None else fd_first_derivative(self.U, self.h)
        dV = self.dV if self.dV is not None else fd_first_derivative(self.V, self.h)
        return dU, dV

    def interpolants(self):
        """C^1 piecewise-cubic Hermite interpolants of U and V."""
        dU, dV = self.derivatives()
        return CubicHermiteSpline(self.x, self.U, dU), CubicHermiteSpline(self.x, self.V, dV)

    def l2_norms(self) -> tuple[float, float]:
        from scipy.integrate import simpson
        return (math.sqrt(simpson(self.U**2, x=self.x)), math.sqrt(simpson(self.V**2, x=self.x)))

    def validate(self, tail_tol: float = 1e-8, parity_tol: float = 1e-10) -> None:
        x = self.x
        if not np.allclose(x, -x[::-1], rtol=0, atol=1e-12 * max(1.0, x[-1])):
            raise ValueError("grid is not symmetric")
        scale = max(np.max(np.abs(self.U)), np.max(np.abs(self.V)), 1e-300)
        if np.max(np.abs(self.U - self.U[::-1])) > parity_tol * scale:
            raise ValueError("U is not even")
        if np.max(np.abs(self.V - self.v_parity * self.V[::-1])) > parity_tol * scale:
            raise ValueError("V does not have the declared parity")
        tail = max(abs(self.U[0]) + abs(self.V[0]), abs(self.U[-1]) + abs(self.V[-1]))
        if tail > tail_tol * np.max(np.abs(self.U)):
            raise ValueError("profile does not decay to the grid edge")


def fd_first_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central first derivative, one-sided at the edges."""
    f = np.asarray(f, dtype=float)
    d = np.empty_like(f)
    d[3:-3] = (-f[:-6] + 9 * f[1:-5] - 45 * f[2:-4] + 45 * f[4:-2] - 9 * f[5:-1] + f[6:]) / (60 * h)
    d[:3] = np.gradient(f[:6], h, edge_order=2)[:3]
    d[-3:] = np.gradient(f[-6:], h, edge_order=2)[-3:]
    return d


def fd_second_derivative(f: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Central second derivative on interior points (edges trimmed by order//2)."""
    f = np.asarray(f, dtype=float)
    if order == 2:
        return (f[:-2] - 2 * f[1:-1] + f[2:]) / h**2
    if order == 4:
        return (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h**2)
    if order == 6:
        return (2 * f[:-6] - 27 * f[1:-5] + 270 * f[2:-4] - 490 * f[3:-3]
                + 270 * f[4:-2] - 27 * f[5:-1] + 2 * f[6:]) / (180 * h**2)
    raise ValueError("order must be 2, 4 or 6")


def fundamental_profile(params: ModelParams, grid: np.ndarray | None = None) -> WaveProfile:
    """U0 = sqrt(2 omega) sech(sqrt(omega) x), V0 = 0 (cubic model)."""
    if grid is None:
        grid = uniform_grid(default_half_length(params.omega, params.s))
    x = np.asarray(grid, dtype=float)
    k = math.sqrt(params.omega)
    sech = 1.0 / np.cosh(k * x)
    U = math.sqrt(2 * params.omega) * sech
    dU = -k * U * np.tanh(k * x)
    zero = np.zeros_like(x)
    return WaveProfile(x, U, zero, (k, math.sqrt(params.s)), 1, dU, zero.copy())


def fundamental_second_derivative(params: ModelParams, x) -> np.ndarray:
    k = math.sqrt(params.omega)
    t = np.tanh(k * np.asarray(x))
    U = math.sqrt(2 * params.omega) / np.cosh(k * np.asarray(x))
    return params.omega * U * (t**2 - (1 - t**2))


def steady_residual(profile: WaveProfile, params: ModelParams, order: int = 6,
                    tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the steady equations on interior grid points.

    Returns arrays aligned with profile.x[order//2 : -order//2]. When tol is
    given, the stencil error is estimated by comparison with the same stencil
    on the doubled spacing and a warning is issued if it exceeds tol.
    """
    h = profile.h
    k = order // 2
    d = nonlinearity_derivs(profile.U**2, profile.V**2, params)
    Ui, Vi = profile.U[k:-k], profile.V[k:-k]
    d2U = fd_second_derivative(profile.U, h, order)
    d2V = fd_second_derivative(profile.V, h, order)
    rU = -d2U + params.omega * Ui - d.d1[k:-k] * Ui
    rV = -d2V + params.s * Vi - d.d2[k:-k] * Vi
    if tol is not None:
        est = 0.0
        for f, fine in ((profile.U, d2U), (profile.V, d2V)):
            coarse = fd_second_derivative(f[::2], 2 * h, order)
            est = max(est, np.max(np.abs(coarse - fine[k::2][:len(coarse)])) / (2**order - 1))
        if est > tol:
            warnings.warn(f"grid too coarse: discretization error estimate {est:.2e} exceeds {tol:.2e}",
                          RuntimeWarning, stacklevel=2)
    return rU, rV


def save_profile(profile: WaveProfile, params: ModelParams, path) -> tuple[Path, Path]:
    """Write x,U,V as CSV plus a JSON sidecar with parameters and metadata."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "U", "V"])
        for row in zip(profile.x, profile.U, profile.V):
            w.writerow([repr(float(v)) for v in row])
    side = path.with_suffix(".json")
    meta = {"params": params.to_dict(), "decay_rates": list(profile.decay_rates),
            "v_parity": profile.v_parity}
    side.write_text(json.dumps(meta, indent=2))
    return path, side


def load_profile(path) -> tuple[WaveProfile, ModelParams]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["x", "U", "V"]:
        raise ValueError("unexpected CSV header")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    meta = json.loads(path.with_suffix(".json").read_text())
    prof = WaveProfile(data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(),
                       tuple(meta["decay_rates"]), int(meta["v_parity"]))
    return prof, ModelParams.from_dict(meta["params"])
