"""Compiled kernels for the first-order spectral system.

The potential enters only through a real symmetric 4x4 matrix B(x), stored
as 10 upper-triangle entries with first and second x-derivatives on a
uniform grid and evaluated by quintic Hermite interpolation.
"""
import numpy as np
from numba import njit

# upper-triangle ordering of the symmetric 4x4 potential
TRIU = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


@njit(cache=True, nogil=True)
def _potential(x, table, x0, h, out):
    n = table.shape[0]
    u = (x - x0) / h
    i = int(np.floor(u))
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    t = u - i
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h1 = (t - 6 * t3 + 8 * t4 - 3 * t5) * h
    h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5) * h * h
    h3 = 10 * t3 - 15 * t4 + 6 * t5
    h4 = (-4 * t3 + 7 * t4 - 3 * t5) * h
    h5 = 0.5 * (t3 - 2 * t4 + t5) * h * h
    for m in range(10):
        out[m] = (h0 * table[i, m, 0] + h1 * table[i, m, 1] + h2 * table[i, m, 2]
                  + h3 * table[i + 1, m, 0] + h4 * table[i + 1, m, 1] + h5 * table[i + 1, m, 2])


@njit(cache=True, nogil=True)
def _rhs(x, W, table, x0, h, dconst, sigma, bvals, out):
    _potential(x, table, x0, h, bvals)
    k = W.shape[1]
    for c in range(k):
        y0 = W[0, c]
        y1 = W[1, c]
        y2 = W[2, c]
        y3 = W[3, c]
        out[0, c] = W[4, c] - sigma * y0
        out[1, c] = W[5, c] - sigma * y1
        out[2, c] = W[6, c] - sigma * y2
        out[3, c] = W[7, c] - sigma * y3
        out[4, c] = (dconst[0] * y0 - (bvals[0] * y0 + bvals[1] * y1 + bvals[2] * y2 + bvals[3] * y3)
                     - sigma * W[4, c])
        out[5, c] = (dconst[1] * y1 - (bvals[1] * y0 + bvals[4] * y1 + bvals[5] * y2 + bvals[6] * y3)
                     - sigma * W[5, c])
        out[6, c] = (dconst[2] * y2 - (bvals[2] * y0 + bvals[5] * y1 + bvals[7] * y2 + bvals[8] * y3)
                     - sigma * W[6, c])
        out[7, c] = (dconst[3] * y3 - (bvals[3] * y0 + bvals[6] * y1 + bvals[8] * y2 + bvals[9] * y3)
                     - sigma * W[7, c])


@njit(cache=True, nogil=True)
def _mgs(W):
    """Modified Gram-Schmidt, applied twice; returns sum of log R_kk."""
    k = W.shape[1]
    logdet = 0.0
    for sweep in range(2):
        for c in range(k):
            for p in range(c):
                dot = 0j
                for r in range(W.shape[0]):
                    dot += np.conj(W[r, p]) * W[r, c]
                for r in range(W.shape[0]):
                    W[r, c] -= dot * W[r, p]
            nrm = 0.0
            for r in range(W.shape[0]):
                nrm += W[r, c].real ** 2 + W[r, c].imag ** 2
            nrm = np.sqrt(nrm)
            logdet += np.log(nrm)
            for r in range(W.shape[0]):
                W[r, c] /= nrm
    return logdet


@njit(cache=True, nogil=True)
def integrate(W0, xstart, checkpoints, table, x0, h, dconst, sigma, orth_dx, rtol, atol, h_init, max_steps):
    """Dormand-Prince 5(4) integration of W' = (A(x) - sigma) W.

    Integrates from xstart through the monotone checkpoints, storing W at
    each. When orth_dx > 0 the columns are re-orthonormalized every orth_dx
    units and the accumulated log-volume is stored alongside.
    Returns (Ws, logs, status, nsteps); status 0 ok, 1 step underflow,
    2 step budget exhausted.
    """
    nc = checkpoints.shape[0]
    k = W0.shape[1]
    Ws = np.zeros((nc, 8, k), dtype=np.complex128)
    logs = np.zeros(nc)
    W = W0.copy()
    direction = 1.0 if checkpoints[nc - 1] >= xstart else -1.0
    k1 = np.empty_like(W)
    k2 = np.empty_like(W)
    k3 = np.empty_like(W)
    k4 = np.empty_like(W)
    k5 = np.empty_like(W)
    k6 = np.empty_like(W)
    k7 = np.empty_like(W)
    tmp = np.empty_like(W)
    ynew = np.empty_like(W)
    bvals = np.empty(10)
    x = xstart
    step = direction * h_init
    logacc = 0.0
    next_orth = x + direction * orth_dx
    _rhs(x, W, table, x0, h, dconst, sigma, bvals, k1)
    nsteps = 0
    for ic in range(nc):
        target = checkpoints[ic]
        while direction * (target - x) > 1e-14:
            if nsteps >= max_steps:
                return Ws, logs, 2, nsteps
            stop = target
            if orth_dx > 0 and direction * (next_orth - target) < 0:
                stop = next_orth
            if direction * (x + step - stop) > 0:
                step = stop - x
            if abs(step) < 1e-13:
                return Ws, logs, 1, nsteps
            tmp[:, :] = W + step * _A21 * k1
            _rhs(x + _C2 * step, tmp, table, x0, h, dconst, sigma, bvals, k2)
            tmp[:, :] = W + step * (_A31 * k1 + _A32 * k2)
            _rhs(x + _C3 * step, tmp, table, x0, h, dconst, sigma, bvals, k3)
            tmp[:, :] = W + step * (_A41 * k1 + _A42 * k2 + _A43 * k3)
            _rhs(x + _C4 * step, tmp, table, x0, h, dconst, sigma, bvals, k4)
            tmp[:, :] = W + step * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
            _rhs(x + _C5 * step, tmp, table, x0, h, dconst, sigma, bvals, k5)
            tmp[:, :] = W + step * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
            _rhs(x + step, tmp, table, x0, h, dconst, sigma, bvals, k6)
            ynew[:, :] = W + step * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            _rhs(x + step, ynew, table, x0, h, dconst, sigma, bvals, k7)
            err = 0.0
            for r in range(8):
                for c in range(k):
                    e = step * (_E1 * k1[r, c] + _E3 * k3[r, c] + _E4 * k4[r, c] + _E5 * k5[r, c]
                                + _E6 * k6[r, c] + _E7 * k7[r, c])
                    sc = atol + rtol * max(abs(W[r, c]), abs(ynew[r, c]))
                    q = abs(e) / sc
                    err += q * q
            err = np.sqrt(err / (8 * k))
            nsteps += 1
            if err <= 1.0:
                x = x + step
                W[:, :] = ynew
                k1[:, :] = k7
                if orth_dx > 0 and direction * (x - next_orth) >= -1e-14:
                    logacc += _mgs(W)
                    next_orth = x + direction * orth_dx
                    _rhs(x, W, table, x0, h, dconst, sigma, bvals, k1)
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            else:
                fac = max(0.2, 0.9 * err ** -0.2)
            step = step * fac
        Ws[ic] = W
        logs[ic] = logacc
    return Ws, logs, 0, nsteps
