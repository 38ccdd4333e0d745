"""Compiled inner loop for the Lie-group RK4 integrator.

Mirrors ``sim.rk4_step_reference`` step for step; the test
suite checks the two agree to roundoff.  Arrays carry a leading batch axis:
``R`` is ``(B, N, 3, 3)`` and ``w`` is ``(B, N, 3)``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _exp(v, out):
    t2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    t = np.sqrt(t2)
    if t < 1e-8:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        a = np.sin(t) / t
        h = np.sin(0.5 * t) / t
        b = 2.0 * h * h
    x, y, z = v[0], v[1], v[2]
    # I + a K + b K^2 with K^2 = v v^T - t^2 I
    out[0, 0] = 1.0 + b * (x * x - t2)
    out[1, 1] = 1.0 + b * (y * y - t2)
    out[2, 2] = 1.0 + b * (z * z - t2)
    out[0, 1] = -a * z + b * x * y
    out[1, 0] = a * z + b * x * y
    out[0, 2] = a * y + b * x * z
    out[2, 0] = -a * y + b * x * z
    out[1, 2] = -a * x + b * y * z
    out[2, 1] = a * x + b * y * z


@njit(cache=True)
def _jr_inv(th, w, out):
    t2 = th[0] * th[0] + th[1] * th[1] + th[2] * th[2]
    t = np.sqrt(t2)
    if t < 1e-4:
        c = 1.0 / 12.0 + t2 / 720.0
    else:
        c = 1.0 / t2 - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    tw0 = th[1] * w[2] - th[2] * w[1]
    tw1 = th[2] * w[0] - th[0] * w[2]
    tw2 = th[0] * w[1] - th[1] * w[0]
    out[0] = w[0] + 0.5 * tw0 + c * (th[1] * tw2 - th[2] * tw1)
    out[1] = w[1] + 0.5 * tw1 + c * (th[2] * tw0 - th[0] * tw2)
    out[2] = w[2] + 0.5 * tw2 + c * (th[0] * tw1 - th[1] * tw0)


@njit(cache=True)
def _field(R, w, heads, tails, avecs, weights, gains, J, Jinv, kinematic, b, om, wd):
    """Evaluate body velocity ``om`` and acceleration ``wd`` for one network state."""
    N = R.shape[0]
    n = avecs.shape[0]
    k_R, k_w, k_wb = gains[0], gains[1], gains[2]
    for i in range(N):
        for l in range(n):
            for c in range(3):
                b[i, l, c] = R[i, 0, c] * avecs[l, 0] + R[i, 1, c] * avecs[l, 1] + R[i, 2, c] * avecs[l, 2]
    align = np.zeros((N, 3))
    for k in range(heads.shape[0]):
        i = heads[k]
        j = tails[k]
        for l in range(n):
            bj = b[j, l]
            bi = b[i, l]
            r = weights[l]
            c0 = r * (bj[1] * bi[2] - bj[2] * bi[1])
            c1 = r * (bj[2] * bi[0] - bj[0] * bi[2])
            c2 = r * (bj[0] * bi[1] - bj[1] * bi[0])
            align[i, 0] += c0
            align[i, 1] += c1
            align[i, 2] += c2
            align[j, 0] -= c0
            align[j, 1] -= c1
            align[j, 2] -= c2
    for i in range(N):
        for c in range(3):
            align[i, c] *= 0.5 * k_R
    if kinematic:
        for i in range(N):
            for c in range(3):
                om[i, c] = align[i, c]
                wd[i, c] = 0.0
        return
    lap = np.zeros((N, 3))
    for k in range(heads.shape[0]):
        i = heads[k]
        j = tails[k]
        for c in range(3):
            d = w[i, c] - w[j, c]
            lap[i, c] += d
            lap[j, c] -= d
    Jw = np.empty(3)
    gyro = np.empty(3)
    net = np.empty(3)
    for i in range(N):
        for c in range(3):
            Jw[c] = J[i, c, 0] * w[i, 0] + J[i, c, 1] * w[i, 1] + J[i, c, 2] * w[i, 2]
        gyro[0] = w[i, 1] * Jw[2] - w[i, 2] * Jw[1]
        gyro[1] = w[i, 2] * Jw[0] - w[i, 0] * Jw[2]
        gyro[2] = w[i, 0] * Jw[1] - w[i, 1] * Jw[0]
        for c in range(3):
            tau = gyro[c] + align[i, c] - k_w * w[i, c] - k_wb * lap[i, c]
            net[c] = tau - gyro[c]
            om[i, c] = w[i, c]
        for c in range(3):
            wd[i, c] = Jinv[i, c, 0] * net[0] + Jinv[i, c, 1] * net[1] + Jinv[i, c, 2] * net[2]


@njit(cache=True)
def _matmul3(A, B, out):
    for r in range(3):
        for c in range(3):
            out[r, c] = A[r, 0] * B[0, c] + A[r, 1] * B[1, c] + A[r, 2] * B[2, c]


@njit(cache=True)
def _stage(R0, theta, w, use_theta, heads, tails, avecs, weights, gains, J, Jinv, kinematic,
           Rs, E, b, om, thd, wd):
    N = R0.shape[0]
    for i in range(N):
        if use_theta:
            _exp(theta[i], E)
            _matmul3(R0[i], E, Rs[i])
        else:
            Rs[i, :, :] = R0[i]
    _field(Rs, w, heads, tails, avecs, weights, gains, J, Jinv, kinematic, b, om, wd)
    for i in range(N):
        if use_theta:
            _jr_inv(theta[i], om[i], thd[i])
        else:
            thd[i, :] = om[i]


@njit(cache=True)
def _drift(R):
    s = 0.0
    for r in range(3):
        for c in range(3):
            g = R[0, r] * R[0, c] + R[1, r] * R[1, c] + R[2, r] * R[2, c]
            if r == c:
                g -= 1.0
            s += g * g
    return np.sqrt(s)


@njit(cache=True)
def rk4_steps(R, w, h, n_steps, heads, tails, avecs, weights, gains, J, Jinv, kinematic, reproj_tol):
    """Advance every batch member ``n_steps`` steps in place.

    Returns ``(reprojections, ok)``; ``ok`` is False if the state went non-finite.
    """
    B, N = R.shape[0], R.shape[1]
    n = avecs.shape[0]
    Rs = np.empty((N, 3, 3))
    E = np.empty((3, 3))
    b = np.empty((N, n, 3))
    om = np.empty((N, 3))
    th = np.zeros((N, 3))
    ws = np.empty((N, 3))
    T = np.empty((4, N, 3))
    A = np.empty((4, N, 3))
    Rn = np.empty((3, 3))
    reproj = 0
    for _ in range(n_steps):
        for bi in range(B):
            R0 = R[bi]
            w0 = w[bi]
            _stage(R0, th, w0, False, heads, tails, avecs, weights, gains, J, Jinv, kinematic,
                   Rs, E, b, om, T[0], A[0])
            for s in range(1, 4):
                f = 0.5 * h if s < 3 else h
                for i in range(N):
                    for c in range(3):
                        th[i, c] = f * T[s - 1, i, c]
                        ws[i, c] = w0[i, c] + f * A[s - 1, i, c]
                _stage(R0, th, ws, True, heads, tails, avecs, weights, gains, J, Jinv, kinematic,
                       Rs, E, b, om, T[s], A[s])
            for i in range(N):
                for c in range(3):
                    th[i, c] = (h / 6.0) * (T[0, i, c] + 2.0 * T[1, i, c] + 2.0 * T[2, i, c] + T[3, i, c])
                    if not kinematic:
                        w0[i, c] += (h / 6.0) * (A[0, i, c] + 2.0 * A[1, i, c] + 2.0 * A[2, i, c] + A[3, i, c])
                _exp(th[i], E)
                _matmul3(R0[i], E, Rn)
                R0[i, :, :] = Rn
                d = _drift(R0[i])
                if not d <= reproj_tol:
                    if not np.all(np.isfinite(R0[i])) or np.linalg.det(R0[i]) <= 0.0:
                        return reproj, False
                    U, sv, Vt = np.linalg.svd(R0[i])
                    P = U @ Vt
                    if np.linalg.det(P) < 0:
                        U[:, 2] *= -1.0
                        P = U @ Vt
                    R0[i, :, :] = P
                    reproj += 1
            for i in range(N):
                for c in range(3):
                    th[i, c] = 0.0
                    if not np.isfinite(w0[i, c]):
                        return reproj, False
    return reproj, True
