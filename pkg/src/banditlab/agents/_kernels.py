"""Per-step baseline loops over enumerable arm sets, compiled with numba.

Every kernel works on a chunk of pre-drawn noise and mutates its state
arrays in place, so a run split into chunks is identical to a single pass.
Ties go to the lowest arm index.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def linucb_chunk(X, theta, noise, alpha, log_T, Vinv, b, out):
    m, d = X.shape
    th = np.empty(d)
    v = np.empty(d)
    for t in range(len(noise)):
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += Vinv[i, j] * b[j]
            th[i] = s
        best, arg = -np.inf, 0
        for a in range(m):
            mean = 0.0
            quad = 0.0
            for i in range(d):
                mean += X[a, i] * th[i]
                s = 0.0
                for j in range(d):
                    s += Vinv[i, j] * X[a, j]
                quad += X[a, i] * s
            val = mean + math.sqrt(alpha * max(quad, 0.0) * log_T)
            if val > best:
                best, arg = val, a
        y = noise[t]
        for i in range(d):
            y += X[arg, i] * theta[i]
        # Sherman-Morrison update of (V + x x^T)^{-1}
        denom = 1.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += Vinv[i, j] * X[arg, j]
            v[i] = s
            denom += X[arg, i] * s
        for i in range(d):
            for j in range(d):
                Vinv[i, j] -= v[i] * v[j] / denom
            b[i] += y * X[arg, i]
        out[t] = arg


@njit(cache=True, nogil=True)
def thompson_chunk(X, theta, noise, z, Vinv, b, out):
    m, d = X.shape
    th = np.empty(d)
    v = np.empty(d)
    for t in range(len(noise)):
        L = np.linalg.cholesky(0.5 * (Vinv + Vinv.T))
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += Vinv[i, j] * b[j]
            th[i] = s
        for i in range(d):
            s = 0.0
            for j in range(i + 1):
                s += L[i, j] * z[t, j]
            th[i] += s
        best, arg = -np.inf, 0
        for a in range(m):
            val = 0.0
            for i in range(d):
                val += X[a, i] * th[i]
            if val > best:
                best, arg = val, a
        y = noise[t]
        for i in range(d):
            y += X[arg, i] * theta[i]
        denom = 1.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += Vinv[i, j] * X[arg, j]
            v[i] = s
            denom += X[arg, i] * s
        for i in range(d):
            for j in range(d):
                Vinv[i, j] -= v[i] * v[j] / denom
            b[i] += y * X[arg, i]
        out[t] = arg


@njit(cache=True, nogil=True)
def _semi_update(X, theta, noise_row, arg, counts, sums):
    d = X.shape[1]
    for i in range(d):
        if X[arg, i] > 0:
            counts[i] += 1
            sums[i] += theta[i] + noise_row[i]


@njit(cache=True, nogil=True)
def combucb1_chunk(X, theta, noise, t0, conf, counts, sums, out):
    m, d = X.shape
    u = np.empty(d)
    for t in range(noise.shape[0]):
        lg = math.log(t0 + t + 1)
        for i in range(d):
            u[i] = sums[i] / counts[i] + math.sqrt(conf * lg / counts[i])
        best, arg = -np.inf, 0
        for a in range(m):
            val = 0.0
            for i in range(d):
                val += X[a, i] * u[i]
            if val > best:
                best, arg = val, a
        _semi_update(X, theta, noise[t], arg, counts, sums)
        out[t] = arg


@njit(cache=True, nogil=True)
def cts_chunk(X, theta, noise, z, counts, sums, out):
    m, d = X.shape
    u = np.empty(d)
    for t in range(noise.shape[0]):
        for i in range(d):
            u[i] = sums[i] / counts[i] + z[t, i] / math.sqrt(counts[i])
        best, arg = -np.inf, 0
        for a in range(m):
            val = 0.0
            for i in range(d):
                val += X[a, i] * u[i]
            if val > best:
                best, arg = val, a
        _semi_update(X, theta, noise[t], arg, counts, sums)
        out[t] = arg
