"""Frank-Wolfe over the probability simplex on a finite arm list."""
from __future__ import annotations

import numpy as np


def fw_simplex(value_grad, w0, iters: int, tol: float = 0.0):
    """Minimize a (possibly Monte-Carlo) function over the simplex.

    ``value_grad(w)`` returns (value, gradient). Step size 2/(r+2) for r >= 1,
    so each step adds at most one new arm to the support. Returns the best
    iterate seen, its value and the number of iterations used.
    """
    w = np.asarray(w0, dtype=float).copy()
    best_w, best_val = w.copy(), np.inf
    r = 0
    for r in range(1, iters + 1):
        val, g = value_grad(w)
        if val < best_val:
            best_w, best_val = w.copy(), val
        j = int(np.argmin(g))
        if g @ w - g[j] <= tol * max(1.0, abs(val)):
            break
        gamma = 2.0 / (r + 2.0)
        w *= 1.0 - gamma
        w[j] += gamma
    else:
        val, _ = value_grad(w)
        if val < best_val:
            best_w, best_val = w.copy(), val
    return best_w, best_val, r
