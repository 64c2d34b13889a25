"""Caratheodory sparsification of allocations and integer pull counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Allocation, Feedback

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparseAllocation(Allocation):
    """Allocation returned by ``sparsify``; ``degraded`` marks a numerical rank failure."""

    degraded: bool = False


@dataclass(frozen=True)
class SparsifyTarget:
    feedback: Feedback
    n_f: int

    @classmethod
    def of(cls, feedback, d: int) -> "SparsifyTarget":
        fb = Feedback.parse(feedback)
        return cls(fb, d + 1 if fb is Feedback.SEMI else d * d + d + 1)


def moment_features(points, feedback) -> np.ndarray:
    """Rows [1, x] for semi-bandit (binary arms), [1, x, upper triangle of x x^T] for bandit."""
    P = np.atleast_2d(points)
    ones = np.ones((len(P), 1))
    if Feedback.parse(feedback) is Feedback.SEMI:
        return np.hstack([ones, P])
    iu = np.triu_indices(P.shape[1])
    quad = (P[:, :, None] * P[:, None, :])[:, iu[0], iu[1]]
    return np.hstack([ones, P, quad])


def _null_vector(M):
    """A unit null vector of M (r x c, c > r) from a column-pivoted QR, or None."""
    _, R, piv = scipy.linalg.qr(M, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        z = np.zeros(M.shape[1])
        z[0] = 1.0
        return z
    q = int(np.count_nonzero(diag > RANK_TOL * diag[0]))
    if q >= M.shape[1]:
        return None
    y = scipy.linalg.solve_triangular(R[:q, :q], -R[:q, q])
    z = np.zeros(M.shape[1])
    z[piv[:q]] = y
    z[piv[q]] = 1.0
    return z / np.linalg.norm(z)


def sparsify(tau: Allocation, feedback, arm_set=None) -> SparseAllocation:
    """Rewrite ``tau`` on at most n_f arms with the same mass, mean and design matrix."""
    tau = tau.pruned()
    target = SparsifyTarget.of(feedback, tau.d)
    F = moment_features(tau.points, feedback)
    r = F.shape[1]
    w = tau.weights.copy()
    active = list(range(len(w)))
    degraded = False
    # the lifted features have r <= n_f rows, so r + 1 atoms are always dependent
    while len(active) > min(r, target.n_f):
        blk = active[: r + 1]
        z = _null_vector(F[blk].T)
        if z is None:
            degraded = True
            break
        if not np.any(z > 0):
            z = -z
        wb = w[blk]
        pos = z > 0
        ratios = np.full(len(blk), np.inf)
        ratios[pos] = wb[pos] / z[pos]
        j = int(np.argmin(ratios))
        wb = np.maximum(wb - ratios[j] * z, 0.0)
        wb[j] = 0.0
        w[blk] = wb
        active = [i for i in active if w[i] > 0]
    keep = np.array(active, dtype=np.int64)
    idx = None if tau.indices is None else tau.indices[keep]
    return SparseAllocation(tau.points[keep], w[keep], idx, degraded=degraded)


def ceil_counts(weights) -> np.ndarray:
    """Ceiling of each weight, immune to last-bit noise on integer-valued weights."""
    w = np.asarray(weights, dtype=float)
    return np.ceil(w * (1.0 - 1e-12)).astype(np.int64)


def to_pull_counts(alpha: Allocation) -> dict:
    """Map arm key -> ceil(alpha_x) for every arm with positive weight."""
    a = alpha.pruned()
    out: dict = {}
    for key, c in zip(a.as_dict().keys(), ceil_counts(list(a.as_dict().values()))):
        out[key] = int(c)
    return out
