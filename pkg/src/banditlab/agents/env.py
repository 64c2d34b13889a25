"""Simulated environment: noisy feedback, pull accounting and regret traces."""
from __future__ import annotations

import math

import numpy as np

from ..core import Feedback, Instance, RegretTrace
from ..errors import InvalidInputError


class Environment:
    """Serves pulls of an instance for at most T steps.

    A bulk pull of arm x repeated n times returns its sufficient statistic:
    the sum of the n scalar rewards (bandit) or the per-coordinate sums over
    the active coordinates (semi-bandit). Sums of n standard normals are drawn
    as one N(0, n) variable. The true parameter stays private; agents only see
    the statistics returned here. ``noise_scale`` multiplies every noise draw
    (0 gives a noiseless environment).
    """

    def __init__(self, instance: Instance, oracle, T: int, rng: np.random.Generator, noise_scale: float = 1.0):
        if T < 1:
            raise InvalidInputError("horizon must be at least 1")
        if noise_scale < 0:
            raise InvalidInputError("noise_scale must be nonnegative")
        self.noise_scale = float(noise_scale)
        self.instance = instance
        self.oracle = oracle
        self.T = int(T)
        self.rng = rng
        self.t = 0
        self._theta = instance.theta_star
        self._best = instance.best_value
        self._segments = []
        self.pulls = {}

    @property
    def d(self) -> int:
        return self.instance.d

    @property
    def feedback(self) -> Feedback:
        return self.instance.feedback

    @property
    def arm_set(self):
        return self.instance.arm_set

    @property
    def remaining(self) -> int:
        return self.T - self.t

    def pull(self, x, n: int = 1):
        """Pull x up to n times (clipped at the horizon). Returns (pulled, statistic)."""
        x = np.asarray(x, dtype=float)
        n = int(min(n, self.remaining))
        if n <= 0:
            return 0, None
        key = self.instance.arm_set.key(x)
        self._segments.append((max(self._best - float(x @ self._theta), 0.0), n))
        self.pulls[key] = self.pulls.get(key, 0) + n
        self.t += n
        root = math.sqrt(n) * self.noise_scale
        if self.instance.feedback is Feedback.SEMI:
            coords = np.flatnonzero(x)
            return n, n * self._theta[coords] + root * self.rng.standard_normal(len(coords))
        return n, n * float(x @ self._theta) + root * float(self.rng.standard_normal())

    def record_indices(self, idx, gaps):
        """Account a per-step sequence of arm indices with known per-arm gaps (baseline kernels)."""
        idx = np.asarray(idx)
        n = len(idx)
        if n > self.remaining:
            raise InvalidInputError("more steps than the remaining budget")
        counts = np.bincount(idx, minlength=len(gaps))
        for j in np.flatnonzero(counts):
            self.pulls[int(j)] = self.pulls.get(int(j), 0) + int(counts[j])
        self._segments.append((np.asarray(gaps)[idx], None))
        self.t += n

    def regret_increments(self) -> np.ndarray:
        parts = []
        for g, n in self._segments:
            parts.append(np.full(n, g) if n is not None else g)
        return np.concatenate(parts) if parts else np.zeros(0)

    def trace(self) -> RegretTrace:
        if self.remaining:
            raise InvalidInputError(f"{self.remaining} steps were never played")
        return RegretTrace(np.cumsum(self.regret_increments()), dict(self.pulls), self.T)

    def final_regret(self) -> float:
        total = 0.0
        for g, n in self._segments:
            total += g * n if n is not None else float(np.sum(g))
        return total
