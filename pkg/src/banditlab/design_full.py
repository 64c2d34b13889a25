"""Enumeration-based solvers for the regret, relaxed and pure-exploration design problems."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._fw import fw_simplex
from .core import Allocation, ArmSet, Feedback, SimplexWeights
from .errors import CoverageError, InvalidInputError
from .gwidth import (
    DirectionFamily,
    SupEstimate,
    arm_gradient,
    design_from_dense,
    estimate_sup,
    norm_gradient,
    sup_values,
    width_gradient,
)

PROFILES = {"paper": 1.0, "practical": 32.0}
FEASIBILITY_SLACK = 1.05
# the mass is set from mean + MASS_SIGMAS * std_err so that the fresh-batch
# re-check (mean + 3 std_err <= 1.05 C) rarely fails on noise alone
MASS_SIGMAS = 5.0


class Variant(str, enum.Enum):
    FULL = "full"
    RELAXED = "relaxed"
    PURE_EXPLORE = "pure_explore"

    @classmethod
    def parse(cls, v) -> "Variant":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise InvalidInputError(f"unknown design variant {v!r}") from None


def log_term(epoch: int, delta: float) -> float:
    return math.log(2.0 * epoch ** 3 / delta)


def constraint_constant(variant, epoch: int, delta: float, profile: str = "paper",
                        scale: float | None = None) -> float:
    """Right-hand side C of the epoch constraint.

    ``scale`` overrides the profile multiplier (paper = 1, practical = 32).
    """
    if scale is None:
        if profile not in PROFILES:
            raise InvalidInputError(f"unknown constant profile {profile!r}")
        scale = PROFILES[profile]
    if Variant.parse(variant) is Variant.FULL:
        return scale / 128.0
    return scale / (128.0 * (1.0 + math.sqrt(math.pi * log_term(epoch, delta))))


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """One epoch's design problem over an enumerable arm list.

    ``gaps`` holds the estimated gap of every arm, ``leader`` the empirical
    leader x_bar (the zero vector before any data). ``direction_mask``, when
    given, restricts the width constraint to the masked arms while every arm
    stays available for sampling.
    """

    eps: float
    gaps: np.ndarray
    leader: np.ndarray
    delta: float
    epoch: int
    feedback: Feedback
    variant: Variant
    C: float
    direction_mask: np.ndarray | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidInputError("eps must be positive")
        if not self.C > 0:
            raise InvalidInputError("C must be positive")
        gaps = np.asarray(self.gaps, dtype=float)
        if np.any(gaps < -1e-12):
            raise InvalidInputError("estimated gaps must be nonnegative")
        object.__setattr__(self, "gaps", np.maximum(gaps, 0.0))
        object.__setattr__(self, "leader", np.asarray(self.leader, dtype=float))
        object.__setattr__(self, "feedback", Feedback.parse(self.feedback))
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.direction_mask is not None:
            mask = np.asarray(self.direction_mask, dtype=bool)
            if mask.shape != gaps.shape or not mask.any():
                raise InvalidInputError("direction_mask needs one flag per arm and at least one set")
            object.__setattr__(self, "direction_mask", mask)

    def family(self, arms) -> DirectionFamily:
        scales = 1.0 / (self.eps + self.gaps)
        Z = self.leader - arms
        if self.direction_mask is not None:
            Z, scales = Z[self.direction_mask], scales[self.direction_mask]
        return DirectionFamily(Z, scales)

    def costs(self) -> np.ndarray:
        if self.variant is Variant.PURE_EXPLORE:
            return np.ones(len(self.gaps))
        return 2.0 * (self.eps + self.gaps)


@dataclass(frozen=True, eq=False)
class DesignSolution:
    allocation: Allocation
    objective: float
    constraint_value: SupEstimate
    deviation: float
    feasible: bool
    C: float

    @property
    def constraint_total(self) -> float:
        return self.constraint_value.mean + self.deviation


class _Constraint:
    """Constraint functional of a unit-mass shape, with CRN Monte-Carlo gradients."""

    def __init__(self, problem: DesignProblem, arms):
        self.p = problem
        self.arms = arms
        self.family = problem.family(arms)
        self.full = problem.variant is Variant.FULL
        self.L = log_term(problem.epoch, problem.delta)
        self.scales = 1.0 / (problem.eps + problem.gaps)
        # the deviation term ranges over the same arms as the width
        keep = problem.direction_mask if problem.direction_mask is not None else np.ones(len(arms), bool)
        self.dev_arms, self.dev_scales = arms[keep], self.scales[keep]

    def deviation(self, A):
        if not self.full:
            return 0.0, None
        norms = A.norms_sq(self.dev_arms) * self.dev_scales ** 2
        j = int(np.argmax(norms))
        return math.sqrt(2.0 * self.L * norms[j]), j

    def value_grad(self, w, eta):
        A = design_from_dense(self.arms, w, self.p.feedback)
        if self.family.trivial:
            val, grad = 0.0, np.zeros(len(w))
        else:
            vals, V = sup_values(self.family, A, eta)
            val = float(vals.mean())
            grad = arm_gradient(width_gradient(A, eta, V), self.arms)
        dev, j = self.deviation(A)
        if j is not None and dev > 0:
            gN = arm_gradient(norm_gradient(A, self.dev_arms[j], self.dev_scales[j]), self.arms)
            grad = grad + math.sqrt(2.0 * self.L) * gN / (2.0 * math.sqrt(dev ** 2 / (2.0 * self.L)))
            val += dev
        return val, grad

    def estimate(self, w, n_samples, rng):
        A = design_from_dense(self.arms, w, self.p.feedback)
        est = estimate_sup(self.family, A, self.p.feedback, n_samples, rng)
        return est, self.deviation(A)[0]


def solve_design(problem: DesignProblem, arm_set: ArmSet, budget: int = 300, rng=None,
                 n_samples: int = 2000) -> DesignSolution:
    """Scale-then-shape solve of one epoch design.

    The constraint of tau = t * lam equals g(lam) / sqrt(t), so the optimal
    mass for a shape is t = (g / C)^2 and the problem reduces to minimizing
    cost(lam) * g(lam)^2 over the simplex. That is done by Frank-Wolfe on its
    logarithm with common random numbers, then t is set from a fresh batch's
    upper confidence value and the result is re-checked on another batch.
    """
    if not arm_set.enumerable:
        raise InvalidInputError("solve_design needs an enumerable arm set")
    rng = np.random.default_rng(0) if rng is None else rng
    arms = arm_set.arms
    m = len(arms)
    if len(problem.gaps) != m:
        raise InvalidInputError("one estimated gap per arm is required")
    con = _Constraint(problem, arms)
    costs = problem.costs()
    zero = SupEstimate(0.0, 0.0, n_samples)
    if con.family.trivial and not con.full:
        return DesignSolution(Allocation(arms[:0], np.zeros(0), np.zeros(0, dtype=np.int64)),
                              0.0, zero, 0.0, True, problem.C)

    eta = rng.standard_normal((n_samples, arm_set.d))

    def value_grad(w):
        g, dg = con.value_grad(w, eta)
        c = float(costs @ w)
        if g <= 0:
            return -np.inf, costs / c
        return math.log(c) + 2.0 * math.log(g), costs / c + 2.0 * dg / g

    w0 = np.full(m, 1.0 / m)
    w, _, _ = fw_simplex(value_grad, w0, budget)

    est1, dev1 = con.estimate(w, n_samples, rng)
    upper = est1.mean + MASS_SIGMAS * est1.std_err + dev1
    t = (upper / problem.C) ** 2
    est2, dev2 = con.estimate(w, n_samples, rng)
    root = math.sqrt(t) if t > 0 else 1.0
    scaled = SupEstimate(est2.mean / root, est2.std_err / root, est2.n_samples)
    dev_scaled = dev2 / root
    feasible = bool(t > 0 and scaled.mean + 3.0 * scaled.std_err + dev_scaled <= FEASIBILITY_SLACK * problem.C)
    tau = Allocation.from_dense(arm_set, w * t)
    objective = float(costs @ (w * t))
    return DesignSolution(tau, objective, scaled, dev_scaled, feasible, problem.C)


def _line_root(fprime, hi):
    """Root in [0, hi] of a decreasing derivative (or an endpoint)."""
    if fprime(0.0) <= 0:
        return 0.0
    if fprime(hi) >= 0:
        return hi
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if fprime(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def g_optimal_semi(arm_set: ArmSet, budget: int = 5000, tol: float = 1e-6):
    """Minimize max_x ||x||^2_{A_semi(lam)^{-1}} via away-step Frank-Wolfe on -sum log A_kk.

    The gradient of log det A_semi(lam) with respect to lam_x is
    ||x||^2_{A^{-1}}, and sum_x lam_x ||x||^2 = d, so the duality gap is
    max_x ||x||^2 - d. Exact line searches on the concave log-det.
    """
    if not arm_set.enumerable or not arm_set.binary:
        raise InvalidInputError("g_optimal_semi needs an enumerable binary arm set")
    X = arm_set.arms
    covered = X.max(axis=0) > 0
    if not covered.all():
        raise CoverageError(int(np.flatnonzero(~covered)[0]))
    d = arm_set.d
    m = len(X)
    w = np.full(m, 1.0 / m)
    a = w @ X
    for _ in range(budget):
        with np.errstate(divide="ignore"):
            g = X @ (1.0 / a)
        j = int(np.argmax(g))
        if g[j] <= d + tol:
            break
        supp = np.flatnonzero(w > 0)
        k = supp[int(np.argmin(g[supp]))]
        if g[j] - d >= d - g[k] or w[k] >= 1.0:
            y = X[j]
            diff = y - a
            with np.errstate(divide="ignore"):
                gam = _line_root(lambda s: np.sum(diff / (a + s * diff)), 1.0)
            w *= 1.0 - gam
            w[j] += gam
        else:
            y = X[k]
            diff = a - y
            hi = w[k] / (1.0 - w[k])
            gam = _line_root(lambda s: np.sum(diff / np.maximum(a + s * diff, 1e-300)), hi)
            w *= 1.0 + gam
            w[k] -= gam
            if gam >= hi * (1 - 1e-12):
                w[k] = 0.0
        w = np.maximum(w, 0.0)
        w /= w.sum()
        a = w @ X
    value = float((X @ (1.0 / a)).max())
    return SimplexWeights.from_dense(arm_set, w), value


def gw_ae_design(active_set, budget: int = 200, rng=None, feedback=Feedback.SEMI, n_samples: int = 2000):
    """Shape minimizing E[max_x x^T A^{-1/2} eta]^2 + max_x ||x||^2_{A^{-1}} over the active arms.

    Returns (weights, squared-width estimate, max norm) with the width
    re-estimated on a fresh batch.
    """
    arms = np.atleast_2d(np.asarray(active_set, dtype=float))
    fb = Feedback.parse(feedback)
    rng = np.random.default_rng(0) if rng is None else rng
    family = DirectionFamily.of_arms(arms)
    m = len(arms)
    eta = rng.standard_normal((n_samples, arms.shape[1]))

    def value_grad(w):
        A = design_from_dense(arms, w, fb)
        norms = A.norms_sq(arms)
        j = int(np.argmax(norms))
        grad = arm_gradient(norm_gradient(A, arms[j]), arms)
        val = float(norms[j])
        if not family.trivial:
            vals, V = sup_values(family, A, eta)
            mu = float(vals.mean())
            val += mu * mu
            grad = grad + 2.0 * mu * arm_gradient(width_gradient(A, eta, V), arms)
        return val, grad

    w, _, _ = fw_simplex(value_grad, np.full(m, 1.0 / m), budget if m > 1 else 0)
    A = design_from_dense(arms, w, fb)
    norm = float(A.norms_sq(arms).max())
    if family.trivial:
        gamma = 0.0
    else:
        gamma = max(estimate_sup(family, A, fb, n_samples, rng).mean, 0.0) ** 2
    lam = SimplexWeights.normalize(arms, w, np.arange(m))
    return lam, gamma, norm
