"""Arms, instances, allocations, design matrices, feedback simulation and estimators."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidInputError, NonUniqueOptimumError, SingularDesignError

TIE_TOL = 1e-12
ESTIMATION_RIDGE = 1e-10
_RANK_TOL = 1e-12


class Feedback(str, enum.Enum):
    BANDIT = "bandit"
    SEMI = "semi"

    @classmethod
    def parse(cls, value) -> "Feedback":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(f"unknown feedback kind {value!r}") from None


def is_binary(a) -> bool:
    a = np.asarray(a)
    return bool(np.all((a == 0) | (a == 1)))


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ArmSet:
    """Ordered arm list. ``arms`` is None for classes only reachable through an oracle."""

    arms: np.ndarray | None
    d: int
    k: int | None = None
    binary: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError("dimension must be positive")
        if self.arms is None:
            return
        arms = np.array(self.arms, dtype=float)
        if arms.ndim != 2 or arms.shape[0] == 0:
            raise InvalidInputError("arm set must be a nonempty 2-D array")
        if arms.shape[1] != self.d:
            raise InvalidInputError(f"arms have dimension {arms.shape[1]}, expected {self.d}")
        if not np.all(np.isfinite(arms)):
            raise InvalidInputError("arms must be finite")
        if len(np.unique(arms, axis=0)) != len(arms):
            raise InvalidInputError("arms must be pairwise distinct")
        binary = is_binary(arms)
        object.__setattr__(self, "arms", _readonly(arms))
        object.__setattr__(self, "binary", binary)
        object.__setattr__(self, "k", int(arms.sum(axis=1).max()) if binary else None)

    @classmethod
    def from_arms(cls, arms) -> "ArmSet":
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        return cls(arms, arms.shape[1])

    @property
    def enumerable(self) -> bool:
        return self.arms is not None

    @property
    def m(self) -> int:
        if self.arms is None:
            raise InvalidInputError("arm set is not enumerable")
        return len(self.arms)

    @cached_property
    def _lookup(self):
        return {row.tobytes(): i for i, row in enumerate(self.arms)}

    def index_of(self, x) -> int:
        x = np.asarray(x, dtype=float)
        try:
            return self._lookup[x.tobytes()]
        except KeyError:
            raise InvalidInputError("vector is not an arm of this set") from None

    def key(self, x):
        """Stable hashable identifier: the arm index when enumerable, else its support."""
        if self.enumerable:
            return self.index_of(x)
        x = np.asarray(x)
        if self.binary:
            return tuple(int(i) for i in np.flatnonzero(x))
        return tuple(float(v) for v in x)


@dataclass(frozen=True, eq=False)
class Allocation:
    """Nonnegative weights on a finite list of arms; ``total`` is the scalar mass."""

    points: np.ndarray
    weights: np.ndarray
    indices: np.ndarray | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.array(self.points, dtype=float))
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(P) != len(w):
            raise InvalidInputError("points and weights differ in length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", _readonly(P))
        object.__setattr__(self, "weights", _readonly(w))
        if self.indices is not None:
            idx = np.array(self.indices, dtype=np.int64).reshape(-1)
            if len(idx) != len(w):
                raise InvalidInputError("indices and weights differ in length")
            object.__setattr__(self, "indices", _readonly(idx))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.weights))

    def scaled(self, c: float) -> "Allocation":
        return Allocation(self.points, self.weights * c, self.indices)

    def pruned(self) -> "Allocation":
        keep = self.weights > 0
        idx = None if self.indices is None else self.indices[keep]
        return Allocation(self.points[keep], self.weights[keep], idx)

    def shape(self) -> "SimplexWeights":
        return SimplexWeights.normalize(self.points, self.weights, self.indices)

    def as_dict(self) -> dict:
        if self.indices is not None:
            keys = [int(i) for i in self.indices]
        else:
            keys = [tuple(int(i) for i in np.flatnonzero(p)) for p in self.points]
        out: dict = {}
        for key, w in zip(keys, self.weights):
            out[key] = out.get(key, 0.0) + float(w)
        return out

    @classmethod
    def from_dense(cls, arm_set: ArmSet, weights, drop_zeros: bool = True) -> "Allocation":
        w = np.asarray(weights, dtype=float)
        if w.shape != (arm_set.m,):
            raise InvalidInputError("dense weights must have one entry per arm")
        idx = np.flatnonzero(w > 0) if drop_zeros else np.arange(arm_set.m)
        return cls(arm_set.arms[idx], w[idx], idx)

    def to_dense(self, arm_set: ArmSet) -> np.ndarray:
        idx = self.indices
        if idx is None:
            idx = np.array([arm_set.index_of(p) for p in self.points], dtype=np.int64)
        out = np.zeros(arm_set.m)
        np.add.at(out, idx, self.weights)
        return out


class SimplexWeights(Allocation):
    """Allocation whose weights sum to one."""

    def __post_init__(self):
        super().__post_init__()
        if abs(self.weights.sum() - 1.0) > 1e-12 * max(1, len(self.weights)):
            raise InvalidInputError("simplex weights must sum to 1")

    @classmethod
    def normalize(cls, points, weights, indices=None) -> "SimplexWeights":
        w = np.asarray(weights, dtype=float)
        s = w.sum()
        if not s > 0:
            raise InvalidInputError("cannot normalize zero mass")
        return cls(points, w / s, indices)

    @classmethod
    def from_dense(cls, arm_set: ArmSet, weights, drop_zeros: bool = True) -> "SimplexWeights":
        a = Allocation.from_dense(arm_set, weights, drop_zeros)
        return cls.normalize(a.points, a.weights, a.indices)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Sum of weighted outer products (bandit) or only its diagonal (semi-bandit)."""

    kind: Feedback
    values: np.ndarray

    def dense(self) -> np.ndarray:
        return np.diag(self.values) if self.kind is Feedback.SEMI else self.values.copy()

    @cached_property
    def _eig(self):
        evals, evecs = np.linalg.eigh(self.values)
        cut = _RANK_TOL * max(evals.max(), 0.0)
        evals = np.where(evals > cut, evals, 0.0)
        return evals, evecs

    @property
    def rank(self) -> int:
        if self.kind is Feedback.SEMI:
            return int(np.count_nonzero(self.values > 0))
        return int(np.count_nonzero(self._eig[0]))

    def _power(self, p):
        if self.kind is Feedback.SEMI:
            a = self.values
            out = np.zeros_like(a)
            pos = a > 0
            out[pos] = a[pos] ** p
            return out
        evals, evecs = self._eig
        f = np.zeros_like(evals)
        pos = evals > 0
        f[pos] = evals[pos] ** p
        return (evecs * f) @ evecs.T

    def inv_sqrt(self) -> np.ndarray:
        """A^{-1/2} on the range of A (pseudo-inverse semantics)."""
        return self._power(-0.5)

    def pinv(self) -> np.ndarray:
        return self._power(-1.0)

    def check_range(self, directions, what="direction") -> None:
        """Raise if some direction leaves the range of A (widths would be infinite)."""
        Z = np.atleast_2d(directions)
        if self.kind is Feedback.SEMI:
            bad = np.any(Z[:, self.values <= 0] != 0, axis=1)
        else:
            evals, evecs = self._eig
            null = evecs[:, evals == 0]
            resid = np.linalg.norm(Z @ null, axis=1)
            bad = resid > 1e-9 * np.maximum(1.0, np.linalg.norm(Z, axis=1))
        if np.any(bad):
            raise SingularDesignError(f"design does not cover every {what}", rank=self.rank)

    def norms_sq(self, X) -> np.ndarray:
        """Row-wise x^T A^{-1} x."""
        X = np.atleast_2d(X)
        if self.kind is Feedback.SEMI:
            return (X * X) @ self._power(-1.0)
        return np.einsum("ij,jk,ik->i", X, self.pinv(), X)


def design_matrix(lam: Allocation, feedback, arm_set: ArmSet | None = None) -> DesignMatrix:
    feedback = Feedback.parse(feedback)
    P, w = lam.points, lam.weights
    if arm_set is not None and P.shape[1] != arm_set.d:
        raise InvalidInputError(f"allocation dimension {P.shape[1]} != arm dimension {arm_set.d}")
    if feedback is Feedback.SEMI:
        if not is_binary(P):
            raise InvalidInputError("semi-bandit design needs binary arms")
        return DesignMatrix(feedback, w @ P)
    return DesignMatrix(feedback, (P.T * w) @ P)


@dataclass(frozen=True, eq=False)
class Instance:
    """Arm set, hidden parameter and feedback model."""

    arm_set: ArmSet
    theta_star: np.ndarray
    feedback: Feedback
    oracle: object = None

    def __post_init__(self):
        fb = Feedback.parse(self.feedback)
        object.__setattr__(self, "feedback", fb)
        theta = np.array(self.theta_star, dtype=float).reshape(-1)
        if theta.shape != (self.arm_set.d,):
            raise InvalidInputError("theta dimension does not match arms")
        if np.any(np.abs(theta) > 1 + 1e-12):
            raise InvalidInputError("theta entries must lie in [-1, 1]")
        object.__setattr__(self, "theta_star", _readonly(theta))
        if fb is Feedback.SEMI and not self.arm_set.binary:
            raise InvalidInputError("semi-bandit feedback requires binary arms")
        if self.arm_set.enumerable:
            vals = np.sort(self.arm_set.arms @ theta)
            if len(vals) > 1 and vals[-1] - vals[-2] <= TIE_TOL:
                raise NonUniqueOptimumError("optimal arm is not unique")
        elif self.oracle is None:
            raise InvalidInputError("a non-enumerable instance needs an oracle")

    @property
    def d(self) -> int:
        return self.arm_set.d

    @cached_property
    def best_arm(self) -> np.ndarray:
        if self.arm_set.enumerable:
            return self.arm_set.arms[int(np.argmax(self.arm_set.arms @ self.theta_star))]
        return np.asarray(self.oracle.argmax(self.theta_star), dtype=float)

    @cached_property
    def best_value(self) -> float:
        return float(self.best_arm @ self.theta_star)

    def gap(self, x) -> np.ndarray | float:
        return self.best_value - np.asarray(x, dtype=float) @ self.theta_star


@dataclass(frozen=True)
class GapSummary:
    gaps: np.ndarray
    delta_min: float
    delta_max: float
    best_index: int


def true_gaps(instance: Instance) -> GapSummary:
    if not instance.arm_set.enumerable:
        raise InvalidInputError("true_gaps needs an enumerable arm set")
    vals = instance.arm_set.arms @ instance.theta_star
    order = np.argsort(-vals, kind="stable")
    if len(vals) > 1 and vals[order[0]] - vals[order[1]] <= TIE_TOL:
        raise NonUniqueOptimumError("optimal arm is not unique")
    gaps = vals[order[0]] - vals
    gaps[order[0]] = 0.0
    pos = gaps[gaps > 0]
    dmin = float(pos.min()) if len(pos) else 0.0
    return GapSummary(gaps, dmin, float(gaps.max()), int(order[0]))


@dataclass(frozen=True, eq=False)
class GapState:
    theta_hat: np.ndarray
    leader: np.ndarray
    leader_index: int | None = None
    gaps_hat: np.ndarray | None = None


@dataclass(frozen=True)
class Observation:
    """Bandit: ``coords`` is None and ``values`` has one entry. Semi: one value per active coordinate."""

    coords: np.ndarray | None
    values: np.ndarray


def _as_arm(instance: Instance, arm) -> np.ndarray:
    if np.isscalar(arm) and instance.arm_set.enumerable:
        return instance.arm_set.arms[int(arm)]
    x = np.asarray(arm, dtype=float)
    if x.shape != (instance.d,):
        raise InvalidInputError("arm dimension mismatch")
    return x


def sample_feedback(instance: Instance, arm, rng: np.random.Generator) -> Observation:
    x = _as_arm(instance, arm)
    if instance.feedback is Feedback.SEMI:
        if not is_binary(x):
            raise InvalidInputError("semi-bandit feedback needs a binary arm")
        coords = np.flatnonzero(x)
        return Observation(coords, instance.theta_star[coords] + rng.standard_normal(len(coords)))
    return Observation(None, np.array([x @ instance.theta_star + rng.standard_normal()]))


def least_squares_estimate(history, ridge: float = 0.0) -> np.ndarray:
    """Least squares from (arm, y) pairs. ``ridge`` > 0 regularizes singular Grams."""
    X = np.array([np.asarray(x, dtype=float) for x, _ in history])
    y = np.array([float(np.ravel(v)[0]) if not np.isscalar(v) else float(v) for _, v in history])
    d = X.shape[1]
    G = X.T @ X
    if ridge > 0:
        return np.linalg.solve(G + ridge * np.eye(d), X.T @ y)
    rank = np.linalg.matrix_rank(G)
    if rank < d:
        raise SingularDesignError("Gram matrix is singular", rank=rank)
    return np.linalg.solve(G, X.T @ y)


def coordinate_estimate(history):
    """Per-coordinate means. Unobserved coordinates get estimate 0 and count 0."""
    items = list(history)
    d = len(np.asarray(items[0][0]))
    sums, counts = np.zeros(d), np.zeros(d, dtype=np.int64)
    for x, obs in items:
        vals = obs.values if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
        coords = np.flatnonzero(np.asarray(x))
        sums[coords] += vals
        counts[coords] += 1
    theta = np.divide(sums, counts, out=np.zeros(d), where=counts > 0)
    return theta, counts


class BanditStats:
    """Running Gram matrix and response sum for least squares."""

    def __init__(self, d: int):
        self.gram = np.zeros((d, d))
        self.b = np.zeros(d)
        self.n = 0

    def add(self, x, n: int, total_y: float):
        x = np.asarray(x, dtype=float)
        self.gram += n * np.outer(x, x)
        self.b += x * total_y
        self.n += n

    def estimate(self, ridge: float = ESTIMATION_RIDGE) -> np.ndarray:
        d = len(self.b)
        return np.linalg.solve(self.gram + ridge * np.eye(d), self.b)


class SemiStats:
    """Running per-coordinate counts and sums."""

    def __init__(self, d: int):
        self.counts = np.zeros(d, dtype=np.int64)
        self.sums = np.zeros(d)

    def add(self, x, n: int, totals):
        coords = np.flatnonzero(np.asarray(x))
        self.counts[coords] += n
        self.sums[coords] += totals

    def estimate(self) -> np.ndarray:
        return np.divide(self.sums, self.counts, out=np.zeros(len(self.sums)), where=self.counts > 0)


@dataclass(frozen=True, eq=False)
class RegretTrace:
    cum_regret: np.ndarray
    pulls: dict
    horizon: int

    def __post_init__(self):
        r = np.asarray(self.cum_regret, dtype=float)
        if len(r) != self.horizon:
            raise InvalidInputError("trace length differs from horizon")
        if sum(self.pulls.values()) != self.horizon:
            raise InvalidInputError("pull counts do not sum to horizon")
        if len(r) > 1 and np.any(np.diff(r) < 0):
            raise InvalidInputError("cumulative regret must be nondecreasing")
        object.__setattr__(self, "cum_regret", _readonly(r))

    @property
    def final(self) -> float:
        return float(self.cum_regret[-1]) if self.horizon else 0.0


def delta_max_upper_bound(arm_set: ArmSet, oracle=None) -> float:
    """sqrt(d) times the diameter of the arm set (or a diameter bound for oracle classes)."""
    d = arm_set.d
    if arm_set.enumerable:
        X = arm_set.arms
        sq = np.einsum("ij,ij->i", X, X)
        best = 0.0
        for s in range(0, len(X), 2048):
            blk = sq[s:s + 2048, None] + sq[None, :] - 2 * X[s:s + 2048] @ X.T
            best = max(best, float(blk.max()))
        return float(np.sqrt(d) * np.sqrt(max(best, 0.0)))
    if not arm_set.binary:
        raise InvalidInputError("diameter bound needs an enumerable or binary class")
    k = arm_set.k
    if k is None:
        if oracle is None:
            raise InvalidInputError("diameter bound for an oracle class needs k or an oracle")
        k = int(np.asarray(oracle.argmax(np.ones(d))).sum())
    return float(np.sqrt(d) * np.sqrt(min(d, 2 * k)))
