"""Linear maximization oracles, benchmark instances, MINGAP and coordinate covering."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ArmSet, Feedback, Instance, TIE_TOL, is_binary
from .errors import CoverageError, InfeasibleQueryError, InvalidSpecError, NonUniqueOptimumError

INF = 1e18
_FORCED = 1e17
MAX_ENUM = 1 << 16


class LinMaxOracle:
    """argmax_x v^T x over a fixed arm class. Entries of +-INF act as forcing sentinels."""

    d: int
    binary: bool = True

    def argmax(self, v) -> np.ndarray:
        raise NotImplementedError

    def argmax_batch(self, V) -> np.ndarray:
        V = np.atleast_2d(V)
        return np.stack([self.argmax(v) for v in V])

    def enumerate(self) -> np.ndarray | None:
        return None

    @property
    def enumerable(self) -> bool:
        return self.enumerate() is not None

    def has_unique_argmax(self, v) -> bool:
        arms = self.enumerate()
        vals = np.sort(arms @ np.asarray(v, dtype=float))
        return len(vals) < 2 or vals[-1] - vals[-2] > TIE_TOL

    def arm_set(self) -> ArmSet:
        arms = self.enumerate()
        if arms is not None:
            return ArmSet.from_arms(arms)
        k = int(self.argmax(np.ones(self.d)).sum())
        return ArmSet(None, self.d, k=k, binary=True)

    @staticmethod
    def _check(x, v):
        if x @ v < -_FORCED:
            raise InfeasibleQueryError("every feasible arm hits a forced coordinate")
        return x


class EnumerationOracle(LinMaxOracle):
    def __init__(self, arms):
        self.arms = np.array(arms, dtype=float)
        self.arms.setflags(write=False)
        self.d = self.arms.shape[1]
        self.binary = is_binary(self.arms)

    def argmax(self, v):
        v = np.asarray(v, dtype=float)
        x = self.arms[int(np.argmax(self.arms @ v))]
        return self._check(x, v).copy()

    def argmax_batch(self, V):
        V = np.atleast_2d(V)
        return self.arms[np.argmax(V @ self.arms.T, axis=1)]

    def enumerate(self):
        return self.arms


def _top_k_rows(V, k):
    order = np.argsort(-V, axis=-1, kind="stable")[..., :k]
    X = np.zeros(V.shape)
    np.put_along_axis(X, order, 1.0, axis=-1)
    return X


def _combination_rows(m, k):
    combos = list(itertools.combinations(range(m), k))
    X = np.zeros((len(combos), m))
    for r, c in enumerate(combos):
        X[r, list(c)] = 1.0
    return X


def _top_k_unique(v, k):
    if k == len(v):
        return True
    s = np.sort(v)[::-1]
    return s[k - 1] - s[k] > TIE_TOL


class TopKOracle(LinMaxOracle):
    """All subsets of size exactly k of [m]."""

    def __init__(self, m: int, k: int):
        if not 1 <= k <= m:
            raise InvalidSpecError("top-k needs 1 <= k <= m")
        self.m, self.k, self.d = m, k, m

    def argmax(self, v):
        v = np.asarray(v, dtype=float)
        return self._check(_top_k_rows(v, self.k), v)

    def argmax_batch(self, V):
        return _top_k_rows(np.atleast_2d(np.asarray(V, dtype=float)), self.k)

    def enumerate(self):
        if math.comb(self.m, self.k) > MAX_ENUM:
            return None
        if not hasattr(self, "_arms"):
            self._arms = _combination_rows(self.m, self.k)
        return self._arms

    def has_unique_argmax(self, v):
        return _top_k_unique(np.asarray(v, dtype=float), self.k)


class ProductTopKOracle(LinMaxOracle):
    """Top-k of the first m coordinates times top-l of the next n."""

    def __init__(self, m: int, k: int, n: int, l: int):
        self.a, self.b = TopKOracle(m, k), TopKOracle(n, l)
        self.m, self.k, self.n, self.l = m, k, n, l
        self.d = m + n

    def argmax(self, v):
        v = np.asarray(v, dtype=float)
        x = np.concatenate([_top_k_rows(v[:self.m], self.k), _top_k_rows(v[self.m:], self.l)])
        return self._check(x, v)

    def argmax_batch(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return np.hstack([_top_k_rows(V[:, :self.m], self.k), _top_k_rows(V[:, self.m:], self.l)])

    def enumerate(self):
        A, B = self.a.enumerate(), self.b.enumerate()
        if A is None or B is None or len(A) * len(B) > MAX_ENUM:
            return None
        return np.hstack([np.repeat(A, len(B), axis=0), np.tile(B, (len(A), 1))])

    def has_unique_argmax(self, v):
        v = np.asarray(v, dtype=float)
        return _top_k_unique(v[:self.m], self.k) and _top_k_unique(v[self.m:], self.l)


class TopKPlusOnesOracle(LinMaxOracle):
    """Top-k subsets of [d] plus the all-ones vector (listed last)."""

    def __init__(self, d: int, k: int):
        self.topk = TopKOracle(d, k)
        self.d, self.k = d, k

    def argmax(self, v):
        v = np.asarray(v, dtype=float)
        x = _top_k_rows(v, self.k)
        if self.k < self.d and v.sum() > x @ v:
            x = np.ones(self.d)
        return self._check(x, v)

    def argmax_batch(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        X = _top_k_rows(V, self.k)
        if self.k < self.d:
            ones = V.sum(axis=1) > np.einsum("ij,ij->i", X, V)
            X[ones] = 1.0
        return X

    def enumerate(self):
        A = self.topk.enumerate()
        if A is None or len(A) + 1 > MAX_ENUM:
            return None
        if self.k == self.d:
            return A
        return np.vstack([A, np.ones((1, self.d))])

    def has_unique_argmax(self, v):
        v = np.asarray(v, dtype=float)
        if not _top_k_unique(v, self.k):
            return False
        return self.k == self.d or abs(v.sum() - _top_k_rows(v, self.k) @ v) > TIE_TOL


class ResourceAllocationOracle(LinMaxOracle):
    """Arms (S, S) in {0,1}^{2d}: sell to the buyers in S and pay their matching costs."""

    def __init__(self, d: int):
        if d < 1:
            raise InvalidSpecError("resource allocation needs d >= 1")
        self.n_items = d
        self.d = 2 * d

    def argmax(self, v):
        v = np.asarray(v, dtype=float)
        s = (v[:self.n_items] + v[self.n_items:]) > 0
        return np.concatenate([s, s]).astype(float)

    def argmax_batch(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        s = (V[:, :self.n_items] + V[:, self.n_items:]) > 0
        return np.hstack([s, s]).astype(float)

    def enumerate(self):
        if 2 ** self.n_items > MAX_ENUM:
            return None
        if not hasattr(self, "_arms"):
            S = np.array(list(itertools.product([0.0, 1.0], repeat=self.n_items)))
            self._arms = np.hstack([S, S])
        return self._arms

    def has_unique_argmax(self, v):
        v = np.asarray(v, dtype=float)
        return bool(np.all(np.abs(v[:self.n_items] + v[self.n_items:]) > TIE_TOL))


class CountingOracle(LinMaxOracle):
    """Wraps an oracle and counts calls (a batch of n queries counts n)."""

    def __init__(self, inner: LinMaxOracle):
        self.inner = inner
        self.d = inner.d
        self.binary = inner.binary
        self.calls = 0

    def argmax(self, v):
        self.calls += 1
        return self.inner.argmax(v)

    def argmax_batch(self, V):
        V = np.atleast_2d(V)
        self.calls += len(V)
        return self.inner.argmax_batch(V)

    def enumerate(self):
        return self.inner.enumerate()

    def has_unique_argmax(self, v):
        return self.inner.has_unique_argmax(v)


def argmax(oracle: LinMaxOracle, v) -> np.ndarray:
    return oracle.argmax(v)


def mingap(theta_hat, oracle: LinMaxOracle, two_sided: bool = False):
    """Empirical gap between the leader and its best competitor.

    The default masks each leader coordinate in turn (one oracle call per
    coordinate). ``two_sided`` also forces in every coordinate outside the
    leader, which reaches supersets of the leader too; the result is then the
    exact second-best gap. Non-binary classes are handled by enumeration.
    """
    v = np.asarray(theta_hat, dtype=float)
    leader = oracle.argmax(v)
    base = float(leader @ v)
    if not oracle.binary:
        arms = oracle.enumerate()
        vals = arms @ v
        other = np.any(arms != leader, axis=1)
        if not other.any():
            return math.inf, leader
        return max(0.0, base - float(vals[other].max())), leader
    gap = math.inf
    coords = range(len(v)) if two_sided else np.flatnonzero(leader)
    # forcing a coordinate in with +INF would swamp the other coordinates in
    # floating point; any bonus above 2 |v|_1 already forces it for binary arms
    bonus = 2.0 * float(np.abs(v).sum()) + 1.0
    for i in coords:
        w = v.copy()
        inside = leader[i] == 1
        w[i] = -INF if inside else bonus
        try:
            alt = oracle.argmax(w)
        except InfeasibleQueryError:
            continue
        if (alt[i] == 1) == inside:
            continue
        gap = min(gap, max(0.0, base - float(alt @ v)))
    return gap, leader


def cover_coordinates(oracle: LinMaxOracle, d: int | None = None) -> list:
    """One arm per coordinate containing it (deduplicated, first-seen order)."""
    d = oracle.d if d is None else d
    out, seen = [], set()
    for i in range(d):
        v = np.zeros(d)
        v[i] = INF
        x = oracle.argmax(v)
        if x[i] != 1:
            raise CoverageError(i)
        key = x.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(x)
    return out


KINDS = (
    "explicit",
    "top_k",
    "product_top_k",
    "top_k_plus_ones",
    "resource_allocation",
    "end_of_optimism",
    "optimism_counterexample",
)

_PARAMS = {
    "explicit": ({"arms"}, set()),
    "top_k": ({"m", "k"}, set()),
    "product_top_k": ({"m", "k", "n", "l"}, set()),
    "top_k_plus_ones": ({"d", "k"}, set()),
    "resource_allocation": ({"d"}, {"prices", "costs"}),
    "end_of_optimism": ({"eps"}, set()),
    "optimism_counterexample": ({"m", "eps"}, set()),
}


@dataclass(frozen=True)
class InstanceSpec:
    kind: str
    params: dict = field(default_factory=dict)
    theta: tuple | None = None
    feedback: str | None = None
    seed: int = 0

    @classmethod
    def from_mapping(cls, data: dict) -> "InstanceSpec":
        allowed = {"kind", "params", "theta", "feedback", "seed"}
        extra = set(data) - allowed
        if extra:
            raise InvalidSpecError(f"unknown instance fields: {sorted(extra)}")
        if "kind" not in data:
            raise InvalidSpecError("instance needs a kind")
        theta = data.get("theta")
        return cls(
            kind=str(data["kind"]),
            params=dict(data.get("params") or {}),
            theta=None if theta is None else tuple(float(t) for t in theta),
            feedback=data.get("feedback"),
            seed=int(data.get("seed", 0)),
        )

    def with_param(self, name: str, value) -> "InstanceSpec":
        req, opt = _PARAMS.get(self.kind, (set(), set()))
        if name not in req | opt:
            raise InvalidSpecError(f"parameter {name!r} does not apply to kind {self.kind!r}")
        return InstanceSpec(self.kind, {**self.params, name: value}, self.theta, self.feedback, self.seed)


def _pos_int(params, name, lo=1):
    try:
        v = int(params[name])
    except (TypeError, ValueError):
        raise InvalidSpecError(f"{name} must be an integer") from None
    if v != params[name] or v < lo:
        raise InvalidSpecError(f"{name} must be an integer >= {lo}")
    return v


def _eps(params):
    eps = float(params["eps"])
    if not 0 < eps < 1:
        raise InvalidSpecError("eps must lie in (0, 1)")
    return eps


def build_instance(spec: InstanceSpec):
    """Build the instance and its oracle. Random parameters are drawn from ``spec.seed``."""
    if spec.kind not in KINDS:
        raise InvalidSpecError(f"unknown instance kind {spec.kind!r}")
    req, opt = _PARAMS[spec.kind]
    p = spec.params
    missing, extra = req - set(p), set(p) - req - opt
    if missing or extra:
        raise InvalidSpecError(f"{spec.kind}: missing {sorted(missing)}, unexpected {sorted(extra)}")
    rng = np.random.default_rng(spec.seed)
    theta = None if spec.theta is None else np.asarray(spec.theta, dtype=float)
    feedback = spec.feedback

    if spec.kind == "explicit":
        arms = np.asarray(p["arms"], dtype=float)
        if arms.ndim != 2 or len(arms) == 0:
            raise InvalidSpecError("explicit arms must be a nonempty list of vectors")
        if theta is None:
            raise InvalidSpecError("explicit instances need theta")
        oracle = EnumerationOracle(arms)
        feedback = feedback or ("semi" if oracle.binary else "bandit")
    elif spec.kind == "top_k":
        m, k = _pos_int(p, "m"), _pos_int(p, "k")
        if k > m:
            raise InvalidSpecError("top_k needs k <= m")
        oracle = TopKOracle(m, k)
        theta = rng.uniform(-1, 1, m) if theta is None else theta
    elif spec.kind == "product_top_k":
        m, k, n, l = (_pos_int(p, s) for s in ("m", "k", "n", "l"))
        if k > m or l > n:
            raise InvalidSpecError("product_top_k needs k <= m and l <= n")
        oracle = ProductTopKOracle(m, k, n, l)
        theta = rng.uniform(-1, 1, m + n) if theta is None else theta
    elif spec.kind == "top_k_plus_ones":
        d, k = _pos_int(p, "d"), _pos_int(p, "k")
        if k > d:
            raise InvalidSpecError("top_k_plus_ones needs k <= d")
        oracle = TopKPlusOnesOracle(d, k)
        theta = rng.uniform(0, 1, d) if theta is None else theta
    elif spec.kind == "resource_allocation":
        d = _pos_int(p, "d")
        prices = np.asarray(p["prices"], dtype=float) if "prices" in p else rng.uniform(0, 1, d)
        costs = np.asarray(p["costs"], dtype=float) if "costs" in p else rng.uniform(0, 1, d)
        if prices.shape != (d,) or costs.shape != (d,):
            raise InvalidSpecError("prices and costs need d entries each")
        if np.any(prices < 0) or np.any(prices > 1) or np.any(costs < 0) or np.any(costs > 1):
            raise InvalidSpecError("prices and costs must lie in [0, 1]")
        if theta is not None:
            raise InvalidSpecError("resource_allocation takes prices/costs, not theta")
        oracle = ResourceAllocationOracle(d)
        theta = np.concatenate([prices, -costs])
    elif spec.kind == "end_of_optimism":
        eps = _eps(p)
        oracle = EnumerationOracle([[1.0, 0.0], [0.0, 1.0], [1.0 - eps, 8.0 * eps]])
        theta = np.array([1.0, 0.0]) if theta is None else theta
        feedback = feedback or "bandit"
    else:
        m, eps = _pos_int(p, "m"), _eps(p)
        r = math.isqrt(m)
        if r * r != m:
            raise InvalidSpecError("optimism_counterexample needs a perfect-square m")
        d = 2 * m + r
        if theta is None:
            theta = np.empty(d)
            theta[0] = 1.0
            theta[1:m] = 1.0 - eps
            theta[m:2 * m - 1] = -1.0 + eps
            theta[2 * m - 1:] = -1.0
        arms = np.vstack([np.eye(d)[:m], np.ones((1, d))])
        oracle = EnumerationOracle(arms)

    feedback = Feedback.parse(feedback or "semi")
    if theta.shape != (oracle.d,):
        raise InvalidSpecError(f"theta must have {oracle.d} entries")
    if oracle.enumerable:
        arm_set = ArmSet.from_arms(oracle.enumerate())
    else:
        if not oracle.has_unique_argmax(theta):
            raise NonUniqueOptimumError("optimal arm is not unique")
        arm_set = oracle.arm_set()
    return Instance(arm_set, theta, feedback, oracle), oracle
