"""RegretMED: epoch-wise experimental design for regret, and its pure-exploration mode."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import Allocation, BanditStats, Feedback, RegretTrace, SemiStats, delta_max_upper_bound
from ..design_full import DesignProblem, Variant, constraint_constant, solve_design
from ..errors import ConfigError, InvalidInputError
from ..oracle_opt import HeuristicConfig, OracleSolverConfig, RelaxedProblem, heuristic_lagrangian, solve_main
from ..oracles import mingap
from ..rounding import ceil_counts, sparsify
from .env import Environment


class Profile(str, enum.Enum):
    FULL = "full"
    EFFICIENT = "efficient"
    HEURISTIC = "heuristic"

    @classmethod
    def parse(cls, v) -> "Profile":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise InvalidInputError(f"unknown RegretMED profile {v!r}") from None


@dataclass
class RegretMEDConfig:
    """Knobs of RegretMED.

    ``delta_max`` is "upper_bound" (sqrt(d) diam), "true" or a number.
    ``constant_scale`` overrides the profile multiplier of the constraint
    constant C. ``per_epoch_refit`` estimates from the current epoch's data
    only instead of all data so far.
    """

    delta_max: str | float = "upper_bound"
    constant_profile: str = "paper"
    constant_scale: float | None = None
    per_epoch_refit: bool = False
    two_sided_mingap: bool = True
    design_budget: int = 150
    mc_samples: int = 1000
    solver: OracleSolverConfig = field(default_factory=OracleSolverConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)


@dataclass(frozen=True, eq=False)
class EpochState:
    ell: int
    eps: float
    leader: np.ndarray
    theta_hat: np.ndarray
    design_total: float
    design_cost: float
    pulls: int
    mingap: float | None
    feasible: bool
    report: dict | None = None


@dataclass(frozen=True, eq=False)
class AgentResult:
    trace: RegretTrace | None
    epochs: list
    final_arm: np.ndarray | None = None
    samples: int | None = None
    extra: dict = field(default_factory=dict)


def resolve_delta_max(spec, env: Environment) -> float:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        if spec <= 0:
            raise ConfigError("delta_max must be positive")
        return float(spec)
    if spec == "upper_bound":
        value = delta_max_upper_bound(env.arm_set, env.oracle)
    elif spec == "true":
        inst = env.instance
        if not inst.arm_set.enumerable:
            raise ConfigError("delta_max 'true' needs an enumerable arm set")
        value = float(np.max(inst.best_value - inst.arm_set.arms @ inst.theta_star))
    else:
        raise ConfigError(f"unknown delta_max option {spec!r}")
    return value


def ell_max(arm_set, delta_max: float, T: int) -> float:
    """log2(max||x|| / min||x|| * (delta_max sqrt(T) + 3)) over nonzero arms."""
    if not arm_set.enumerable:
        raise InvalidInputError("ell_max needs an enumerable arm set")
    norms = np.linalg.norm(arm_set.arms, axis=1)
    norms = norms[norms > 0]
    if len(norms) == 0:
        return 0.0
    return math.log2(norms.max() / norms.min() * (delta_max * math.sqrt(T) + 3.0))


class _Estimator:
    def __init__(self, env: Environment, per_epoch: bool):
        self.env = env
        self.per_epoch = per_epoch
        self.stats = self._fresh()

    def _fresh(self):
        d = self.env.d
        return SemiStats(d) if self.env.feedback is Feedback.SEMI else BanditStats(d)

    def new_epoch(self):
        if self.per_epoch:
            self.stats = self._fresh()

    def pull(self, alloc: Allocation) -> int:
        """Sparsify, round up and pull in allocation order. Returns the number of pulls made."""
        if alloc.support_size == 0 or alloc.total <= 0:
            return 0
        sparse = sparsify(alloc, self.env.feedback, self.env.arm_set if alloc.indices is not None else None)
        done = 0
        for x, c in zip(sparse.points, ceil_counts(sparse.weights)):
            n, stat = self.env.pull(x, int(c))
            if n:
                self.stats.add(x, n, stat)
                done += n
        return done

    def estimate(self) -> np.ndarray:
        return self.stats.estimate()


def _estimated_gaps(theta, leader, points):
    return np.maximum((leader - points) @ theta, 0.0)


def _design(env, profile, cfg, ell, eps, leader, theta, gaps, delta, C, rng):
    """Returns (allocation, feasible, report-dict) for one epoch."""
    fb = env.feedback
    if profile is Profile.FULL:
        if not env.arm_set.enumerable:
            raise InvalidInputError("the full profile needs an enumerable arm set")
        prob = DesignProblem(eps, gaps, leader, delta, ell, fb, Variant.FULL, C)
        sol = solve_design(prob, env.arm_set, cfg.design_budget, rng, cfg.mc_samples)
        return sol.allocation, sol.feasible, {"objective": sol.objective}
    if fb is not Feedback.SEMI:
        raise InvalidInputError(f"the {profile.value} profile needs semi-bandit feedback")
    prob = RelaxedProblem(leader, theta, eps, C)
    if profile is Profile.EFFICIENT:
        rep = solve_main(max(env.T, 2), delta, prob, cfg.solver, env.oracle, rng)
        if not rep.feasible:
            return None, False, rep.to_record()
        lam = rep.lambda_bar
        return Allocation(lam.points, lam.weights * rep.tau_bar), True, rep.to_record()
    sol = heuristic_lagrangian(prob, env.T, cfg.heuristic, env.oracle, rng)
    return sol.allocation, True, {"objective": sol.objective, "heuristic": True,
                                  "constraint_ok": sol.feasible}


def regret_med(env: Environment, delta: float, profile="full", config: RegretMEDConfig | None = None,
               rng=None) -> AgentResult:
    """Run RegretMED for the environment's horizon; every step is accounted in the trace."""
    config = config or RegretMEDConfig()
    profile = Profile.parse(profile)
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    rng = np.random.default_rng(0) if rng is None else rng
    d = env.d
    dmax = resolve_delta_max(config.delta_max, env)
    variant = Variant.FULL if profile is Profile.FULL else Variant.RELAXED
    est = _Estimator(env, config.per_epoch_refit)
    theta = np.zeros(d)
    leader = np.zeros(d)
    enum_arms = env.arm_set.arms if env.arm_set.enumerable else None
    gaps = None if enum_arms is None else np.zeros(len(enum_arms))
    epochs = []
    ell = 1
    while env.remaining > 0 and dmax > 0:
        eps = dmax * 2.0 ** (-ell)
        C = constraint_constant(variant, ell, delta, config.constant_profile, config.constant_scale)
        alloc, feasible, report = _design(env, profile, config, ell, eps, leader, theta, gaps, delta, C, rng)
        if not feasible:
            if ell == 1:
                raise ConfigError("epoch-1 design is infeasible: C is too small for this horizon")
            epochs.append(EpochState(ell, eps, leader, theta, 0.0, math.inf, 0, None, False, report))
            break
        cost = float((eps + _estimated_gaps(theta, leader, alloc.points)) @ alloc.weights) \
            if alloc.support_size else 0.0
        if cost > env.T * eps:
            epochs.append(EpochState(ell, eps, leader, theta, alloc.total, cost, 0, None, True, report))
            break
        est.new_epoch()
        pulled = est.pull(alloc)
        theta = est.estimate()
        leader = env.oracle.argmax(theta)
        if enum_arms is not None:
            gaps = _estimated_gaps(theta, leader, enum_arms)
        mg, _ = mingap(theta, env.oracle, two_sided=config.two_sided_mingap)
        epochs.append(EpochState(ell, eps, leader, theta, alloc.total, cost, pulled, mg, True, report))
        if mg > 2 * eps:
            break
        ell += 1
    final = env.oracle.argmax(theta)
    env.pull(final, env.remaining)
    return AgentResult(env.trace(), epochs, final)


@dataclass
class PureExploreConfig:
    delta_max: str | float = "upper_bound"
    constant_profile: str = "paper"
    constant_scale: float | None = None
    two_sided_mingap: bool = True
    design_budget: int = 150
    mc_samples: int = 1000
    max_samples: int = 10 ** 12


def pure_explore(env: Environment, delta: float, config: PureExploreConfig | None = None, rng=None) -> AgentResult:
    """Best-arm identification: design, pull, stop once the empirical gap reaches 3 eps / 2.

    Each epoch pulls the sparsified design once; when the stopping rule fails,
    the gap estimates are refreshed from the same cumulative estimate.
    """
    config = config or PureExploreConfig()
    if env.feedback is not Feedback.SEMI:
        raise InvalidInputError("pure exploration needs semi-bandit feedback")
    if not env.arm_set.enumerable:
        raise InvalidInputError("pure exploration needs an enumerable arm set")
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    rng = np.random.default_rng(0) if rng is None else rng
    arms = env.arm_set.arms
    dmax = resolve_delta_max(config.delta_max, env)
    if dmax <= 0:
        # every arm is optimal: nothing to identify
        return AgentResult(None, [], env.oracle.argmax(np.zeros(env.d)), 0)
    est = _Estimator(env, False)
    theta = np.zeros(env.d)
    gaps = np.zeros(len(arms))
    epochs = []
    ell = 1
    while env.remaining > 0:
        leader = env.oracle.argmax(theta)
        eps = dmax * 2.0 ** (-ell)
        C = constraint_constant(Variant.PURE_EXPLORE, ell, delta, config.constant_profile, config.constant_scale)
        prob = DesignProblem(eps, gaps, leader, delta, ell, Feedback.SEMI, Variant.PURE_EXPLORE, C)
        sol = solve_design(prob, env.arm_set, config.design_budget, rng, config.mc_samples)
        pulled = est.pull(sol.allocation)
        theta = est.estimate()
        mg, _ = mingap(theta, env.oracle, two_sided=config.two_sided_mingap)
        epochs.append(EpochState(ell, eps, leader, theta, sol.allocation.total, sol.objective, pulled, mg,
                                 sol.feasible))
        if mg >= 1.5 * eps:
            break
        gaps = _estimated_gaps(theta, env.oracle.argmax(theta), arms)
        ell += 1
    return AgentResult(None, epochs, env.oracle.argmax(theta), env.t)
