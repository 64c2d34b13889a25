"""Oracle-efficient solver for the semi-bandit relaxed design, plus a Lagrangian heuristic.

The relaxed epoch problem, for a fixed horizon T, leader x_bar, estimate
theta_bar and floor beta, is

    min_{tau in [T], lam}  tau * sum_x (beta + theta_bar^T (x_bar - x)) lam_x
    s.t.  E_eta[max_x (x_bar - x)^T A_semi(lam)^{-1/2} eta / (beta + theta_bar^T (x_bar - x))] <= sqrt(tau) C.

``solve_main`` grid-searches tau over powers of two, ``bin_search_tau``
bisects on the objective level, ``mw_feasibility`` decides each level with
multiplicative weights over the two constraints, and ``sfw_lagrangian``
minimizes the weighted Lagrangian by stochastic Frank-Wolfe over a truncated
simplex whose covering arms keep A_semi(lam) >= psi I. Only linear
maximization oracle calls touch the arm class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Allocation, Feedback, SimplexWeights
from .design_full import FEASIBILITY_SLACK, MASS_SIGMAS, DesignSolution
from .errors import InvalidInputError
from .gwidth import DirectionFamily, SupEstimate, sup_values, width_gradient
from .oracles import CountingOracle, cover_coordinates
from .core import DesignMatrix


@dataclass(frozen=True, eq=False)
class RelaxedProblem:
    """Data of one epoch's relaxed design: leader, estimate, floor beta and constant C."""

    x_bar: np.ndarray
    theta_bar: np.ndarray
    beta: float
    C: float

    def __post_init__(self):
        if not self.beta > 0 or not self.C > 0:
            raise InvalidInputError("beta and C must be positive")
        object.__setattr__(self, "x_bar", np.asarray(self.x_bar, dtype=float))
        object.__setattr__(self, "theta_bar", np.asarray(self.theta_bar, dtype=float))


@dataclass(frozen=True, eq=False)
class LagrangeProblem:
    kappa1: float
    kappa2: float
    tau_bar: float
    x_bar: np.ndarray
    theta_bar: np.ndarray
    beta: float
    C: float
    opt_hat: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError("beta must be positive")
        if not (0 <= self.kappa1 <= 1 and 0 <= self.kappa2 <= 1):
            raise InvalidInputError("kappa weights must lie in [0, 1]")

    @classmethod
    def of(cls, relaxed: RelaxedProblem, kappa1, kappa2, tau_bar, opt_hat=0.0):
        return cls(kappa1, kappa2, tau_bar, relaxed.x_bar, relaxed.theta_bar, relaxed.beta, relaxed.C, opt_hat)


@dataclass(frozen=True, eq=False)
class TruncatedSimplex:
    """Distributions over arms with every covering arm at weight >= psi."""

    psi: float
    covering_arms: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covering_arms, dtype=float))
        object.__setattr__(self, "covering_arms", cov)
        if not 0 < self.psi <= 1.0 / cov.shape[1]:
            raise InvalidInputError("psi must lie in (0, 1/d]")
        if np.any(cov.max(axis=0) == 0):
            raise InvalidInputError("covering arms must cover every coordinate")

    @classmethod
    def for_oracle(cls, oracle, psi: float) -> "TruncatedSimplex":
        return cls(psi, np.array(cover_coordinates(oracle)))

    @property
    def n_cover(self) -> int:
        return len(self.covering_arms)

    def vertex_weights(self, arm):
        """Minimizer of a linear cost whose best arm is ``arm``: (points, weights)."""
        c = self.n_cover
        hit = np.flatnonzero(np.all(self.covering_arms == arm, axis=1))
        w = np.full(c, self.psi)
        if len(hit):
            w[hit[0]] = 1.0 - (c - 1) * self.psi
            return self.covering_arms, w
        return np.vstack([self.covering_arms, arm]), np.append(w, 1.0 - c * self.psi)

    def contains(self, points, weights, tol: float = 1e-12) -> bool:
        P = np.atleast_2d(points)
        w = np.asarray(weights, dtype=float)
        if np.any(w < -tol) or abs(w.sum() - 1.0) > tol * max(1, len(w)):
            return False
        for cov in self.covering_arms:
            mass = w[np.all(P == cov, axis=1)].sum()
            if mass < self.psi * (1 - 1e-9):
                return False
        return bool(np.all(w @ P >= self.psi * (1 - 1e-9)))


@dataclass
class OracleSolverConfig:
    """Caps and constants of the oracle-efficient stack.

    The theoretical schedules for MW rounds, SFW iterations and batch sizes
    are astronomically large; each is capped and the audit records when a cap
    binds. With a binding round cap the MW step uses the standard rate for a
    fixed number of rounds, normalized by the largest constraint magnitude
    observed so far (``adaptive_rate``).
    """

    max_mw_rounds: int = 2000
    max_sfw_iters: int = 4000
    max_mc_batch: int = 512
    rho_constant: float = 1.0
    batch_constant: float = 1.0
    audit_samples: int = 2000
    psi: float | None = None
    delta_max: float | None = None
    use_enumeration: bool = True
    adaptive_rate: bool = True


@dataclass(frozen=True, eq=False)
class SolverReport:
    tau_bar: float
    lambda_bar: SimplexWeights | None
    objective: float
    constraint: SupEstimate | None
    feasible: bool
    oracle_calls: int
    audit: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "tau_bar": self.tau_bar,
            "objective": self.objective,
            "constraint_mean": None if self.constraint is None else self.constraint.mean,
            "constraint_std_err": None if self.constraint is None else self.constraint.std_err,
            "feasible": self.feasible,
            "oracle_calls": self.oracle_calls,
            "support": 0 if self.lambda_bar is None else len(self.lambda_bar.weights),
            **{f"audit_{k}": v for k, v in self.audit.items()},
        }


class _Iterate:
    """Sparse distribution over arm vectors keyed by their bytes."""

    def __init__(self, points, weights):
        self.pts, self.key = [], {}
        self.w = np.zeros(0)
        self.add(points, weights, 1.0)

    def add(self, points, weights, q):
        """self <- (1 - q) self + q * (points, weights)."""
        self.w = self.w * (1.0 - q)
        extra = []
        for p, wt in zip(np.atleast_2d(points), weights):
            k = p.tobytes()
            if k not in self.key:
                self.key[k] = len(self.pts)
                self.pts.append(np.array(p, dtype=float))
                extra.append(0.0)
            if extra:
                self.w = np.append(self.w, extra)
                extra = []
            self.w[self.key[k]] += q * wt

    @property
    def points(self):
        return np.array(self.pts)

    def design(self) -> DesignMatrix:
        return DesignMatrix(Feedback.SEMI, self.w @ self.points)

    def simplex(self) -> SimplexWeights:
        return SimplexWeights.normalize(self.points, self.w)


def _family(problem, oracle, use_enumeration):
    arms = oracle.enumerate() if use_enumeration else None
    if arms is not None:
        return DirectionFamily.gap_scaled(arms, problem.x_bar, problem.theta_bar, problem.beta)
    return DirectionFamily.from_oracle(oracle, problem.x_bar, problem.theta_bar, problem.beta)


def lagrangian_value(problem: LagrangeProblem, lam: Allocation, eta, family) -> float:
    """Monte-Carlo Lagrangian at lam (weights taken as given, not renormalized)."""
    A = DesignMatrix(Feedback.SEMI, lam.weights @ lam.points)
    cost = problem.beta * lam.weights.sum() + lam.weights @ ((problem.x_bar - lam.points) @ problem.theta_bar)
    vals, _ = sup_values(family, A, eta)
    return problem.kappa1 * (problem.tau_bar * cost - problem.opt_hat) + problem.kappa2 * (
        vals.mean() - math.sqrt(problem.tau_bar) * problem.C)


def lagrangian_direction(problem: LagrangeProblem, A: DesignMatrix, eta, family):
    """Vector u with dL/dlam_y = const - y^T u for every binary arm y.

    The width part follows the chain rule through A_semi: for each sample the
    maximizing x_tilde contributes -1/2 s (x_bar - x_tilde)_k eta_k / a_k^{3/2}
    on coordinate k, where s = 1 / (beta + theta_bar^T (x_bar - x_tilde)).
    """
    _, V = sup_values(family, A, eta)
    G = width_gradient(A, eta, V)
    return problem.kappa1 * problem.tau_bar * problem.theta_bar - problem.kappa2 * G


def lagrangian_gradient(problem: LagrangeProblem, lam: Allocation, eta, family, arms) -> np.ndarray:
    """dL/dlam_y for each row y of ``arms``, with the weights not renormalized."""
    A = DesignMatrix(Feedback.SEMI, lam.weights @ lam.points)
    u = lagrangian_direction(problem, A, eta, family)
    const = problem.kappa1 * problem.tau_bar * (problem.beta + problem.theta_bar @ problem.x_bar)
    return const - np.asarray(arms, dtype=float) @ u


def _batch_size(config, d, psi, q, r, delta):
    want = config.batch_constant * math.log(max(r * r / delta, 2.0)) / (d * psi * psi * q)
    return int(min(config.max_mc_batch, max(2, math.ceil(want)))), want > config.max_mc_batch


def sfw_lagrangian(problem: LagrangeProblem, simplex: TruncatedSimplex, tol: float, delta: float,
                   oracle, rng, config: OracleSolverConfig | None = None, audit: dict | None = None,
                   iters: int | None = None, info: dict | None = None) -> SimplexWeights:
    """Stochastic Frank-Wolfe on the Lagrangian over the truncated simplex.

    When ``info`` is given, info["gap"] receives the Frank-Wolfe duality gap
    at the returned iterate (one more gradient batch), an upper bound on its
    suboptimality up to Monte-Carlo error.
    """
    config = config or OracleSolverConfig()
    d = oracle.d
    psi = simplex.psi
    family = _family(problem, oracle, config.use_enumeration)
    R_theory = 8.0 * d / (problem.beta * psi ** 2.5 * tol)
    R = int(min(config.max_sfw_iters, math.ceil(R_theory))) if iters is None else iters
    if audit is not None and R < R_theory:
        audit["sfw_cap"] = True
    cov = simplex.covering_arms
    it = _Iterate(cov, np.full(len(cov), 1.0 / len(cov)))

    def direction(p):
        if problem.kappa2 > 0:
            return lagrangian_direction(problem, it.design(), rng.standard_normal((p, d)), family)
        return problem.kappa1 * problem.tau_bar * problem.theta_bar

    p = 2
    for r in range(1, R + 1):
        q = 2.0 / (r + 1)
        p, capped = _batch_size(config, d, psi, q, r, delta)
        if capped and audit is not None:
            audit["batch_cap"] = True
        pts, w = simplex.vertex_weights(oracle.argmax(direction(p)))
        it.add(pts, w, q)
    lam = it.simplex()
    if info is not None:
        u = direction(p)
        pts, w = simplex.vertex_weights(oracle.argmax(u))
        info["gap"] = max(0.0, float((w @ pts - lam.weights @ lam.points) @ u))
    return lam


def _estimate_ratio_sup(problem, lam: SimplexWeights, n, rng, oracle, config):
    family = _family(problem, oracle, config.use_enumeration)
    A = DesignMatrix(Feedback.SEMI, lam.weights @ lam.points)
    vals, _ = sup_values(family, A, rng.standard_normal((n, oracle.d)))
    return SupEstimate.of(vals)


def _costs(problem, lam: SimplexWeights) -> float:
    return float(lam.weights @ ((problem.x_bar - lam.points) @ problem.theta_bar))


def _objective(problem, lam: SimplexWeights, tau_bar: float) -> float:
    """tau_bar * sum_x lam_x (beta + theta_bar^T (x_bar - x))."""
    return tau_bar * (problem.beta + _costs(problem, lam))


@dataclass
class SolverContext:
    problem: RelaxedProblem
    T: int
    simplex: TruncatedSimplex
    tol: float
    config: OracleSolverConfig
    oracle: object
    rng: np.random.Generator
    audit: dict = field(default_factory=dict)
    mw_calls: int = 0

    @property
    def d(self):
        return self.oracle.d

    @classmethod
    def build(cls, problem: RelaxedProblem, T: int, config: OracleSolverConfig | None, oracle, rng):
        """Shared state of one solve: truncated simplex, tol, counting oracle and audit."""
        config = config or OracleSolverConfig()
        counting = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
        d = oracle.d
        dmax = config.delta_max if config.delta_max is not None else 2.0 * d
        psi = config.psi if config.psi is not None else default_psi(d, T, dmax)
        simplex = TruncatedSimplex(min(psi, 1.0 / d), np.array(cover_coordinates(counting)))
        tol = (math.sqrt(2) - 1) * problem.C / 4
        return cls(problem, T, simplex, tol, config, counting, rng)


def _rho(ctx: SolverContext):
    d, psi = ctx.d, ctx.simplex.psi
    return max(2.0 * d * ctx.T, ctx.config.rho_constant * d / (ctx.problem.beta * math.sqrt(psi)))


def mw_feasibility(tau_bar: float, opt_hat: float, delta: float, ctx: SolverContext):
    """Multiplicative weights over {objective <= opt_hat, width <= sqrt(tau_bar) C}.

    Returns (feasible, lam_bar). Infeasible when a round's mixed constraint,
    less the SFW duality gap, exceeds 2 tol. When the round cap binds the
    averaged iterate carries no guarantee, so points are accepted only after
    an audit on a fresh batch: both constraints within 4 tol. Each round's
    SFW iterate is audited as soon as its own estimates pass, and the
    average is audited at the end.
    """
    ctx.mw_calls += 1
    cfg, tol, pr = ctx.config, ctx.tol, ctx.problem
    rho = _rho(ctx)
    R_theory = 16.0 * rho ** 2 * math.log(2) / tol ** 2
    R = int(min(cfg.max_mw_rounds, math.ceil(R_theory)))
    capped = R < R_theory
    if capped:
        ctx.audit["mw_cap"] = True
    lr = min(tol / (4.0 * rho), 0.5)
    w = np.ones(2)
    acc = {}
    scale = tol
    rhs = math.sqrt(tau_bar) * pr.C
    n_sup = int(min(cfg.max_mc_batch, max(2, math.ceil(
        cfg.batch_constant * math.log(3 * R / delta) * ctx.d / (pr.beta ** 2 * ctx.simplex.psi * tol ** 2)))))

    def passes_audit(lam):
        if _objective(pr, lam, tau_bar) - opt_hat > 4 * tol:
            return False
        est = _estimate_ratio_sup(pr, lam, cfg.audit_samples, ctx.rng, ctx.oracle, cfg)
        if est.mean - rhs > 4 * tol:
            ctx.audit["rejected_by_audit"] = ctx.audit.get("rejected_by_audit", 0) + 1
            return False
        return True

    rounds = 0
    for r in range(1, R + 1):
        p = w / w.sum()
        lp = LagrangeProblem.of(pr, p[0], p[1], tau_bar, opt_hat)
        info = {}
        lam = sfw_lagrangian(lp, ctx.simplex, tol, delta / (2 * R), ctx.oracle, ctx.rng, cfg, ctx.audit, info=info)
        h1 = _objective(pr, lam, tau_bar) - opt_hat
        h2 = _estimate_ratio_sup(pr, lam, n_sup, ctx.rng, ctx.oracle, cfg).mean - rhs
        rounds = r
        if p[0] * h1 + p[1] * h2 - info["gap"] > 2 * tol:
            ctx.audit["mw_rounds_last"] = rounds
            return False, lam
        if capped and h1 <= 4 * tol and h2 <= 4 * tol and passes_audit(lam):
            ctx.audit["mw_rounds_last"] = rounds
            return True, lam
        for pt, wt in zip(lam.points, lam.weights):
            k = pt.tobytes()
            acc[k] = (pt, acc.get(k, (pt, 0.0))[1] + wt)
        if capped and cfg.adaptive_rate:
            scale = max(scale, abs(h1), abs(h2))
            step = min(0.5, math.sqrt(math.log(2) / R)) / scale
        else:
            step = lr
        w = np.maximum(w * (1.0 + step * np.array([h1, h2])), 1e-300)
    ctx.audit["mw_rounds_last"] = rounds
    pts = np.array([v[0] for v in acc.values()])
    lam_bar = SimplexWeights.normalize(pts, np.array([v[1] for v in acc.values()]))
    if capped and not passes_audit(lam_bar):
        return False, lam_bar
    return True, lam_bar


def bin_search_tau(tau_bar: float, delta: float, ctx: SolverContext):
    """Bisect on the objective level between 0 and 2Td until the bracket is below tol.

    HIGH is raised to tau_bar (beta + 2 |theta_bar|_1) when that is larger, so
    it always bounds the objective.
    """
    T, d, tol, pr = ctx.T, ctx.d, ctx.tol, ctx.problem
    low = 0.0
    high = max(2.0 * T * d, tau_bar * (pr.beta + 2.0 * np.abs(pr.theta_bar).sum()))
    depth = math.ceil(math.log2(high / tol)) + 1
    sub_delta = delta / depth
    feasible, lam = mw_feasibility(tau_bar, high, sub_delta, ctx)
    if not feasible:
        return False, lam
    while high - low >= tol:
        mid = 0.5 * (low + high)
        ok, cand = mw_feasibility(tau_bar, mid, sub_delta, ctx)
        # feasible at level mid means the optimum lies below it; keep the
        # point certified at the current HIGH rather than re-solving there
        if ok:
            high, lam = mid, cand
        else:
            low = mid
    return True, lam


def default_psi(d: int, T: int, delta_max: float) -> float:
    return min(1.0 / (4 * d * delta_max * T), 1.0 / (4 * d))


def solve_main(T: int, delta: float, problem: RelaxedProblem, config: OracleSolverConfig | None,
               oracle, rng) -> SolverReport:
    """Grid search over tau_bar = 2^k <= T; returns (2 tau_bar_k, lam_k) for the best feasible k."""
    if T < 2:
        raise InvalidInputError("solve_main needs T >= 2")
    ctx = SolverContext.build(problem, T, config, oracle, rng)
    config, counting = ctx.config, ctx.oracle
    K = int(math.floor(math.log2(T)))
    results = []
    for k in range(1, K + 1):
        tb = 2.0 ** k
        ok, lam = bin_search_tau(tb, delta / max(1.0, math.log2(T)), ctx)
        if ok and lam is not None:
            results.append((_objective(problem, lam, tb), tb, lam))
    ctx.audit["mw_invocations"] = ctx.mw_calls
    if not results:
        return SolverReport(0.0, None, math.inf, None, False, counting.calls, dict(ctx.audit))
    _, tb, lam = min(results, key=lambda t: (t[0], t[1]))
    tau_bar = 2.0 * tb
    objective = _objective(problem, lam, tau_bar)
    est = _estimate_ratio_sup(problem, lam, config.audit_samples, rng, counting, config)
    return SolverReport(tau_bar, lam, objective, est, True, counting.calls, dict(ctx.audit))


@dataclass
class HeuristicConfig:
    sfw_iters: int = 200
    mc_batch: int = 256
    passes: int = 2
    audit_samples: int = 4000
    psi: float | None = None
    use_enumeration: bool = True


def heuristic_lagrangian(problem: RelaxedProblem, T: int, config: HeuristicConfig | None,
                         oracle, rng, delta_max: float | None = None) -> DesignSolution:
    """Lagrangian SFW with a fixed penalty weight, then mass rescaled by homogeneity.

    For a shape lam the constraint of tau * lam is g(lam) / sqrt(tau), so the
    mass is set to tau = (g / C)^2. The penalty weight mu = 2 c tau / g (the
    multiplier of the constraint at the current shape) is frozen for each SFW
    pass and recomputed between passes. No approximation guarantee.
    """
    config = config or HeuristicConfig()
    d = oracle.d
    fam = _family(problem, oracle, config.use_enumeration)
    if fam.enumerable and fam.trivial:
        z = SupEstimate(0.0, 0.0, config.audit_samples)
        return DesignSolution(Allocation(np.zeros((0, d)), np.zeros(0)), 0.0, z, 0.0, True, problem.C)
    dmax = delta_max if delta_max is not None else 2.0 * d
    cov = np.array(cover_coordinates(oracle))
    psi = config.psi if config.psi is not None else default_psi(d, max(T, 1), dmax)
    simplex = TruncatedSimplex(min(psi, 1.0 / d), cov)
    scfg = OracleSolverConfig(max_sfw_iters=config.sfw_iters, max_mc_batch=config.mc_batch,
                              use_enumeration=config.use_enumeration)

    def evaluate(lam, n):
        g = _estimate_ratio_sup(problem, lam, n, rng, oracle, scfg)
        c = problem.beta + _costs(problem, lam)
        return g, c

    lam = SimplexWeights.normalize(cov, np.ones(len(cov)))
    g, c = evaluate(lam, config.mc_batch)
    for _ in range(config.passes):
        gm = max(g.mean, 1e-12)
        tau = (gm / problem.C) ** 2
        mu = 2.0 * c * tau / gm
        lp = LagrangeProblem.of(problem, 1.0 / (1.0 + mu), mu / (1.0 + mu), tau)
        lam = sfw_lagrangian(lp, simplex, 1.0, 1.0, oracle, rng, scfg, iters=config.sfw_iters)
        g, c = evaluate(lam, config.mc_batch)
    g1, c = evaluate(lam, config.audit_samples)
    upper = g1.mean + MASS_SIGMAS * g1.std_err
    tau = (upper / problem.C) ** 2 if upper > 0 else 0.0
    g2, _ = evaluate(lam, config.audit_samples)
    root = math.sqrt(tau) if tau > 0 else 1.0
    scaled = SupEstimate(g2.mean / root, g2.std_err / root, g2.n_samples)
    feasible = bool(tau > 0 and scaled.mean + 3 * scaled.std_err <= FEASIBILITY_SLACK * problem.C)
    alloc = Allocation(lam.points, lam.weights * tau)
    return DesignSolution(alloc, 2.0 * tau * c, scaled, 0.0, feasible, problem.C)
