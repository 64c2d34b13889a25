"""Gaussian-width estimates, TIS confidence widths and instance complexity diagnostics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from ._fw import fw_simplex
from .core import Allocation, DesignMatrix, Feedback, Instance, design_matrix, true_gaps
from .errors import InvalidInputError, SingularDesignError

_CHUNK = 1 << 22


@dataclass(frozen=True)
class SupEstimate:
    mean: float
    std_err: float
    n_samples: int

    @classmethod
    def of(cls, values) -> "SupEstimate":
        v = np.asarray(values, dtype=float)
        if len(v) < 2:
            raise InvalidInputError("need at least two Monte-Carlo samples")
        return cls(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), len(v))


@dataclass(frozen=True)
class ConfidenceWidth:
    gaussian_width_term: float
    deviation_term: float
    total: float
    delta: float


@dataclass(frozen=True, eq=False)
class DirectionFamily:
    """Directions z_x scaled by s_x; the process is sup_x s_x z_x^T A^{-1/2} eta.

    Enumerable families store the directions explicitly. Oracle families use
    z_x = x_bar - x, s_x = 1 / (beta + theta_bar^T (x_bar - x)) over the
    oracle's class.
    """

    directions: np.ndarray | None = None
    scales: np.ndarray | None = None
    x_bar: np.ndarray | None = None
    theta_bar: np.ndarray | None = None
    beta: float | None = None
    oracle: object = None

    @classmethod
    def of_arms(cls, arms) -> "DirectionFamily":
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        return cls(arms, np.ones(len(arms)))

    @classmethod
    def gap_scaled(cls, arms, x_bar, theta_bar, beta) -> "DirectionFamily":
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        x_bar = np.asarray(x_bar, dtype=float)
        theta_bar = np.asarray(theta_bar, dtype=float)
        Z = x_bar - arms
        den = beta + Z @ theta_bar
        if np.any(den <= 0):
            raise InvalidInputError("scaled family needs beta + theta_bar^T (x_bar - x) > 0")
        return cls(Z, 1.0 / den, x_bar, theta_bar, float(beta))

    @classmethod
    def from_oracle(cls, oracle, x_bar, theta_bar, beta) -> "DirectionFamily":
        if beta <= 0:
            raise InvalidInputError("beta must be positive")
        return cls(None, None, np.asarray(x_bar, float), np.asarray(theta_bar, float), float(beta), oracle)

    @property
    def enumerable(self) -> bool:
        return self.directions is not None

    @property
    def scaled_directions(self) -> np.ndarray:
        return self.directions * self.scales[:, None]

    @property
    def trivial(self) -> bool:
        """A single direction: the supremum is one centred Gaussian, mean exactly 0."""
        return self.enumerable and len(np.unique(self.scaled_directions, axis=0)) == 1


def design_from_dense(arms, w, feedback) -> DesignMatrix:
    fb = Feedback.parse(feedback)
    if fb is Feedback.SEMI:
        return DesignMatrix(fb, w @ arms)
    return DesignMatrix(fb, (arms.T * w) @ arms)


def _as_design(lam, feedback) -> DesignMatrix:
    if isinstance(lam, DesignMatrix):
        return lam
    return design_matrix(lam, feedback)


def whiten(A: DesignMatrix, eta) -> np.ndarray:
    """Rows A^{-1/2} eta_j."""
    if A.kind is Feedback.SEMI:
        return eta * A.inv_sqrt()
    return eta @ A.inv_sqrt()


def _check_family(family: DirectionFamily, A: DesignMatrix):
    if family.enumerable:
        A.check_range(family.directions[np.any(family.directions != 0, axis=1)])
    elif A.kind is not Feedback.SEMI or np.any(A.values <= 0):
        raise SingularDesignError("oracle families need a semi-bandit design with full diagonal", A.rank)


def sup_values(family: DirectionFamily, A: DesignMatrix, eta):
    """Per-sample suprema and the scaled maximizing direction for each sample."""
    _check_family(family, A)
    Weta = whiten(A, eta)
    if family.enumerable:
        S = family.scaled_directions
        n = len(Weta)
        vals = np.empty(n)
        idx = np.empty(n, dtype=np.int64)
        step = max(1, _CHUNK // max(1, len(S)))
        for s in range(0, n, step):
            M = Weta[s:s + step] @ S.T
            j = np.argmax(M, axis=1)
            idx[s:s + step] = j
            vals[s:s + step] = M[np.arange(len(j)), j]
        return vals, S[idx]
    r, X = compute_max_batch(Weta, family.x_bar, family.theta_bar, family.beta, family.oracle)
    s = 1.0 / (family.beta + (family.x_bar - X) @ family.theta_bar)
    return r, (family.x_bar - X) * s[:, None]


def estimate_sup(family: DirectionFamily, lam, feedback, n_samples: int, rng=None, eta=None) -> SupEstimate:
    """Monte-Carlo E[sup over the family of (direction)^T A(lam)^{-1/2} eta]."""
    if n_samples < 2:
        raise InvalidInputError("need at least two Monte-Carlo samples")
    A = _as_design(lam, feedback)
    if eta is None:
        eta = rng.standard_normal((n_samples, A.values.shape[0]))
    if family.enumerable and family.trivial:
        _check_family(family, A)
        return SupEstimate(0.0, 0.0, n_samples)
    vals, _ = sup_values(family, A, eta[:n_samples])
    return SupEstimate.of(vals)


def width_gradient(A: DesignMatrix, eta, V) -> np.ndarray:
    """Gradient with respect to A of mean_j V_j^T A^{-1/2} eta_j.

    Returns a d-vector (semi: diagonal entries) or a symmetric d x d matrix.
    The bandit case uses the divided-difference formula for the derivative of
    a matrix function.
    """
    n = len(eta)
    if A.kind is Feedback.SEMI:
        a = A.values
        inv = np.zeros_like(a)
        pos = a > 0
        inv[pos] = a[pos] ** -1.5
        return -0.5 * inv * np.einsum("ij,ij->j", V, eta) / n
    evals, U = A._eig
    root = np.sqrt(evals)
    pos = evals > 0
    F = np.zeros((len(evals), len(evals)))
    rp = root[pos]
    F[np.ix_(pos, pos)] = -1.0 / (rp[:, None] * rp[None, :] * (rp[:, None] + rp[None, :]))
    S = (V @ U).T @ (eta @ U) / n
    return U @ (F * 0.5 * (S + S.T)) @ U.T


def norm_gradient(A: DesignMatrix, x, scale: float = 1.0) -> np.ndarray:
    """Gradient with respect to A of scale^2 * x^T A^{-1} x."""
    if A.kind is Feedback.SEMI:
        a = A.values
        inv = np.zeros_like(a)
        pos = a > 0
        inv[pos] = 1.0 / a[pos] ** 2
        return -(scale ** 2) * x * x * inv
    u = A.pinv() @ x
    return -(scale ** 2) * np.outer(u, u)


def arm_gradient(G, arms) -> np.ndarray:
    """Chain rule through A = sum_x lam_x x x^T (or its diagonal): d/dlam_y = y^T G y."""
    if G.ndim == 1:
        return (arms * arms) @ G
    return np.einsum("ij,jk,ik->i", arms, G, arms)


def _minimize_width(arms, family, feedback, n_samples, iters, rng, w0=None):
    """Frank-Wolfe over lam on ``arms`` for the family's expected supremum (CRN batch)."""
    eta = rng.standard_normal((n_samples, arms.shape[1]))

    def value_grad(w):
        A = design_from_dense(arms, w, feedback)
        vals, V = sup_values(family, A, eta)
        return float(vals.mean()), arm_gradient(width_gradient(A, eta, V), arms)

    w0 = np.full(len(arms), 1.0 / len(arms)) if w0 is None else w0
    w, _, _ = fw_simplex(value_grad, w0, iters)
    return w


def compute_max(lam, eta, x_bar, theta_bar, beta: float, oracle, max_steps: int = 200):
    """max_x (x_bar - x)^T A^{-1/2} eta / (beta + theta_bar^T (x_bar - x)) using oracle calls.

    Parametric search on r with G(r) = max_x [N(x) - r D(x)], which is
    decreasing with its root at the optimal ratio. Each evaluation is one
    oracle call on r*theta_bar - A^{-1/2} eta. HIGH starts at 2 and doubles
    until G(HIGH) < 0; the search then bisects while LOW jumps to the ratio of
    the arm certifying G(LOW) > 0, stopping once G(LOW) vanishes.
    """
    A = _as_design(lam, Feedback.SEMI)
    if A.kind is not Feedback.SEMI or np.any(A.values <= 0):
        raise SingularDesignError("compute_max needs a semi-bandit design with full diagonal", A.rank)
    if beta <= 0:
        raise InvalidInputError("beta must be positive")
    x_bar = np.asarray(x_bar, dtype=float)
    theta_bar = np.asarray(theta_bar, dtype=float)
    w = np.asarray(eta, dtype=float) / np.sqrt(A.values)
    base_n, base_d = x_bar @ w, beta + theta_bar @ x_bar

    def ratio(x):
        return (base_n - x @ w) / (base_d - theta_bar @ x)

    def G(r):
        x = oracle.argmax(r * theta_bar - w)
        return (base_n - x @ w) - r * (base_d - theta_bar @ x), x

    def tol(r):
        return 1e-12 * (1.0 + np.abs(w).sum() + abs(r) * (beta + 2 * np.abs(theta_bar).sum()))

    best = oracle.argmax(-w)
    low = ratio(best)
    high = max(2.0, low + 1.0)
    for _ in range(max_steps):
        if G(high)[0] < 0:
            break
        high *= 2.0
    for _ in range(max_steps):
        g, x = G(low)
        if g <= tol(low):
            return float(low), best
        r = ratio(x)
        if r > low:
            low, best = r, x
        mid = 0.5 * (low + high)
        gm, xm = G(mid)
        if gm < 0:
            high = mid
        elif ratio(xm) > low:
            low, best = ratio(xm), xm
    arms = oracle.enumerate()
    if arms is None:
        raise RuntimeError("compute_max did not converge")
    vals = (base_n - arms @ w) / (base_d - arms @ theta_bar)
    j = int(np.argmax(vals))
    return float(vals[j]), arms[j].copy()


def compute_max_batch(Weta, x_bar, theta_bar, beta, oracle, max_steps: int = 200):
    """Vectorized ratio maximization over many whitened noise vectors (Dinkelbach steps)."""
    Weta = np.atleast_2d(Weta)
    base_n = Weta @ x_bar
    base_d = beta + theta_bar @ x_bar
    X = oracle.argmax_batch(-Weta)
    r = (base_n - np.einsum("ij,ij->i", X, Weta)) / (base_d - X @ theta_bar)
    active = np.arange(len(r))
    scale = 1e-12 * (1.0 + np.abs(Weta).sum(axis=1))
    den_bound = beta + 2.0 * np.abs(theta_bar).sum()
    for _ in range(max_steps):
        if len(active) == 0:
            break
        ra = r[active]
        Xn = oracle.argmax_batch(ra[:, None] * theta_bar - Weta[active])
        num = base_n[active] - np.einsum("ij,ij->i", Xn, Weta[active])
        den = base_d - Xn @ theta_bar
        g = num - ra * den
        move = g > scale[active] * (1.0 + np.abs(ra) * den_bound)
        idx = active[move]
        r[idx] = num[move] / den[move]
        X[idx] = Xn[move]
        active = idx
    if len(active):
        raise RuntimeError("compute_max_batch did not converge")
    return r, X


def tis_width(arm_family, allocation, feedback, delta: float, n_samples: int, rng) -> ConfidenceWidth:
    """Gaussian width of the arms under the allocation plus the TIS deviation term."""
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    arms = np.atleast_2d(np.asarray(arm_family, dtype=float))
    A = _as_design(allocation, feedback)
    A.check_range(arms, "arm")
    gw = estimate_sup(DirectionFamily.of_arms(arms), A, feedback, n_samples, rng).mean
    gw = max(gw, 0.0)
    dev = math.sqrt(2.0 * float(A.norms_sq(arms).max()) * math.log(2.0 / delta))
    return ConfidenceWidth(gw, dev, gw + dev, delta)


def eps_grid(delta_max: float, delta_min: float) -> list:
    if delta_max <= 0:
        return []
    J = max(0, math.ceil(math.log2(delta_max / delta_min))) if delta_min > 0 else 0
    return [delta_max * 2.0 ** -j for j in range(J + 1)]


def gamma_bar_grid(instance: Instance, feedback=None, grid=None, n_samples: int = 2000,
                   solver_budget: int = 100, rng=None):
    """Rows (eps, squared-width estimate, std err) over gap sublevel sets."""
    fb = Feedback.parse(feedback or instance.feedback)
    rng = np.random.default_rng(0) if rng is None else rng
    info = true_gaps(instance)
    grid = eps_grid(info.delta_max, info.delta_min) if grid is None else list(grid)
    arms = instance.arm_set.arms
    rows = []
    for eps in grid:
        sub = arms[info.gaps <= eps + 1e-12]
        family = DirectionFamily.of_arms(sub)
        if len(sub) == 1:
            rows.append((float(eps), 0.0, 0.0))
            continue
        w = _minimize_width(sub, family, fb, n_samples, solver_budget, rng)
        est = estimate_sup(family, design_from_dense(sub, w, fb), fb, n_samples, rng)
        rows.append((float(eps), est.mean ** 2, 2 * abs(est.mean) * est.std_err))
    return rows


def gamma_bar(instance: Instance, feedback=None, grid=None, n_samples: int = 2000,
              solver_budget: int = 100, rng=None) -> float:
    """Largest (over the grid) minimal squared Gaussian width of a gap sublevel set."""
    rows = gamma_bar_grid(instance, feedback, grid, n_samples, solver_budget, rng)
    return max(r[1] for r in rows) if rows else 0.0


def _rho_star(arms, best, gaps, iters):
    others = np.flatnonzero(gaps > 0)
    Z2 = (best - arms[others]) ** 2 / gaps[others, None] ** 2
    m = len(arms)
    w = np.full(m, 1.0 / m)
    best_val, best_w = np.inf, w
    for t in range(1, iters + 1):
        a = w @ arms
        vals = Z2 @ (1.0 / a)
        j = int(np.argmax(vals))
        if vals[j] < best_val:
            best_val, best_w = float(vals[j]), w.copy()
        g = -arms @ (Z2[j] / a ** 2)
        g = g / np.abs(g).max()
        w = w * np.exp(-g / math.sqrt(t))
        w /= w.sum()
    return best_val, best_w


def bai_complexities(instance: Instance, budget: int = 4000, n_samples: int = 2000, rng=None):
    """(rho*, gamma*) of an enumerable semi-bandit instance.

    rho* uses entropic mirror descent with normalized subgradients for
    ``budget`` steps (best iterate kept). gamma* minimizes the squared width of
    the gap-normalized family by Frank-Wolfe with Monte-Carlo gradients.
    """
    if instance.feedback is not Feedback.SEMI or not instance.arm_set.enumerable:
        raise InvalidInputError("bai_complexities needs an enumerable semi-bandit instance")
    info = true_gaps(instance)
    arms = instance.arm_set.arms
    best = arms[info.best_index]
    if len(arms) == 1:
        return 0.0, 0.0
    rho, _ = _rho_star(arms, best, info.gaps, budget)
    rng = np.random.default_rng(0) if rng is None else rng
    others = info.gaps > 0
    family = DirectionFamily((best - arms[others]), 1.0 / info.gaps[others])
    if family.trivial:
        return rho, 0.0
    w = _minimize_width(arms, family, Feedback.SEMI, n_samples, min(budget, 300), rng)
    est = estimate_sup(family, design_from_dense(arms, w, Feedback.SEMI), Feedback.SEMI, n_samples, rng)
    return rho, max(est.mean, 0.0) ** 2


def asymptotic_lb(instance: Instance, margin: float = 1e-6) -> float:
    """min sum_x tau_x Delta_x  s.t.  sum_{i in x} 1 / (sum_{x' containing i} tau_x') <= Delta_x^2 / 2.

    Coordinates of the optimal arm can be sampled for free (it has zero gap),
    so their terms vanish. Solved with SLSQP from a feasible start, falling back
    to trust-constr when SLSQP stalls; each candidate is scaled up if needed so
    every constraint holds with relative margin, and the cheapest is returned.
    """
    if instance.feedback is not Feedback.SEMI or not instance.arm_set.enumerable:
        raise InvalidInputError("asymptotic_lb needs an enumerable semi-bandit instance")
    info = true_gaps(instance)
    arms = instance.arm_set.arms
    best = arms[info.best_index]
    sub = np.flatnonzero(info.gaps > 0)
    if len(sub) == 0:
        return 0.0
    free = best == 1
    # arms inside the optimal arm carry no constraint, so their optimal mass is zero
    sub = sub[arms[sub][:, ~free].sum(axis=1) > 0]
    if len(sub) == 0:
        return 0.0
    gaps = info.gaps[sub]
    B = arms[sub][:, ~free]
    rhs = gaps ** 2 / 2
    # u is tau relative to the feasible start s (each arm alone covering its own constraint)
    s = 2 * B.sum(axis=1) / rhs

    def counts(u):
        return np.maximum((np.maximum(u, 1e-9) * s) @ B, 1e-12 * s.min())

    def cons(u):
        return 1.0 - (B / counts(u)).sum(axis=1) / rhs

    def cons_jac(u):
        N = counts(u)
        # d/du_y of sum_{i in x} 1/N_i = -sum_{i in x and y} s_y / N_i^2
        return (B / N ** 2) @ (B.T * s[None, :]) / rhs[:, None]

    cost = gaps * s
    con = {"type": "ineq", "fun": cons, "jac": cons_jac}
    # the solvers probe points where the constraint overflows; every result is re-checked below
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        res = scipy.optimize.minimize(
            lambda u: float(cost @ u), np.ones(len(sub)), jac=lambda u: cost,
            bounds=[(1e-9, None)] * len(sub), constraints=[con],
            method="SLSQP", options={"maxiter": 1000, "ftol": 1e-12},
        )
        candidates = [np.ones(len(sub)), res.x]
        if not res.success:
            alt = scipy.optimize.minimize(
                lambda u: float(cost @ u), np.ones(len(sub)), jac=lambda u: cost,
                bounds=[(1e-9, None)] * len(sub), constraints=[con],
                method="trust-constr", options={"maxiter": 5000, "gtol": 1e-12, "xtol": 1e-14},
            )
            candidates.append(alt.x)

    def repaired(u):
        u = np.maximum(u, 1e-9)
        worst = np.max(1.0 - cons(u))
        return u * worst / (1.0 - margin) if worst > 1.0 - margin else u

    values = [float(cost @ repaired(u)) for u in candidates if np.all(np.isfinite(u))]
    return min(values)
