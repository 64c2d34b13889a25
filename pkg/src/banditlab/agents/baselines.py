"""Optimistic and Thompson-sampling baselines: LinUCB, linear TS, CombUCB1, CTS-Gaussian."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Feedback, RegretTrace
from ..errors import InvalidInputError
from ..oracles import cover_coordinates
from . import _kernels
from .env import Environment

CHUNK = 65536


@dataclass
class LinUCBConfig:
    alpha: float = 1.0
    regularization: float = 1.0


@dataclass
class ThompsonConfig:
    regularization: float = 1.0


@dataclass
class CombUCB1Config:
    confidence: float = 1.5


@dataclass
class CTSConfig:
    pass


def _need(env: Environment, feedback: Feedback, name: str):
    if env.feedback is not feedback:
        raise InvalidInputError(f"{name} needs {feedback.value} feedback")


def _kernel_loop(env: Environment, step, width: int, extra_width: int, rng):
    """Run a chunked kernel over the remaining budget.

    Reward noise comes from the environment's stream, posterior noise from the
    agent's. The kernel computes rewards itself, standing in for the
    environment on enumerable sets.
    """
    X, gaps = env.arm_set.arms, _gaps(env)
    while env.remaining:
        n = min(CHUNK, env.remaining)
        noise = env.rng.standard_normal((n, width)) if width > 1 else env.rng.standard_normal(n)
        if env.noise_scale != 1.0:
            noise *= env.noise_scale
        z = rng.standard_normal((n, extra_width)) if extra_width else None
        out = np.empty(n, dtype=np.int64)
        step(X, noise, z, out)
        env.record_indices(out, gaps)


def _gaps(env: Environment) -> np.ndarray:
    inst = env.instance
    return np.maximum(inst.best_value - inst.arm_set.arms @ inst.theta_star, 0.0)


def linucb(env: Environment, config: LinUCBConfig | None = None, rng=None) -> RegretTrace:
    """Ridge LinUCB: pull argmax x^T theta_hat + sqrt(alpha ||x||^2_{V^{-1}} log T)."""
    config = config or LinUCBConfig()
    _need(env, Feedback.BANDIT, "linucb")
    if not env.arm_set.enumerable:
        raise InvalidInputError("linucb needs an enumerable arm set")
    d = env.d
    Vinv = np.eye(d) / config.regularization
    b = np.zeros(d)
    theta = env.instance.theta_star
    log_T = math.log(max(env.T, 2))

    def step(X, noise, z, out):
        _kernels.linucb_chunk(X, theta, noise, config.alpha, log_T, Vinv, b, out)

    _kernel_loop(env, step, 1, 0, rng)
    return env.trace()


def thompson(env: Environment, config: ThompsonConfig | None = None, rng=None) -> RegretTrace:
    """Gaussian linear TS with posterior N(theta_hat, (sum x x^T + I)^{-1})."""
    config = config or ThompsonConfig()
    _need(env, Feedback.BANDIT, "thompson")
    rng = np.random.default_rng(0) if rng is None else rng
    d = env.d
    Vinv = np.eye(d) / config.regularization
    b = np.zeros(d)
    if env.arm_set.enumerable:
        theta = env.instance.theta_star

        def step(X, noise, z, out):
            _kernels.thompson_chunk(X, theta, noise, z, Vinv, b, out)

        _kernel_loop(env, step, 1, d, rng)
        return env.trace()
    V = np.eye(d) * config.regularization
    while env.remaining:
        cov = np.linalg.inv(V)
        th = np.linalg.solve(V, b) + np.linalg.cholesky(0.5 * (cov + cov.T)) @ rng.standard_normal(d)
        x = env.oracle.argmax(th)
        _, y = env.pull(x, 1)
        V += np.outer(x, x)
        b += y * x
    return env.trace()


def _init_semi(env: Environment):
    """One pull of each coordinate-covering arm, so every coordinate has a count."""
    d = env.d
    counts = np.zeros(d, dtype=np.int64)
    sums = np.zeros(d)
    for x in cover_coordinates(env.oracle, d):
        n, totals = env.pull(x, 1)
        if n:
            c = np.flatnonzero(x)
            counts[c] += 1
            sums[c] += totals
    return counts, sums


def _semi_python(env, counts, sums, index):
    while env.remaining:
        seen = np.maximum(counts, 1)
        x = env.oracle.argmax(index(sums / seen, seen, env.t + 1))
        _, totals = env.pull(x, 1)
        c = np.flatnonzero(x)
        counts[c] += 1
        sums[c] += totals


def combucb1(env: Environment, config: CombUCB1Config | None = None, rng=None) -> RegretTrace:
    """CombUCB1: oracle maximization of theta_hat_i + sqrt(c log t / T_i)."""
    config = config or CombUCB1Config()
    _need(env, Feedback.SEMI, "combucb1")
    counts, sums = _init_semi(env)
    if not env.remaining:
        return env.trace()
    if env.arm_set.enumerable:
        theta = env.instance.theta_star

        def step(X, noise, z, out):
            _kernels.combucb1_chunk(X, theta, noise, env.t, config.confidence, counts, sums, out)

        _kernel_loop(env, step, env.d, 0, rng)
        return env.trace()
    _semi_python(env, counts, sums,
                 lambda mean, n, t: mean + np.sqrt(config.confidence * math.log(t) / n))
    return env.trace()


def cts_gaussian(env: Environment, config: CTSConfig | None = None, rng=None) -> RegretTrace:
    """CTS with independent Gaussian posteriors N(theta_hat_i, 1 / T_i)."""
    _need(env, Feedback.SEMI, "cts_gaussian")
    rng = np.random.default_rng(0) if rng is None else rng
    counts, sums = _init_semi(env)
    if not env.remaining:
        return env.trace()
    if env.arm_set.enumerable:
        theta = env.instance.theta_star

        def step(X, noise, z, out):
            _kernels.cts_chunk(X, theta, noise, z, counts, sums, out)

        _kernel_loop(env, step, env.d, env.d, rng)
        return env.trace()
    _semi_python(env, counts, sums, lambda mean, n, t: mean + rng.standard_normal(len(n)) / np.sqrt(n))
    return env.trace()
