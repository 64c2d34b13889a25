"""Gaussian-width action elimination."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Allocation
from ..design_full import gw_ae_design
from ..errors import InvalidInputError
from .env import Environment
from .regret_med import AgentResult, EpochState, _Estimator, resolve_delta_max


@dataclass
class GWAEConfig:
    """``zeta`` inflates the epoch budget. Rounding is done by sparsify plus ceilings."""

    zeta: float = 0.1
    delta_max: str | float = "upper_bound"
    per_epoch_refit: bool = False
    design_budget: int = 150
    mc_samples: int = 1000


def gw_ae(env: Environment, delta: float, config: GWAEConfig | None = None, rng=None) -> AgentResult:
    config = config or GWAEConfig()
    if not env.arm_set.enumerable:
        raise InvalidInputError("gw_ae needs an enumerable arm set")
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    rng = np.random.default_rng(0) if rng is None else rng
    arms = env.arm_set.arms
    dmax = resolve_delta_max(config.delta_max, env)
    est = _Estimator(env, config.per_epoch_refit)
    active = np.arange(len(arms))
    theta = np.zeros(env.d)
    epochs = []
    history = []
    ell = 1
    while len(active) > 1 and env.remaining > 0:
        eps = dmax * 2.0 ** (-ell)
        lam, gamma, norm = gw_ae_design(arms[active], config.design_budget, rng, env.feedback, config.mc_samples)
        tau = 2.0 * (1.0 + config.zeta) / eps ** 2 * (gamma + 2.0 * norm * math.log(2.0 * ell ** 2 / delta))
        alloc = Allocation(lam.points, lam.weights * tau, active[lam.indices])
        est.new_epoch()
        pulled = est.pull(alloc)
        theta = est.estimate()
        vals = arms[active] @ theta
        keep = vals.max() - vals <= 2.0 * eps
        epochs.append(EpochState(ell, eps, arms[active][int(np.argmax(vals))], theta, tau, tau, pulled,
                                 None, True, {"active": int(keep.sum())}))
        active = active[keep]
        history.append(active.copy())
        ell += 1
    final = arms[active[int(np.argmax(arms[active] @ theta))]]
    env.pull(final, env.remaining)
    return AgentResult(env.trace(), epochs, final, extra={"active_history": history})
