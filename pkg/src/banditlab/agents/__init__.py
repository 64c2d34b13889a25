"""Agents behind one calling convention, addressed by identifier."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError
from ..oracle_opt import HeuristicConfig, OracleSolverConfig
from .baselines import (
    CombUCB1Config,
    CTSConfig,
    LinUCBConfig,
    ThompsonConfig,
    combucb1,
    cts_gaussian,
    linucb,
    thompson,
)
from .env import Environment
from .gw_ae import GWAEConfig, gw_ae
from .regret_med import (
    AgentResult,
    EpochState,
    Profile,
    PureExploreConfig,
    RegretMEDConfig,
    ell_max,
    pure_explore,
    regret_med,
    resolve_delta_max,
)

_NESTED = {"solver": OracleSolverConfig, "heuristic": HeuristicConfig}


def build_config(cls, params: dict | None):
    """Dataclass config from a mapping; unknown keys are a config error."""
    params = dict(params or {})
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(params) - names
    if extra:
        raise ConfigError(f"unknown parameters for {cls.__name__}: {sorted(extra)}")
    for key, sub in _NESTED.items():
        if key in params and isinstance(params[key], dict):
            params[key] = build_config(sub, params[key])
    try:
        return cls(**params)
    except TypeError as e:
        raise ConfigError(str(e)) from None


@dataclass(frozen=True)
class AgentSpec:
    ident: str
    config_cls: type
    run: object
    regret: bool = True


def _med(profile):
    def run(env, delta, cfg, rng):
        return regret_med(env, delta, profile, cfg, rng)
    return run


def _wrap(fn):
    def run(env, delta, cfg, rng):
        return AgentResult(fn(env, cfg, rng), [])
    return run


AGENTS = {
    "regret_med_full": AgentSpec("regret_med_full", RegretMEDConfig, _med(Profile.FULL)),
    "regret_med_efficient": AgentSpec("regret_med_efficient", RegretMEDConfig, _med(Profile.EFFICIENT)),
    "regret_med_heuristic": AgentSpec("regret_med_heuristic", RegretMEDConfig, _med(Profile.HEURISTIC)),
    "gw_ae": AgentSpec("gw_ae", GWAEConfig, lambda env, delta, cfg, rng: gw_ae(env, delta, cfg, rng)),
    "pure_explore": AgentSpec("pure_explore", PureExploreConfig,
                              lambda env, delta, cfg, rng: pure_explore(env, delta, cfg, rng), regret=False),
    "linucb": AgentSpec("linucb", LinUCBConfig, _wrap(linucb)),
    "thompson": AgentSpec("thompson", ThompsonConfig, _wrap(thompson)),
    "combucb1": AgentSpec("combucb1", CombUCB1Config, _wrap(combucb1)),
    "cts_gaussian": AgentSpec("cts_gaussian", CTSConfig, _wrap(cts_gaussian)),
}


def get_agent(ident: str) -> AgentSpec:
    try:
        return AGENTS[ident]
    except KeyError:
        raise ConfigError(f"unknown agent {ident!r}; known: {sorted(AGENTS)}") from None


__all__ = [
    "AGENTS", "AgentResult", "AgentSpec", "EpochState", "Environment", "Profile", "build_config", "get_agent",
    "RegretMEDConfig", "PureExploreConfig", "GWAEConfig", "LinUCBConfig", "ThompsonConfig", "CombUCB1Config",
    "CTSConfig", "regret_med", "pure_explore", "gw_ae", "linucb", "thompson", "combucb1", "cts_gaussian",
    "ell_max", "resolve_delta_max",
]
