"""Experiment configuration: YAML ingestion, validation and formula resolution."""
from __future__ import annotations

import ast
import math
import operator
import os
from dataclasses import dataclass, field, replace

import yaml

from ..agents import build_config, get_agent
from ..errors import BanditLabError, ConfigError
from ..oracles import InstanceSpec, build_instance

_FIELDS = {
    "instance", "feedback", "T", "delta", "trials", "seed", "agents", "sweep", "output_dir",
    "mc_samples", "constant_profile", "trace_stride", "design",
}
_AGENT_FIELDS = {"id", "label", "params"}
_DESIGN_FIELDS = {"variant", "eps", "epoch", "solver", "theta_hat", "budget", "constant_scale", "horizon"}
_OPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
    ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos,
}


def eval_formula(text, names: dict) -> float:
    """Arithmetic over numbers and named variables; '^' means power."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    try:
        tree = ast.parse(str(text).replace("^", "**"), mode="eval")
    except SyntaxError:
        raise ConfigError(f"cannot parse formula {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown variable {node.id!r} in formula {text!r}")
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression in formula {text!r}")

    try:
        return ev(tree)
    except ZeroDivisionError:
        raise ConfigError(f"division by zero in formula {text!r}") from None


@dataclass(frozen=True)
class AgentEntry:
    ident: str
    label: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Sweep:
    param: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceSpec
    T: object
    delta: object
    trials: int
    seed: int
    agents: tuple
    feedback: str | None = None
    sweep: Sweep | None = None
    output_dir: str = "results"
    mc_samples: int = 1000
    constant_profile: str = "paper"
    trace_stride: int | None = None
    design: dict | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        extra = set(data) - _FIELDS
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        for req in ("instance", "T", "trials", "agents"):
            if req not in data:
                raise ConfigError(f"config is missing {req!r}")
        try:
            inst = InstanceSpec.from_mapping(data["instance"])
        except BanditLabError as e:
            raise ConfigError(str(e)) from None
        feedback = data.get("feedback")
        if feedback is not None:
            inst = replace(inst, feedback=str(feedback))
        agents = []
        for a in data["agents"]:
            a = {"id": a} if isinstance(a, str) else dict(a)
            bad = set(a) - _AGENT_FIELDS
            if bad or "id" not in a:
                raise ConfigError(f"agent entries take {sorted(_AGENT_FIELDS)}, got {sorted(a)}")
            spec = get_agent(str(a["id"]))
            params = dict(a.get("params") or {})
            build_config(spec.config_cls, params)
            agents.append(AgentEntry(spec.ident, str(a.get("label", spec.ident)), params))
        labels = [a.label for a in agents]
        if len(set(labels)) != len(labels) or not agents:
            raise ConfigError("agent labels must be unique and nonempty")
        sweep = None
        if data.get("sweep") is not None:
            sw = data["sweep"]
            if not isinstance(sw, dict) or set(sw) != {"param", "values"}:
                raise ConfigError("sweep takes exactly {param, values}")
            values = tuple(sw["values"] or ())
            if not values:
                raise ConfigError("sweep values must be nonempty")
            try:
                inst.with_param(str(sw["param"]), values[0])
            except BanditLabError as e:
                raise ConfigError(str(e)) from None
            sweep = Sweep(str(sw["param"]), values)
        design = data.get("design")
        if design is not None:
            if not isinstance(design, dict) or set(design) - _DESIGN_FIELDS:
                raise ConfigError(f"design block takes {sorted(_DESIGN_FIELDS)}")
        trials = data["trials"]
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        stride = data.get("trace_stride")
        if stride is not None and (not isinstance(stride, int) or stride < 1):
            raise ConfigError("trace_stride must be a positive integer")
        mc = data.get("mc_samples", 1000)
        if not isinstance(mc, int) or mc < 2:
            raise ConfigError("mc_samples must be an integer >= 2")
        profile = str(data.get("constant_profile", "paper"))
        if profile not in ("paper", "practical"):
            raise ConfigError("constant_profile must be 'paper' or 'practical'")
        cfg = cls(
            instance=inst, T=data["T"], delta=data.get("delta", "1/T"), trials=trials,
            seed=int(data.get("seed", 0)) & (2 ** 64 - 1), agents=tuple(agents),
            feedback=None if feedback is None else str(feedback), sweep=sweep,
            output_dir=str(data.get("output_dir", "results")), mc_samples=mc, constant_profile=profile,
            trace_stride=stride, design=design,
        )
        for point in cfg.points():
            cfg.resolve(point)
        return cfg

    @classmethod
    def load(cls, path, env=None) -> "ExperimentConfig":
        env = os.environ if env is None else env
        try:
            with open(path) as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from None
        cfg = cls.from_mapping(data)
        if env.get("BANDITLAB_SEED"):
            try:
                seed = int(env["BANDITLAB_SEED"], 0)
            except ValueError:
                raise ConfigError("BANDITLAB_SEED must be an integer") from None
            cfg = replace(cfg, seed=seed & (2 ** 64 - 1))
        return cfg

    def points(self) -> list:
        """Sweep values (or a single None when there is no sweep)."""
        return list(self.sweep.values) if self.sweep else [None]

    def instance_at(self, value) -> InstanceSpec:
        if value is None:
            return self.instance
        try:
            return self.instance.with_param(self.sweep.param, value)
        except BanditLabError as e:
            raise ConfigError(str(e)) from None

    def resolve(self, value):
        """(instance spec, T, delta) at one sweep point, with formulas evaluated."""
        spec = self.instance_at(value)
        names = {k: v for k, v in spec.params.items() if isinstance(v, (int, float))}
        T = eval_formula(self.T, names)
        # formulas such as 25/eps^2 land a hair off an integer
        T = int(round(T)) if abs(T - round(T)) <= 1e-6 * max(1.0, abs(T)) else int(math.floor(T))
        if T < 1:
            raise ConfigError("T must be at least 1 after resolution")
        delta = eval_formula(self.delta, {**names, "T": T})
        if not 0 < delta < 1:
            raise ConfigError("delta must lie in (0, 1) after resolution")
        try:
            build_instance(spec)
        except BanditLabError as e:
            raise ConfigError(str(e)) from None
        return spec, T, delta

    def stride(self, T: int) -> int:
        return self.trace_stride if self.trace_stride is not None else max(1, T // 2000)

    def agent_config(self, entry: AgentEntry):
        """Agent config with the global mc_samples and constant_profile filled in when not set."""
        spec = get_agent(entry.ident)
        params = dict(entry.params)
        names = {f for f in spec.config_cls.__dataclass_fields__}
        if "mc_samples" in names:
            params.setdefault("mc_samples", self.mc_samples)
        if "constant_profile" in names:
            params.setdefault("constant_profile", self.constant_profile)
        return build_config(spec.config_cls, params)

    def to_dict(self) -> dict:
        inst = {"kind": self.instance.kind, "params": self.instance.params, "seed": self.instance.seed}
        if self.instance.theta is not None:
            inst["theta"] = list(self.instance.theta)
        if self.instance.feedback is not None:
            inst["feedback"] = self.instance.feedback
        out = {
            "instance": inst, "T": self.T, "delta": self.delta, "trials": self.trials, "seed": self.seed,
            "agents": [{"id": a.ident, "label": a.label, "params": a.params} for a in self.agents],
            "output_dir": self.output_dir, "mc_samples": self.mc_samples,
            "constant_profile": self.constant_profile,
        }
        if self.feedback is not None:
            out["feedback"] = self.feedback
        if self.sweep:
            out["sweep"] = {"param": self.sweep.param, "values": list(self.sweep.values)}
        if self.trace_stride is not None:
            out["trace_stride"] = self.trace_stride
        if self.design is not None:
            out["design"] = self.design
        return out
