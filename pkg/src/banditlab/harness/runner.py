"""Seeded trial-by-agent execution, aggregation and CSV/JSON emission."""
from __future__ import annotations

import json
import math
import platform
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..agents import Environment, get_agent
from ..oracles import build_instance
from .config import ExperimentConfig

TRACE_HEADER = "trial,step,cum_regret"
SUMMARY_HEADER = "param,agent,mean_final_regret,std_err,trials"
IDENT_HEADER = "trial,recommended,correct,samples"


def fmt(x) -> str:
    """Shortest round-tripping text for a float (integers stay integers)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def cell_seed(seed: int, label: str, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed & (2 ** 64 - 1), zlib.crc32(label.encode()), trial])


@dataclass(frozen=True)
class SummaryRow:
    param: object
    agent: str
    mean_final_regret: float
    std_err: float
    trials: int

    @classmethod
    def of(cls, param, agent, finals) -> "SummaryRow":
        f = np.asarray(finals, dtype=float)
        n = len(f)
        if n == 0:
            return cls(param, agent, math.nan, math.nan, 0)
        se = float(np.std(f, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(param, agent, float(np.mean(f)), se, n)

    def line(self) -> str:
        p = "" if self.param is None else str(self.param)
        return f"{p},{self.agent},{fmt(self.mean_final_regret)},{fmt(self.std_err)},{self.trials}"


@dataclass
class CellResult:
    trial: int
    steps: np.ndarray | None = None
    values: np.ndarray | None = None
    final: float | None = None
    recommended: str | None = None
    correct: bool | None = None
    samples: int | None = None
    error: str | None = None


@dataclass
class RunResult:
    out_dir: Path
    summary: list
    errors: list = field(default_factory=list)
    files: list = field(default_factory=list)


def subsample(cum: np.ndarray, stride: int):
    """Steps stride, 2 stride, ... plus the final step (1-based)."""
    T = len(cum)
    steps = np.arange(stride, T + 1, stride)
    if len(steps) == 0 or steps[-1] != T:
        steps = np.append(steps, T)
    return steps, cum[steps - 1]


def _run_cell(cfg: ExperimentConfig, entry, spec, T, delta, trial) -> CellResult:
    agent = get_agent(entry.ident)
    env_ss, agent_ss = cell_seed(cfg.seed, entry.label, trial).spawn(2)
    try:
        instance, oracle = build_instance(spec)
        acfg = cfg.agent_config(entry)
        horizon = acfg.max_samples if not agent.regret else T
        env = Environment(instance, oracle, horizon, np.random.default_rng(env_ss))
        res = agent.run(env, delta, acfg, np.random.default_rng(agent_ss))
        if not agent.regret:
            rec = res.final_arm
            return CellResult(trial, recommended=str(instance.arm_set.key(rec)),
                              correct=bool(np.array_equal(rec, instance.best_arm)), samples=int(res.samples))
        steps, vals = subsample(res.trace.cum_regret, cfg.stride(T))
        return CellResult(trial, steps, vals, res.trace.final)
    except Exception as e:  # recorded per cell, the run continues
        return CellResult(trial, error=f"{type(e).__name__}: {e}")


def _write(path: Path, lines):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def _versions() -> dict:
    import numba
    import scipy
    import yaml
    return {"banditlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "pyyaml": yaml.__version__, "python": platform.python_version()}


def _point_dir(out: Path, cfg: ExperimentConfig, value) -> Path:
    return out if value is None else out / f"{cfg.sweep.param}={value}"


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1, values=None) -> RunResult:
    """Run every (sweep point, agent, trial) cell and write traces, summary and manifest.

    Each cell owns an RNG stream derived from (seed, agent label, trial), so
    results do not depend on the number of worker threads.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    points = cfg.points() if values is None else list(values)
    jobs = []
    resolved = {}
    for value in points:
        spec, T, delta = cfg.resolve(value)
        resolved[value] = (spec, T, delta)
        for entry in cfg.agents:
            for trial in range(cfg.trials):
                jobs.append((value, entry, trial))

    def work(job):
        value, entry, trial = job
        spec, T, delta = resolved[value]
        return _run_cell(cfg, entry, spec, T, delta, trial)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    summary, errors, files = [], [], []
    by_key = {}
    for (value, entry, trial), res in zip(jobs, results):
        by_key.setdefault((value, entry.label), []).append(res)
    for value in points:
        pdir = _point_dir(out, cfg, value)
        for entry in cfg.agents:
            cells = by_key[(value, entry.label)]
            ok = [c for c in cells if c.error is None]
            for c in cells:
                if c.error is not None:
                    errors.append({"param": value, "agent": entry.label, "trial": c.trial, "error": c.error})
            if get_agent(entry.ident).regret:
                lines = [TRACE_HEADER]
                for c in ok:
                    lines.extend(f"{c.trial},{s},{fmt(v)}" for s, v in zip(c.steps, c.values))
                path = pdir / f"traces_{entry.label}.csv"
                _write(path, lines)
                files.append(path)
                summary.append(SummaryRow.of(value, entry.label, [c.final for c in ok]))
            else:
                lines = [IDENT_HEADER] + [f"{c.trial},\"{c.recommended}\",{int(c.correct)},{c.samples}" for c in ok]
                path = pdir / f"identification_{entry.label}.csv"
                _write(path, lines)
                files.append(path)
    spath = out / "summary.csv"
    _write(spath, [SUMMARY_HEADER] + [r.line() for r in summary])
    files.append(spath)
    manifest = {
        "config": cfg.to_dict(),
        "resolved": [{"param": v, "T": resolved[v][1], "delta": resolved[v][2]} for v in points],
        "seeds": {"seed": cfg.seed, "derivation": "SeedSequence([seed, crc32(label), trial]).spawn(2)"},
        "versions": _versions(),
        "errors": errors,
    }
    mpath = out / "manifest.json"
    _write(mpath, [json.dumps(manifest, indent=2, sort_keys=True, default=str)])
    files.append(mpath)
    return RunResult(out, summary, errors, files)


def sweep(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> RunResult:
    """Run every sweep value; one merged summary keyed by parameter value."""
    if cfg.sweep is None:
        from ..errors import ConfigError
        raise ConfigError("sweep needs a sweep block in the config")
    return run_experiment(cfg, out_dir, threads)


def read_summary(path) -> list:
    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}:1: unexpected header {header!r}")
        for n, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}:{n}: expected 5 fields")
            try:
                rows.append(SummaryRow(parts[0] or None, parts[1], float(parts[2]), float(parts[3]), int(parts[4])))
            except ValueError:
                raise ValueError(f"{path}:{n}: malformed number") from None
    return rows


def read_traces(path) -> dict:
    """trial -> (steps, cum_regret) from a trace CSV."""
    out: dict = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}:1: unexpected header {header!r}")
        for n, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{n}: expected 3 fields")
            try:
                t, s, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ValueError(f"{path}:{n}: malformed number") from None
            out.setdefault(t, ([], []))
            out[t][0].append(s)
            out[t][1].append(v)
    return {t: (np.array(s), np.array(v)) for t, (s, v) in out.items()}
