"""Command line entry point: run, sweep, design, gw and plot."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import Allocation, delta_max_upper_bound
from .design_full import DesignProblem, Variant, constraint_constant, solve_design
from .errors import ConfigError, InvalidInputError
from .gwidth import gamma_bar_grid
from .harness import ExperimentConfig, emit_plot, run_experiment, sweep
from .oracle_opt import HeuristicConfig, OracleSolverConfig, RelaxedProblem, heuristic_lagrangian, solve_main
from .oracles import build_instance

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="banditlab", description="Experimental-design bandit experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment (all sweep points if a sweep is configured)")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--threads", type=int, default=1)
    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--threads", type=int, default=1)
    d = sub.add_parser("design", help="solve one epoch design and print the allocation")
    d.add_argument("--config", required=True)
    g = sub.add_parser("gw", help="print the squared Gaussian width over gap sublevel sets")
    g.add_argument("--config", required=True)
    pl = sub.add_parser("plot", help="render an SVG from trace or summary CSVs")
    pl.add_argument("inputs", nargs="+")
    pl.add_argument("--style", choices=["curves", "sweep"], default="curves")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    return p


def _design(cfg: ExperimentConfig, out):
    spec, T, delta = cfg.resolve(cfg.points()[0])
    inst, oracle = build_instance(spec)
    block = dict(cfg.design or {})
    variant = Variant.parse(block.get("variant", "relaxed"))
    solver = str(block.get("solver", "enumeration"))
    epoch = int(block.get("epoch", 1))
    theta = np.asarray(block.get("theta_hat", inst.theta_star), dtype=float)
    if theta.shape != (inst.d,):
        raise ConfigError("design.theta_hat has the wrong length")
    eps = float(block.get("eps", delta_max_upper_bound(inst.arm_set, oracle) / 2.0))
    C = constraint_constant(variant, epoch, delta, cfg.constant_profile, block.get("constant_scale"))
    leader = oracle.argmax(theta)
    rng = np.random.default_rng(cfg.seed)
    horizon = int(block.get("horizon", T))
    if solver == "enumeration":
        if not inst.arm_set.enumerable:
            raise ConfigError("the enumeration solver needs an enumerable instance")
        gaps = np.maximum((leader - inst.arm_set.arms) @ theta, 0.0)
        prob = DesignProblem(eps, gaps, leader, delta, epoch, inst.feedback, variant, C)
        sol = solve_design(prob, inst.arm_set, int(block.get("budget", 300)), rng, cfg.mc_samples)
        alloc, info = sol.allocation, {"objective": sol.objective, "constraint": sol.constraint_total,
                                       "feasible": sol.feasible}
    elif solver == "efficient":
        rep = solve_main(horizon, delta, RelaxedProblem(leader, theta, eps, C), OracleSolverConfig(), oracle, rng)
        if not rep.feasible:
            alloc, info = None, rep.to_record()
        else:
            alloc = Allocation(rep.lambda_bar.points, rep.lambda_bar.weights * rep.tau_bar)
            info = rep.to_record()
    elif solver == "heuristic":
        sol = heuristic_lagrangian(RelaxedProblem(leader, theta, eps, C), horizon, HeuristicConfig(), oracle, rng)
        alloc, info = sol.allocation, {"objective": sol.objective, "constraint": sol.constraint_total,
                                       "feasible": sol.feasible, "heuristic": True}
    else:
        raise ConfigError(f"unknown design solver {solver!r}")
    out.write("arm_index,weight\n")
    if alloc is not None:
        for x, w in zip(alloc.points, alloc.weights):
            key = inst.arm_set.key(x)
            # oracle-only classes have no index; their support tuple is quoted
            key = key if isinstance(key, (int, np.integer)) else f"\"{key}\""
            out.write(f"{key},{float(w)!r}\n")
    info.update({"variant": variant.value, "eps": eps, "C": C, "epoch": epoch,
                 "total": None if alloc is None else alloc.total})
    out.write(json.dumps(info, sort_keys=True, default=float) + "\n")


def _gw(cfg: ExperimentConfig, out):
    spec, _, _ = cfg.resolve(cfg.points()[0])
    inst, _ = build_instance(spec)
    if not inst.arm_set.enumerable:
        raise ConfigError("gw needs an enumerable instance")
    rows = gamma_bar_grid(inst, n_samples=cfg.mc_samples, rng=np.random.default_rng(cfg.seed))
    out.write("epsilon,gamma_bar_estimate,std_err\n")
    for eps, g, se in rows:
        out.write(f"{eps!r},{g!r},{se!r}\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "plot":
            emit_plot(args.inputs, args.style, args.out, args.title)
            return EXIT_OK
        cfg = ExperimentConfig.load(args.config)
        if args.command in ("run", "sweep"):
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            fn = run_experiment if args.command == "run" else sweep
            res = fn(cfg, args.out, args.threads)
            for row in res.summary:
                print(row.line())
            for e in res.errors:
                print(f"error: {e['agent']} trial {e['trial']}: {e['error']}", file=sys.stderr)
            return EXIT_RUNTIME if res.errors else EXIT_OK
        if args.command == "design":
            _design(cfg, sys.stdout)
        else:
            _gw(cfg, sys.stdout)
        return EXIT_OK
    except (ConfigError, InvalidInputError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
