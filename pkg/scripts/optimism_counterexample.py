"""Optimism counterexample: regret curves, pull counts of the informative arm, and the lower-bound value.

    python3 scripts/optimism_counterexample.py --out results/optimism_counterexample
"""
import argparse
from pathlib import Path

import numpy as np

from banditlab.agents import Environment, get_agent
from banditlab.gwidth import asymptotic_lb
from banditlab.harness import ExperimentConfig, emit_plot, run_experiment
from banditlab.oracles import build_instance

ROOT = Path(__file__).resolve().parents[1]


def big_arm_pulls(cfg, entry, T, delta, seed):
    """Pulls of the all-ones arm in one run of an agent."""
    spec, _, _ = cfg.resolve(None)
    inst, oracle = build_instance(spec)
    env = Environment(inst, oracle, T, np.random.default_rng(seed))
    res = get_agent(entry.ident).run(env, delta, cfg.agent_config(entry), np.random.default_rng(seed + 1))
    big = inst.arm_set.index_of(np.ones(inst.d))
    return res.trace.pulls.get(big, 0)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "optimism_counterexample.yaml"))
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, help="override the trial count (quick looks)")
    args = p.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.trials:
        cfg = ExperimentConfig.from_mapping({**cfg.to_dict(), "trials": args.trials, "seed": cfg.seed})
    spec, T, delta = cfg.resolve(None)
    inst, _ = build_instance(spec)
    print(f"asymptotic lower-bound value c(X, theta) = {asymptotic_lb(inst):.3f}")
    for entry in cfg.agents:
        print(f"{entry.label}: all-ones arm pulled {big_arm_pulls(cfg, entry, T, delta, cfg.seed)} times in one run")
    res = run_experiment(cfg, args.out, args.threads)
    for row in res.summary:
        print(row.line())
    emit_plot(sorted(res.out_dir.glob("traces_*.csv")), "curves", res.out_dir / "regret.svg",
              title="Optimism counterexample")
    print(f"wrote {res.out_dir / 'regret.svg'}")


if __name__ == "__main__":
    main()
