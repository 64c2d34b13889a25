"""Resource allocation regret curves (d = 5 by default; pass the d = 25 config for the large case).

    python3 scripts/resource_allocation.py --out results/resource_allocation_d5
"""
import argparse
from pathlib import Path

from banditlab.harness import ExperimentConfig, emit_plot, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "resource_allocation_d5.yaml"))
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, help="override the trial count (quick looks)")
    args = p.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.trials:
        cfg = ExperimentConfig.from_mapping({**cfg.to_dict(), "trials": args.trials, "seed": cfg.seed})
    res = run_experiment(cfg, args.out, args.threads)
    for row in res.summary:
        print(row.line())
    traces = sorted(res.out_dir.glob("traces_*.csv"))
    emit_plot(traces, "curves", res.out_dir / "regret.svg", title=f"Resource allocation, d = {cfg.instance.params['d']}")
    print(f"wrote {res.out_dir / 'regret.svg'}")


if __name__ == "__main__":
    main()
