"""End-of-Optimism sweep: final regret against eps for RegretMED, LinUCB and Thompson sampling.

    python3 scripts/end_of_optimism.py --out results/end_of_optimism
"""
import argparse
from pathlib import Path

from banditlab.harness import ExperimentConfig, emit_plot, sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "end_of_optimism.yaml"))
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, help="override the trial count (quick looks)")
    args = p.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.trials:
        cfg = ExperimentConfig.from_mapping({**cfg.to_dict(), "trials": args.trials, "seed": cfg.seed})
    res = sweep(cfg, args.out, args.threads)
    for row in res.summary:
        print(row.line())
    emit_plot([res.out_dir / "summary.csv"], "sweep", res.out_dir / "final_regret.svg", title="End of Optimism")
    for value in cfg.sweep.values:
        pdir = res.out_dir / f"{cfg.sweep.param}={value}"
        emit_plot(sorted(pdir.glob("traces_*.csv")), "curves", pdir / "regret.svg",
                  title=f"End of Optimism, {cfg.sweep.param} = {value}")
    print(f"wrote plots under {res.out_dir}")


if __name__ == "__main__":
    main()
