"""Phase-2 source-term estimation sweep over prior families, scopes and ratios.

The default reproduces the scope-0.3 table shape (8 priors, ratio 0.3, both
variants). Widen with --scopes / --ratios; 100 trials per cell is slow on
one core, so --trials defaults to 20.

    python3 scripts/run_phase2.py --out results/phase2_scope03.csv
"""

import argparse
import time
from pathlib import Path

from boundarypf.harness import SweepConfig, render, run_sweep
from boundarypf.scenarios.ste import PRIOR_NAMES


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--priors", default=",".join(PRIOR_NAMES))
    ap.add_argument("--scopes", default="0.3")
    ap.add_argument("--ratios", default="0.3")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--avg-step-mode", default="all", choices=["all", "success-only"])
    ap.add_argument("--out", type=Path, default=Path("results/phase2.csv"))
    args = ap.parse_args()

    cfg = SweepConfig(
        phase=2,
        priors=args.priors.split(","),
        scopes=[float(s) for s in args.scopes.split(",")],
        exploration_ratios=[float(r) for r in args.ratios.split(",")],
        trials=args.trials, seed=args.seed, jobs=args.jobs, avg_step_mode=args.avg_step_mode,
    )
    start = time.perf_counter()
    rows = run_sweep(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(render(rows, cfg))
    print(f"{len(rows)} rows -> {args.out} in {time.perf_counter() - start:.1f}s")
    for r in rows:
        print(f"  {r['type_prior']:>9} scope {r['priori_scope']} {r['variant']:>4}: SR {r['success_rate']:.2f}, steps {r['average_step']:.1f}")


if __name__ == "__main__":
    main()
