"""Full phase-1 sweep: dims 1 and 2 over every particle count and exploration ratio.

    python3 scripts/run_phase1.py --out results/phase1.csv --jobs 1
    python3 scripts/run_phase1.py --dims 1,2,3,4,5,6,7 --out results/phase1_all.csv
"""

import argparse
import time
from pathlib import Path

from boundarypf.harness import SweepConfig, render, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dims", default="1,2")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/phase1.csv"))
    args = ap.parse_args()

    cfg = SweepConfig(
        phase=1, dims=[int(d) for d in args.dims.split(",")],
        trials=args.trials, seed=args.seed, jobs=args.jobs,
    )
    start = time.perf_counter()
    rows = run_sweep(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(render(rows, cfg))
    print(f"{len(rows)} rows -> {args.out} in {time.perf_counter() - start:.1f}s")
    for r in rows:
        if r["num_particles"] in (400, 600) and r["exploration_ratio"] == 0.3:
            print(f"  {r['scenario']} N={r['num_particles']} {r['variant']:>4}: distance {r['final_distance_mean']:.4f}")


if __name__ == "__main__":
    main()
