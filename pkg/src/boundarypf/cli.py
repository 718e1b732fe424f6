"""Command-line entry point: ``boundarypf phase1|phase2|demo``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from boundarypf.harness import (
    InvalidConfig,
    config_from_mapping,
    parse_config_text,
    render,
    run_sweep,
)


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _words(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file; flags override it")
    p.add_argument("--exploration-ratios", type=_floats, dest="exploration_ratios")
    p.add_argument("--trials", type=int)
    p.add_argument("--variant", choices=["tpf", "depf", "both"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float, dest="epsilon_weight")
    p.add_argument("--lambda-reg", type=float, dest="lambda_reg")
    p.add_argument("--ess-threshold", type=float, dest="ess_threshold_frac", help="fraction of N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundarypf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("phase1", help="p-norm localization sweep (dims x particles x ratios)")
    _add_common(p1)
    p1.add_argument("--dims", type=_ints)
    p1.add_argument("--particles", type=_ints)
    p1.add_argument("--iterations", type=int)
    p1.add_argument("--p-norm", type=float, dest="p_norm")
    p1.add_argument("--lik-scale", type=float, dest="lik_scale")

    p2 = sub.add_parser("phase2", help="source-term estimation sweep (priors x scopes x ratios)")
    _add_common(p2)
    p2.add_argument("--priors", type=_words)
    p2.add_argument("--scopes", type=_floats)
    p2.add_argument("--particles", type=int, dest="ste_particles")
    p2.add_argument("--max-steps", type=int, dest="max_steps")
    p2.add_argument("--avg-step-mode", choices=["all", "success-only"], dest="avg_step_mode")

    demo = sub.add_parser("demo", help="one 1D trial of each variant, printed side by side")
    demo.add_argument("--goal", type=float, default=2.0)
    demo.add_argument("--particles", type=int, default=400)
    demo.add_argument("--exploration-ratio", type=float, default=0.3)
    demo.add_argument("--iterations", type=int, default=50)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out", help="write the per-iteration trace as CSV")
    return parser


def _sweep_config(args: argparse.Namespace, phase: int):
    values = {}
    if args.config is not None:
        values.update(parse_config_text(args.config.read_text()))
    values["phase"] = phase
    skip = {"command", "config", "verbose"}
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            values[key] = value
    return config_from_mapping(values)


def _demo(args) -> int:
    from boundarypf.scenarios.localization import LocalizationConfig, run_localization_trial
    from boundarypf.depf import DepfParams

    cfg = LocalizationConfig(dim=1, n_particles=args.particles, iterations=args.iterations)
    params = DepfParams(bounding_box=cfg.domain, exploration_ratio=args.exploration_ratio)
    traces = {
        v: run_localization_trial(cfg, v, params, seed=args.seed, goal=[args.goal])
        for v in ("tpf", "depf")
    }
    print(f"1D, prior [4.9, 5.0], goal {args.goal}, N={args.particles}, ER={args.exploration_ratio}")
    print(f"{'iter':>4}  {'TPF dist':>9}  {'DEPF dist':>9}  {'TPF H':>6}  {'DEPF H':>6}")
    for i in range(cfg.iterations):
        if i < 5 or (i + 1) % 10 == 0:
            t, d = traces["tpf"], traces["depf"]
            print(f"{i + 1:>4}  {t.distance[i]:9.4f}  {d.distance[i]:9.4f}  {t.entropy[i]:6.3f}  {d.entropy[i]:6.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("iteration,variant,distance,entropy,ess,resampled\n")
            for v, tr in traces.items():
                for i in range(tr.steps):
                    fh.write(
                        f"{i + 1},{v.upper()},{tr.distance[i]:.6f},{tr.entropy[i]:.6f},"
                        f"{tr.ess[i]:.6f},{int(tr.resampled[i])}\n"
                    )
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "demo":
        return _demo(args)
    try:
        cfg = _sweep_config(args, 1 if args.command == "phase1" else 2)
    except InvalidConfig as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    text = render(run_sweep(cfg), cfg)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
