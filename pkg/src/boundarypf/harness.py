"""Sweep execution and table output for the two experiment phases.

Every trial gets its own seed, ``trial_seed(base, cell, trial)``, so any
single cell can be rerun in isolation and parallel runs match serial ones.
Both variants of a cell share the same seeds (and hence the same goals).
"""

from __future__ import annotations

import ast
import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import product

from boundarypf.depf import DepfParams
from boundarypf.metrics import AVG_STEP_MODES, SummaryStats, TrialTrace, aggregate_trials
from boundarypf.scenarios import VARIANTS, check_variant
from boundarypf.scenarios.localization import LocalizationConfig, run_localization_trial
from boundarypf.scenarios.ste import PRIOR_NAMES, SteConfig, canonical_prior_name, run_ste_trial

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

PHASE1_COLUMNS = (
    "scenario", "variant", "num_particles", "exploration_ratio",
    "final_distance_mean", "final_distance_std", "final_entropy_mean", "final_entropy_std",
)
PHASE2_COLUMNS = (
    "type_prior", "priori_scope", "ratio", "variant", "success_rate",
    "entropy_mean", "entropy_var", "distance_mean", "distance_var", "average_step",
)

DEFAULT_PARTICLES = [50, 200, 300, 400, 600, 700, 800, 900, 1000]
DEFAULT_RATIOS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
DEFAULT_SCOPES = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8]


class InvalidConfig(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, cell_index: int, trial_index: int) -> int:
    """64-bit seed for one trial: splitmix64 chained over (base, cell, trial)."""
    h = splitmix64(base_seed & MASK64)
    h = splitmix64(h ^ (cell_index & MASK64))
    return splitmix64(h ^ (trial_index & MASK64))


@dataclass
class SweepConfig:
    phase: int = 1
    dims: list[int] = field(default_factory=lambda: [1, 2])
    particles: list[int] = field(default_factory=lambda: list(DEFAULT_PARTICLES))
    exploration_ratios: list[float] = field(default_factory=lambda: list(DEFAULT_RATIOS))
    priors: list[str] = field(default_factory=lambda: list(PRIOR_NAMES))
    scopes: list[float] = field(default_factory=lambda: list(DEFAULT_SCOPES))
    trials: int | None = None
    iterations: int = 50
    seed: int = 0
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    out: str | None = None
    format: str = "csv"
    jobs: int = 1
    avg_step_mode: str = "all"
    # filter constants
    beta: float = 1e-5
    epsilon_weight: float = 1e-3
    lambda_reg: float = 1e-6
    ess_threshold_frac: float = 0.5
    eps_log: float = 1e-12
    # phase 1 world
    p_norm: float = 2.0
    lik_scale: float = 1.0
    # phase 2 world
    ste_particles: int = 1000
    max_steps: int = 150
    success_radius: float = 0.5
    sensor_noise_std: float = 0.05
    kl_mc_samples: int = 32

    def __post_init__(self):
        if self.trials is None:
            self.trials = 10 if self.phase == 1 else 100
        self.validate()

    def validate(self) -> None:
        def bad(name, msg):
            raise InvalidConfig(f"{name}: {msg}")

        if self.phase not in (1, 2):
            bad("phase", "must be 1 or 2")
        if self.phase == 1:
            if not self.dims or any(not 1 <= d <= 7 for d in self.dims):
                bad("dims", "need at least one dimension, each in [1, 7]")
            if not self.particles or any(n < 1 for n in self.particles):
                bad("particles", "need at least one positive particle count")
            if self.iterations < 1:
                bad("iterations", "must be >= 1")
        else:
            try:
                self.priors = [canonical_prior_name(p) for p in self.priors]
            except ValueError as exc:
                bad("priors", str(exc))
            if not self.priors:
                bad("priors", "need at least one prior")
            if not self.scopes or any(not 0 < s <= 1 for s in self.scopes):
                bad("scopes", "need at least one scope, each in (0, 1]")
            if self.ste_particles < 1 or self.max_steps < 1 or self.kl_mc_samples < 1:
                bad("ste_particles/max_steps/kl_mc_samples", "must be >= 1")
        if not self.exploration_ratios or any(not 0 <= r <= 1 for r in self.exploration_ratios):
            bad("exploration_ratios", "need at least one ratio, each in [0, 1]")
        if self.trials < 1:
            bad("trials", "must be >= 1")
        try:
            self.variants = [check_variant(v) for v in self.variants]
        except ValueError as exc:
            bad("variants", str(exc))
        if self.format not in ("csv", "json"):
            bad("format", "must be csv or json")
        if self.jobs < 1:
            bad("jobs", "must be >= 1")
        if self.avg_step_mode not in AVG_STEP_MODES:
            bad("avg_step_mode", f"must be one of {AVG_STEP_MODES}")
        try:
            self.depf_params(None, self.exploration_ratios[0])
        except ValueError as exc:
            bad("filter constants", str(exc))

    def depf_params(self, box, ratio: float) -> DepfParams:
        return DepfParams(
            bounding_box=box, exploration_ratio=ratio, epsilon_weight=self.epsilon_weight,
            beta=self.beta, lambda_reg=self.lambda_reg,
            ess_threshold_frac=self.ess_threshold_frac, eps_log=self.eps_log,
        )

    def cells(self) -> list[tuple]:
        if self.phase == 1:
            return list(product(self.dims, self.particles, self.exploration_ratios))
        return list(product(self.priors, self.scopes, self.exploration_ratios))

    def meta(self) -> dict:
        m = {
            "phase": self.phase, "seed": self.seed, "trials": self.trials,
            "beta": self.beta, "epsilon_weight": self.epsilon_weight,
            "lambda_reg": self.lambda_reg, "ess_threshold_frac": self.ess_threshold_frac,
            "eps_log": self.eps_log, "std": "population", "seed_mix": "splitmix64(base, cell, trial)",
            "transition": "Static", "victim_selection": "lowest weight",
        }
        if self.phase == 1:
            m.update(
                iterations=self.iterations, p_norm=self.p_norm, lik_scale=self.lik_scale,
                likelihood="exp(-||x - goal||_p / lik_scale)",
            )
        else:
            ste = SteConfig()
            m.update(
                n_particles=self.ste_particles, max_steps=self.max_steps,
                success_radius=self.success_radius, sensor_noise_std=self.sensor_noise_std,
                kl_mc_samples=self.kl_mc_samples, avg_step_mode=self.avg_step_mode,
                release_rate=ste.release_rate, c0=ste.c0, step_length=ste.step_length,
                observation_model="q / (d^2 + c0) * exp(N(0, sensor_noise_std^2))",
                stand_ins=[
                    "observation_model", "success_radius", "max_steps", "action_set",
                    "step_length", "prior_placement", "prior_geometry",
                ],
                var_columns="population standard deviation",
            )
        return m


def _run_task(task) -> TrialTrace | str:
    cfg, cell, variant, seed = task
    try:
        if cfg.phase == 1:
            dim, n, ratio = cell
            world = LocalizationConfig(
                dim=dim, n_particles=n, p_norm=cfg.p_norm, lik_scale=cfg.lik_scale,
                iterations=cfg.iterations, trials=cfg.trials,
            )
            return run_localization_trial(world, variant, cfg.depf_params(world.domain, ratio), seed)
        prior, scope, ratio = cell
        world = SteConfig(
            priori_scope=scope, prior_name=prior, n_particles=cfg.ste_particles,
            max_steps=cfg.max_steps, success_radius=cfg.success_radius,
            sensor_noise_std=cfg.sensor_noise_std, kl_mc_samples=cfg.kl_mc_samples,
        )
        return run_ste_trial(world, variant, cfg.depf_params(world.domain, ratio), seed)
    except Exception as exc:  # recorded as an error row, the sweep goes on
        return f"{type(exc).__name__}: {exc}"


def _fmt(x: float) -> str:
    return "nan" if x is None or not math.isfinite(x) else f"{x:.6f}"


def _row(cfg: SweepConfig, cell, variant: str, stats: SummaryStats | None, error: str | None) -> dict:
    if cfg.phase == 1:
        dim, n, ratio = cell
        row = {"scenario": f"{dim}D", "variant": variant.upper(), "num_particles": n, "exploration_ratio": ratio}
        metrics = {
            "final_distance_mean": "final_distance_mean", "final_distance_std": "final_distance_std",
            "final_entropy_mean": "final_entropy_mean", "final_entropy_std": "final_entropy_std",
        }
    else:
        prior, scope, ratio = cell
        row = {"type_prior": prior, "priori_scope": scope, "ratio": ratio, "variant": variant.upper()}
        metrics = {
            "success_rate": "success_rate", "entropy_mean": "final_entropy_mean",
            "entropy_var": "final_entropy_std", "distance_mean": "final_distance_mean",
            "distance_var": "final_distance_std", "average_step": "average_step",
        }
    for col, attr in metrics.items():
        row[col] = float("nan") if stats is None else getattr(stats, attr)
    if error is not None:
        row["error"] = error
    return row


def run_sweep(cfg: SweepConfig) -> list[dict]:
    """Run every (cell, variant) and return one summary row each, in cell order."""
    cfg.validate()
    cells = cfg.cells()
    tasks = [
        (cfg, cell, variant, trial_seed(cfg.seed, ci, t))
        for ci, cell in enumerate(cells)
        for variant in cfg.variants
        for t in range(cfg.trials)
    ]
    if cfg.jobs == 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))

    rows = []
    k = 0
    for cell in cells:
        for variant in cfg.variants:
            chunk = results[k : k + cfg.trials]
            k += cfg.trials
            errors = [r for r in chunk if isinstance(r, str)]
            if errors:
                log.warning("cell %s %s failed: %s", cell, variant, errors[0])
                rows.append(_row(cfg, cell, variant, None, errors[0]))
            else:
                rows.append(_row(cfg, cell, variant, aggregate_trials(chunk, cfg.avg_step_mode), None))
    return rows


def columns(phase: int) -> tuple[str, ...]:
    return PHASE1_COLUMNS if phase == 1 else PHASE2_COLUMNS


def to_csv(rows: list[dict], phase: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = columns(phase)
    writer.writerow(cols)
    for row in rows:
        # the first four columns identify the cell, the rest are metrics
        writer.writerow([row[c] for c in cols[:4]] + [_fmt(row[c]) for c in cols[4:]])
    return buf.getvalue()


def to_json(rows: list[dict], cfg: SweepConfig) -> str:
    def clean(v):
        if isinstance(v, float):
            return round(v, 6) if math.isfinite(v) else None
        return v

    payload = {"meta": cfg.meta(), "rows": [{k: clean(v) for k, v in r.items()} for r in rows]}
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def render(rows: list[dict], cfg: SweepConfig) -> str:
    return to_csv(rows, cfg.phase) if cfg.format == "csv" else to_json(rows, cfg)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; values are Python literals, lists in brackets.

    Blank lines and ``#`` comments are skipped. Bare words are kept as
    strings, so ``variant = depf`` and ``variant = "depf"`` are equivalent.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def config_from_mapping(values: dict) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    values = dict(values)
    if "variant" in values:
        v = values.pop("variant")
        values["variants"] = list(VARIANTS) if v == "both" else ([v] if isinstance(v, str) else list(v))
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
    for key in ("dims", "particles", "exploration_ratios", "priors", "scopes", "variants"):
        if key in values and not isinstance(values[key], (list, tuple)):
            values[key] = [values[key]]
    try:
        return SweepConfig(**values)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc

