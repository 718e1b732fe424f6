"""Per-trial traces and cross-trial aggregates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmptyTrialSet(ValueError):
    pass


AVG_STEP_MODES = ("all", "success-only")


@dataclass
class TrialTrace:
    """Metric series of one trial, one entry per executed iteration."""

    distance: list[float] = field(default_factory=list)
    entropy: list[float] = field(default_factory=list)
    ess: list[float] = field(default_factory=list)
    resampled: list[bool] = field(default_factory=list)
    acceptance_rate: list[float] = field(default_factory=list)
    degenerate: list[bool] = field(default_factory=list)
    success: bool | None = None

    def record(self, distance: float, diag) -> None:
        self.distance.append(float(distance))
        self.entropy.append(diag.entropy)
        self.ess.append(diag.ess)
        self.resampled.append(diag.resampled)
        self.acceptance_rate.append(diag.acceptance_rate)
        self.degenerate.append(diag.degenerate)

    @property
    def steps(self) -> int:
        return len(self.distance)

    @property
    def final_distance(self) -> float:
        return self.distance[-1] if self.distance else float("nan")

    @property
    def final_entropy(self) -> float:
        return self.entropy[-1] if self.entropy else float("nan")


@dataclass
class SummaryStats:
    trials: int
    final_distance_mean: float
    final_distance_std: float
    final_entropy_mean: float
    final_entropy_std: float
    success_rate: float = float("nan")
    average_step: float = float("nan")


def aggregate_trials(traces: list[TrialTrace], avg_step_mode: str = "all") -> SummaryStats:
    """Arithmetic means and population standard deviations over trials.

    ``avg_step_mode="all"`` averages steps over every trial (a failed trial
    counts with the steps it ran, i.e. the budget); ``"success-only"``
    averages over successful trials.
    """
    if not traces:
        raise EmptyTrialSet("no trials to aggregate")
    if avg_step_mode not in AVG_STEP_MODES:
        raise ValueError(f"avg_step_mode must be one of {AVG_STEP_MODES}")
    dist = np.array([t.final_distance for t in traces])
    ent = np.array([t.final_entropy for t in traces])
    steps = np.array([t.steps for t in traces], dtype=float)
    stats = SummaryStats(
        trials=len(traces),
        final_distance_mean=float(dist.mean()),
        final_distance_std=float(dist.std()),
        final_entropy_mean=float(ent.mean()),
        final_entropy_std=float(ent.std()),
    )
    if all(t.success is not None for t in traces):
        ok = np.array([t.success for t in traces], dtype=bool)
        stats.success_rate = float(ok.mean())
        if avg_step_mode == "all":
            stats.average_step = float(steps.mean())
        elif ok.any():
            stats.average_step = float(steps[ok].mean())
    return stats
