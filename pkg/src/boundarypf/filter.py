"""Bootstrap particle filter: predict, reweight, normalize, resample.

Likelihoods are plain callables mapping an (N, n) position matrix to N
non-negative values. A likelihood may also expose ``log_value(positions)``;
when present it is used instead, which keeps sharp likelihoods from
underflowing before normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from boundarypf.core import (
    ParticleSet,
    effective_sample_size,
    shannon_entropy,
)


@dataclass(frozen=True)
class TransitionSpec:
    kind: str = "Static"
    jitter_std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("Static", "GaussianJitter"):
            raise ValueError(f"unknown transition kind {self.kind!r}")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be >= 0")


STATIC = TransitionSpec()


@dataclass
class StepDiagnostics:
    ess: float
    entropy: float
    resampled: bool
    degenerate: bool = False
    acceptance_rate: float = float("nan")


def log_likelihood(lik, positions: np.ndarray) -> np.ndarray:
    log_value = getattr(lik, "log_value", None)
    if log_value is not None:
        return np.asarray(log_value(positions), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(lik(positions), dtype=float))


def predict(particles: ParticleSet, trans: TransitionSpec, rng: np.random.Generator) -> ParticleSet:
    if trans.kind == "Static" or trans.jitter_std == 0.0:
        return particles.copy()
    noise = trans.jitter_std * rng.standard_normal(particles.positions.shape)
    return ParticleSet(particles.positions + noise, particles.weights.copy())


def reweight(weights: np.ndarray, log_lik: np.ndarray) -> tuple[np.ndarray, bool]:
    """Multiply weights by exp(log_lik) and renormalize.

    Returns the new weights and a flag that is True when every product was
    zero, in which case the weights are reset to uniform.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + log_lik
    finite = np.isfinite(logw)
    if not np.any(finite):
        return np.full(weights.size, 1.0 / weights.size), True
    w = np.zeros_like(weights)
    w[finite] = np.exp(logw[finite] - logw[finite].max())
    return w / w.sum(), False


def update_weights(particles: ParticleSet, lik) -> tuple[ParticleSet, bool]:
    """Bootstrap weight update ``w_i <- w_i * lik(x_i)``, renormalized.

    The second return value flags a degenerate update (all products zero)
    after which weights were reset to uniform.
    """
    weights, degenerate = reweight(particles.weights, log_likelihood(lik, particles.positions))
    return ParticleSet(particles.positions.copy(), weights), degenerate


def systematic_indices(weights: np.ndarray, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """Ancestor indices for ``count`` draws (default: one per particle) from a single uniform offset."""
    m = weights.size if count is None else count
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    grid = (rng.random() + np.arange(m)) / m
    return np.minimum(np.searchsorted(cdf, grid, side="right"), weights.size - 1)


def systematic_resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling with a single uniform offset; weights reset to 1/N."""
    idx = systematic_indices(particles.weights, rng)
    n = particles.count
    return ParticleSet(particles.positions[idx], np.full(n, 1.0 / n))


def tpf_step(
    particles: ParticleSet,
    trans: TransitionSpec,
    lik,
    ess_threshold: float,
    rng: np.random.Generator,
    eps_log: float = 1e-12,
) -> tuple[ParticleSet, StepDiagnostics]:
    moved = predict(particles, trans, rng)
    updated, degenerate = update_weights(moved, lik)
    ess = effective_sample_size(updated.weights)
    resampled = ess < ess_threshold
    if resampled:
        updated = systematic_resample(updated, rng)
    diag = StepDiagnostics(
        ess=ess,
        entropy=shannon_entropy(updated.weights, eps_log),
        resampled=resampled,
        degenerate=degenerate,
    )
    return updated, diag
