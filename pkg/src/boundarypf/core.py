"""Particle sets and the weight-space primitives shared by every filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPS_LOG = 1e-12


class AllZeroWeights(ValueError):
    """Every weight is zero, so there is nothing to normalize."""


class NonFiniteWeight(ValueError):
    """A weight is NaN, infinite or negative."""


@dataclass
class ParticleSet:
    """N weighted particles in n dimensions.

    ``positions`` has shape (N, n) and ``weights`` shape (N,). Operations in
    this package never mutate a set in place; they return a new one.
    """

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        self.weights = np.asarray(self.weights, dtype=float)
        if self.positions.ndim != 2:
            raise ValueError("positions must be an (N, n) matrix")
        if self.weights.shape != (self.positions.shape[0],):
            raise ValueError(
                f"weights has shape {self.weights.shape}, expected ({self.positions.shape[0]},)"
            )

    @classmethod
    def uniform(cls, positions) -> "ParticleSet":
        positions = np.asarray(positions, dtype=float)
        if positions.ndim == 1:
            positions = positions[:, None]
        count = positions.shape[0]
        return cls(positions, np.full(count, 1.0 / count))

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.positions.copy(), self.weights.copy())


def _check_weights(weights: np.ndarray) -> None:
    if not np.all(np.isfinite(weights)):
        raise NonFiniteWeight("weights contain NaN or infinity")
    if np.any(weights < 0):
        raise NonFiniteWeight("weights contain negative entries")


def normalize_weights(weights) -> np.ndarray:
    """Scale non-negative weights so they sum to one.

    Raises
    ------
    NonFiniteWeight
        If any weight is NaN, infinite or negative.
    AllZeroWeights
        If every weight is zero.
    """
    weights = np.asarray(weights, dtype=float)
    _check_weights(weights)
    total = weights.sum()
    if total <= 0.0:
        raise AllZeroWeights("cannot normalize an all-zero weight vector")
    return weights / total


def effective_sample_size(weights) -> float:
    """Kish effective sample size ``1 / sum(w**2)`` of normalized weights."""
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.dot(weights, weights))


def shannon_entropy(weights, eps_log: float = DEFAULT_EPS_LOG) -> float:
    """Natural-log entropy ``-sum(w * log(w + eps_log))``.

    The guard only enters the logarithm, so a one-hot vector gives ~0 and a
    uniform vector over N particles gives ~ln N. The guard can push a
    one-hot result to about -eps_log, so the value is clamped at zero.
    """
    weights = np.asarray(weights, dtype=float)
    return max(0.0, float(-np.sum(weights * np.log(weights + eps_log))))


def weighted_mean(particles: ParticleSet) -> np.ndarray:
    """Weighted average position; the filters' point estimate."""
    return particles.weights @ particles.positions
