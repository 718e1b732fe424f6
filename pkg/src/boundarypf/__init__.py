"""Particle filtering beyond the prior boundary.

Traditional particle filtering (TPF) and diffusion-enhanced particle
filtering (DEPF), plus the localization and source-term-estimation
experiment harness built on them.
"""

from boundarypf.core import (
    AllZeroWeights,
    NonFiniteWeight,
    ParticleSet,
    effective_sample_size,
    normalize_weights,
    shannon_entropy,
    weighted_mean,
)
from boundarypf.filter import StepDiagnostics, TransitionSpec, tpf_step
from boundarypf.depf import DepfParams, depf_step, optimal_bandwidth

__all__ = [
    "AllZeroWeights",
    "NonFiniteWeight",
    "ParticleSet",
    "effective_sample_size",
    "normalize_weights",
    "shannon_entropy",
    "weighted_mean",
    "StepDiagnostics",
    "TransitionSpec",
    "tpf_step",
    "DepfParams",
    "depf_step",
    "optimal_bandwidth",
]

__version__ = "0.1.0"
