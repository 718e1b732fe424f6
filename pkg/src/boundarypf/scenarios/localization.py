"""Static-goal localization in an n-dimensional box under a p-norm likelihood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from boundarypf.core import ParticleSet, weighted_mean
from boundarypf.depf import DepfParams, depf_step
from boundarypf.filter import STATIC, TransitionSpec, tpf_step
from boundarypf.metrics import TrialTrace
from boundarypf.priors import Box, PriorSpec, sample_prior
from boundarypf.scenarios import check_variant


def default_prior_box(dim: int, domain: Box) -> Box:
    """[4.9, 5] in 1D; the upper corner cube of side 0.5 otherwise."""
    side = 0.1 if dim == 1 else 0.5
    return Box(domain.hi - side, domain.hi.copy())


@dataclass
class LocalizationConfig:
    dim: int = 1
    n_particles: int = 400
    domain: Box | None = None
    prior_box: Box | None = None
    p_norm: float = 2.0
    lik_scale: float = 1.0
    iterations: int = 50
    trials: int = 10
    transition: TransitionSpec = field(default=STATIC)

    def __post_init__(self):
        if not 1 <= self.dim <= 7:
            raise ValueError("dim must lie in [1, 7]")
        if self.domain is None:
            self.domain = Box.cube(0.0, 5.0, self.dim)
        if self.prior_box is None:
            self.prior_box = default_prior_box(self.dim, self.domain)
        if self.domain.dim != self.dim or self.prior_box.dim != self.dim:
            raise ValueError("domain and prior box must match dim")
        if not self.domain.contains_box(self.prior_box):
            raise ValueError("prior box must lie inside the domain")
        if self.p_norm < 1 or self.lik_scale <= 0:
            raise ValueError("need p_norm >= 1 and lik_scale > 0")

    @property
    def prior(self) -> PriorSpec:
        return PriorSpec.uniform(self.prior_box)


def pnorm_likelihood(x, goal, p: float = 2.0, sigma: float = 1.0) -> np.ndarray | float:
    """``exp(-||x - goal||_p / sigma)`` for one point or each row of x."""
    return np.exp(-_pnorm_dist(x, goal, p) / sigma)


def _pnorm_dist(x, goal, p):
    diff = np.asarray(x, dtype=float) - np.asarray(goal, dtype=float)
    if diff.ndim == 0:
        return abs(float(diff))
    return np.linalg.norm(diff, ord=p, axis=-1)


class PnormLikelihood:
    def __init__(self, goal, p: float = 2.0, sigma: float = 1.0):
        self.goal = np.asarray(goal, dtype=float)
        self.p = p
        self.sigma = sigma

    def log_value(self, positions: np.ndarray) -> np.ndarray:
        return -_pnorm_dist(positions, self.goal, self.p) / self.sigma

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        return np.exp(self.log_value(positions))


def run_localization_trial(
    cfg: LocalizationConfig,
    variant: str,
    params: DepfParams | None = None,
    seed: int = 0,
    goal=None,
    on_step=None,
) -> TrialTrace:
    """Run one trial and return its trace.

    The goal is drawn uniformly from the domain unless given. ``on_step`` is
    called as ``on_step(iteration, particles)`` after every iteration.
    """
    variant = check_variant(variant)
    if params is None:
        params = DepfParams(bounding_box=cfg.domain)
    rng = np.random.default_rng(seed)
    drawn = cfg.domain.sample(1, rng)[0]
    goal = drawn if goal is None else np.atleast_1d(np.asarray(goal, dtype=float))
    lik = PnormLikelihood(goal, cfg.p_norm, cfg.lik_scale)
    particles = ParticleSet.uniform(sample_prior(cfg.prior, cfg.n_particles, rng))
    threshold = params.ess_threshold_frac * cfg.n_particles

    trace = TrialTrace()
    for it in range(cfg.iterations):
        if variant == "tpf":
            particles, diag = tpf_step(particles, cfg.transition, lik, threshold, rng, params.eps_log)
        else:
            particles, diag = depf_step(particles, cfg.transition, lik, params, rng)
        trace.record(np.linalg.norm(weighted_mean(particles) - goal), diag)
        if on_step is not None:
            on_step(it, particles)
    return trace
