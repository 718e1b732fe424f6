"""Source-term estimation with a mobile sensor and KL-driven sensing.

The dispersion model is an isotropic inverse-square stand-in,
``c = q / (d**2 + c0)``, observed with multiplicative log-normal noise. The
agent moves one unit per step on an 8-neighbourhood (plus staying put) and
picks the move with the largest expected KL divergence between the updated
and the current particle posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from boundarypf.core import ParticleSet, weighted_mean
from boundarypf.depf import DepfParams, depf_step
from boundarypf.filter import STATIC, TransitionSpec, tpf_step
from boundarypf.metrics import TrialTrace
from boundarypf.priors import Box, PriorSpec, sample_prior
from boundarypf.scenarios import check_variant

_DIAG = 1.0 / math.sqrt(2.0)
# East first, counter-clockwise, staying put last.
ACTIONS = np.array(
    [
        [1.0, 0.0], [_DIAG, _DIAG], [0.0, 1.0], [-_DIAG, _DIAG],
        [-1.0, 0.0], [-_DIAG, -_DIAG], [0.0, -1.0], [_DIAG, -_DIAG],
        [0.0, 0.0],
    ]
)
STAY = 8

PRIOR_NAMES = ("uniform", "beta", "gaussian", "dirichlet", "star", "ring-1/4", "ring-1/2", "ring-3/4")
_ALIASES = {
    "1/4 ring": "ring-1/4", "1/2 ring": "ring-1/2", "3/4 ring": "ring-3/4",
    "ring1/4": "ring-1/4", "ring1/2": "ring-1/2", "ring3/4": "ring-3/4",
}


class NonPositiveReading(ValueError):
    pass


def canonical_prior_name(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PRIOR_NAMES:
        raise ValueError(f"unknown prior {name!r}; choose from {PRIOR_NAMES}")
    return key


def prior_region(scope: float, domain: Box, anchor) -> Box:
    """Square of area ``scope * domain area`` centred on ``anchor``, shifted (not clipped) into the domain."""
    side = math.sqrt(scope * domain.volume)
    if np.any(side > domain.sides):
        raise ValueError(f"priori scope {scope} does not fit in the domain")
    lo = np.clip(np.asarray(anchor, dtype=float) - side / 2, domain.lo, domain.hi - side)
    return Box(lo, lo + side)


def make_prior(name: str, region: Box) -> PriorSpec:
    """Build one of the eight prior families inside a square region."""
    name = canonical_prior_name(name)
    if name == "uniform":
        return PriorSpec.uniform(region)
    if name == "gaussian":
        return PriorSpec.gaussian(region)
    if name == "beta":
        return PriorSpec.beta(region, 2.0, 2.0)
    if name == "dirichlet":
        return PriorSpec.dirichlet(region, [2.0, 2.0, 2.0])
    outer = float(region.sides.min()) / 2
    if name == "star":
        return PriorSpec.star(region.center, outer, outer / 2, points=5)
    fraction = {"ring-1/4": 0.25, "ring-1/2": 0.5, "ring-3/4": 0.75}[name]
    return PriorSpec.ring_sector(region.center, outer / 2, outer, fraction)


@dataclass
class SteConfig:
    domain: Box = field(default_factory=lambda: Box.cube(0.0, 20.0, 2))
    source_region: Box = field(default_factory=lambda: Box.cube(10.0, 15.0, 2))
    agent_start_region: Box = field(default_factory=lambda: Box.cube(0.0, 5.0, 2))
    priori_scope: float = 0.3
    prior_name: str = "gaussian"
    prior: PriorSpec | None = None
    n_particles: int = 1000
    max_steps: int = 150
    success_radius: float = 0.5
    sensor_noise_std: float = 0.05
    release_rate: float = 1.0
    c0: float = 0.5
    step_length: float = 1.0
    kl_mc_samples: int = 32
    transition: TransitionSpec = field(default=STATIC)

    def __post_init__(self):
        for name in ("source_region", "agent_start_region"):
            if not self.domain.contains_box(getattr(self, name)):
                raise ValueError(f"{name} must lie inside the domain")
        if self.prior is None:
            self.prior_name = canonical_prior_name(self.prior_name)
            region = prior_region(self.priori_scope, self.domain, self.agent_start_region.center)
            self.prior = make_prior(self.prior_name, region)
        if self.sensor_noise_std < 0 or self.success_radius <= 0 or self.max_steps < 1:
            raise ValueError("invalid STE constants")


def concentration(source, sensor, cfg: SteConfig) -> np.ndarray:
    """Noise-free reading ``q / (||sensor - source||**2 + c0)``; broadcasts over leading axes."""
    diff = np.asarray(sensor, dtype=float) - np.asarray(source, dtype=float)
    return cfg.release_rate / (np.sum(diff * diff, axis=-1) + cfg.c0)


def ste_observation(source, sensor, cfg: SteConfig, rng: np.random.Generator) -> float:
    c = float(concentration(source, sensor, cfg))
    if cfg.sensor_noise_std == 0.0:
        return c
    return c * math.exp(rng.normal(0.0, cfg.sensor_noise_std))


def _log_density(log_z: float, log_c: np.ndarray, s: float) -> np.ndarray:
    return -0.5 * ((log_z - log_c) / s) ** 2 - log_z - math.log(s * math.sqrt(2 * math.pi))


def ste_likelihood(theta, z: float, sensor, cfg: SteConfig) -> np.ndarray | float:
    """Log-normal density of reading ``z`` given candidate source(s) ``theta``."""
    return SteLikelihood(z, sensor, cfg)(np.asarray(theta, dtype=float))


class SteLikelihood:
    def __init__(self, z: float, sensor, cfg: SteConfig):
        if not z > 0:
            raise NonPositiveReading(f"reading must be positive, got {z!r}")
        if cfg.sensor_noise_std <= 0:
            raise ValueError("the likelihood needs sensor_noise_std > 0")
        self.log_z = math.log(z)
        self.sensor = np.asarray(sensor, dtype=float)
        self.cfg = cfg

    def log_value(self, theta: np.ndarray) -> np.ndarray:
        log_c = np.log(concentration(theta, self.sensor, self.cfg))
        return _log_density(self.log_z, log_c, self.cfg.sensor_noise_std)

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return np.exp(self.log_value(theta))


def feasible_actions(agent, cfg: SteConfig) -> np.ndarray:
    targets = np.asarray(agent, dtype=float) + cfg.step_length * ACTIONS
    return cfg.domain.contains(targets)


def kl_divergence(posterior, prior) -> float:
    """Discrete ``sum p * log(p / q)`` over entries where the prior is positive."""
    p = np.asarray(posterior, dtype=float)
    q = np.asarray(prior, dtype=float)
    mask = (q > 0) & (p > 0)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def _kl_from_readings(weights: np.ndarray, positions: np.ndarray, sensor, log_z: np.ndarray, cfg) -> np.ndarray:
    """KL(updated || current) for each simulated log-reading in ``log_z``."""
    live = weights > 0
    w = weights[live]
    log_c = np.log(concentration(positions[live], sensor, cfg))
    s = cfg.sensor_noise_std
    # terms constant across particles cancel after normalization
    log_post = np.log(w)[None, :] - 0.5 * ((log_z[:, None] - log_c[None, :]) / s) ** 2
    log_post -= log_post.max(axis=1, keepdims=True)
    post = np.exp(log_post)
    post /= post.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(post > 0, post * (np.log(post) - np.log(w)[None, :]), 0.0)
    return np.maximum(terms.sum(axis=1), 0.0)


def _simulated_readings(particles: ParticleSet, cfg: SteConfig, rng: np.random.Generator):
    idx = rng.choice(particles.count, size=cfg.kl_mc_samples, p=particles.weights)
    eta = rng.normal(0.0, cfg.sensor_noise_std, size=cfg.kl_mc_samples)
    return particles.positions[idx], eta


def _expected_kl(particles, sensor, sources, eta, cfg) -> float:
    log_z = np.log(concentration(sources, sensor, cfg)) + eta
    return float(_kl_from_readings(particles.weights, particles.positions, sensor, log_z, cfg).mean())


def expected_kl_utility(particles: ParticleSet, sensor, cfg: SteConfig, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of the expected information gain of reading at ``sensor``.

    Hypothetical sources are drawn from the particle posterior, a noisy
    reading is simulated for each, and the KL divergence of the reweighted
    posterior from the current one is averaged.
    """
    sources, eta = _simulated_readings(particles, cfg, rng)
    return _expected_kl(particles, sensor, sources, eta, cfg)


def action_utilities(particles: ParticleSet, agent, cfg: SteConfig, rng: np.random.Generator) -> np.ndarray:
    """Expected KL utility for every action; infeasible actions get -inf.

    All actions share the same simulated sources and noise draws.
    """
    agent = np.asarray(agent, dtype=float)
    feasible = feasible_actions(agent, cfg)
    sources, eta = _simulated_readings(particles, cfg, rng)
    util = np.full(len(ACTIONS), -np.inf)
    for a in np.flatnonzero(feasible):
        util[a] = _expected_kl(particles, agent + cfg.step_length * ACTIONS[a], sources, eta, cfg)
    return util


def argmax_action(utilities) -> int:
    """Index of the largest utility; ties go to the lowest index."""
    return int(np.argmax(np.asarray(utilities, dtype=float)))


def select_action(particles: ParticleSet, agent, cfg: SteConfig, rng: np.random.Generator) -> int:
    return argmax_action(action_utilities(particles, agent, cfg, rng))


def run_ste_trial(
    cfg: SteConfig,
    variant: str,
    params: DepfParams | None = None,
    seed: int = 0,
    source=None,
    on_step=None,
) -> TrialTrace:
    """One search episode; stops at success or after ``max_steps``.

    Success means the weighted-mean estimate lies within ``success_radius``
    of the true source. ``on_step(step, particles, agent)`` is called after
    every step.
    """
    variant = check_variant(variant)
    if params is None:
        params = DepfParams(bounding_box=cfg.domain)
    rng = np.random.default_rng(seed)
    drawn = cfg.source_region.sample(1, rng)[0]
    source = drawn if source is None else np.asarray(source, dtype=float)
    agent = cfg.agent_start_region.sample(1, rng)[0]
    particles = ParticleSet.uniform(sample_prior(cfg.prior, cfg.n_particles, rng))
    threshold = params.ess_threshold_frac * cfg.n_particles

    trace = TrialTrace(success=False)
    for step in range(cfg.max_steps):
        action = select_action(particles, agent, cfg, rng)
        agent = agent + cfg.step_length * ACTIONS[action]
        z = ste_observation(source, agent, cfg, rng)
        lik = SteLikelihood(z, agent, cfg)
        if variant == "tpf":
            particles, diag = tpf_step(particles, cfg.transition, lik, threshold, rng, params.eps_log)
        else:
            particles, diag = depf_step(particles, cfg.transition, lik, params, rng)
        dist = float(np.linalg.norm(weighted_mean(particles) - source))
        trace.record(dist, diag)
        if on_step is not None:
            on_step(step, particles, agent)
        if dist <= cfg.success_radius:
            trace.success = True
            break
    return trace
