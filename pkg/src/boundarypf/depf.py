"""Diffusion-enhanced particle filter (DEPF).

Three mechanisms on top of the bootstrap filter, applied every step:

* exploratory injection: the lowest-weight fraction of particles is replaced
  by uniform draws from a bounding box, each carrying a small weight;
* entropy regularization: the weight entropy, scaled by ``beta``, is added to
  every weight before renormalizing;
* kernel perturbation: each particle moves by ``h_opt * L @ z`` where ``L`` is
  the Cholesky factor of the weighted particle covariance, and a
  Metropolis-Hastings test keeps or reverts each move.

Step order (resample-move): predict, inject, reweight, regularize, resample
if ESS is low, then perturb and validate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from boundarypf.core import (
    DEFAULT_EPS_LOG,
    ParticleSet,
    effective_sample_size,
    normalize_weights,
    shannon_entropy,
)
from boundarypf.filter import (
    StepDiagnostics,
    TransitionSpec,
    log_likelihood,
    predict,
    systematic_resample,
    update_weights,
)
from boundarypf.priors import Box

CHOLESKY_RETRIES = 3


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class CholeskyFailure(RuntimeError):
    """Covariance stayed indefinite after every ridge increase."""


@dataclass
class DepfParams:
    """DEPF tuning constants.

    ``bandwidth`` overrides the kernel scale; ``None`` uses the optimal
    bandwidth for the current N and n, and ``0`` disables the perturbation
    and Metropolis-Hastings stage entirely.
    """

    bounding_box: Box
    exploration_ratio: float = 0.3
    epsilon_weight: float = 1e-3
    beta: float = 1e-5
    lambda_reg: float = 1e-6
    ess_threshold_frac: float = 0.5
    eps_log: float = DEFAULT_EPS_LOG
    bandwidth: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.exploration_ratio <= 1.0:
            raise ValueError("exploration_ratio must lie in [0, 1]")
        if self.epsilon_weight <= 0:
            raise ValueError("epsilon_weight must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.lambda_reg <= 0:
            raise ValueError("lambda_reg must be > 0")
        if not 0.0 < self.ess_threshold_frac <= 1.0:
            raise ValueError("ess_threshold_frac must lie in (0, 1]")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise ValueError("bandwidth must be >= 0")

    def exploratory_count(self, n_particles: int) -> int:
        # small slack so that e.g. 0.3 * 400 counts as 120 despite round-off
        return int(math.floor(self.exploration_ratio * n_particles + 1e-9))


@dataclass(frozen=True)
class BandwidthInfo:
    h_opt: float
    scale_A: float
    n: int
    N: int


def optimal_bandwidth(N: int, n: int) -> BandwidthInfo:
    """Kernel bandwidth ``A * N**(-1/(n+4))`` with ``A = (4/(n+2))**(1/(n+4))``."""
    if N < 1 or n < 1:
        raise ValueError("need N >= 1 and n >= 1")
    scale = (4.0 / (n + 2)) ** (1.0 / (n + 4))
    return BandwidthInfo(h_opt=scale * N ** (-1.0 / (n + 4)), scale_A=scale, n=n, N=N)


def inject_exploratory(particles: ParticleSet, params: DepfParams, rng: np.random.Generator) -> ParticleSet:
    """Replace the floor(ER * N) lowest-weight particles with uniform draws from the box.

    Each replacement gets weight ``epsilon / |E|`` before the whole vector is
    renormalized. Ties in weight go to the lowest index.
    """
    k = params.exploratory_count(particles.count)
    if k == 0:
        return particles.copy()
    victims = np.argsort(particles.weights, kind="stable")[:k]
    positions = particles.positions.copy()
    weights = particles.weights.copy()
    positions[victims] = params.bounding_box.sample(k, rng)
    weights[victims] = params.epsilon_weight / k
    return ParticleSet(positions, normalize_weights(weights))


def entropy_regularize(weights: np.ndarray, beta: float, eps_log: float = DEFAULT_EPS_LOG) -> np.ndarray:
    """Return ``(w + beta*H) / (1 + N*beta*H)`` with H the entropy of ``w``."""
    weights = np.asarray(weights, dtype=float)
    if beta == 0.0:
        return weights.copy()
    lifted = weights + beta * shannon_entropy(weights, eps_log)
    return lifted / lifted.sum()


def weighted_covariance(particles: ParticleSet, lambda_reg: float) -> np.ndarray:
    w = particles.weights
    centered = particles.positions - w @ particles.positions
    sigma = (centered * w[:, None]).T @ centered
    sigma = 0.5 * (sigma + sigma.T)
    return sigma + lambda_reg * np.eye(particles.dim)


def cholesky_lower(sigma) -> np.ndarray:
    """Cholesky-Banachiewicz factorization ``sigma = L @ L.T``.

    Raises NotPositiveDefinite when a pivot is not strictly positive.
    """
    a = np.asarray(sigma, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("sigma must be square")
    low = np.zeros_like(a)
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j] - low[i, :j] @ low[j, :j]
            if i == j:
                if not s > 0.0:
                    raise NotPositiveDefinite(f"pivot {i} is {s!r}")
                low[i, i] = math.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    return low


def forward_solve(low: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``low @ y = rhs`` for each row of ``rhs`` (shape (m, n))."""
    y = np.empty_like(rhs, dtype=float)
    for i in range(low.shape[0]):
        y[:, i] = (rhs[:, i] - y[:, :i] @ low[i, :i]) / low[i, i]
    return y


def regularized_cholesky(particles: ParticleSet, lambda_reg: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Covariance and its factor, growing the ridge tenfold on failure (at most 3 times)."""
    lam = lambda_reg
    for attempt in range(CHOLESKY_RETRIES + 1):
        sigma = weighted_covariance(particles, lam)
        try:
            return sigma, cholesky_lower(sigma), lam
        except NotPositiveDefinite:
            if attempt == CHOLESKY_RETRIES:
                break
            lam *= 10.0
    raise CholeskyFailure(f"covariance not positive definite with ridge up to {lam:g}")


def kernel_perturb(
    particles: ParticleSet, h: float, low: np.ndarray, rng: np.random.Generator
) -> tuple[ParticleSet, np.ndarray]:
    z = rng.standard_normal(particles.positions.shape)
    deltas = h * z @ low.T
    return ParticleSet(particles.positions + deltas, particles.weights.copy()), deltas


def mh_validate(
    original: ParticleSet,
    perturbed: ParticleSet,
    deltas: np.ndarray,
    low: np.ndarray,
    lik,
    rng: np.random.Generator,
) -> tuple[ParticleSet, float]:
    """Keep or revert each perturbed particle.

    The acceptance ratio is the likelihood ratio at the new versus old
    position times ``exp(-0.5 * delta' Sigma^-1 delta)``, with the quadratic
    form evaluated through ``low``, the Cholesky factor of Sigma. Weights are
    left alone: the likelihood gain of a move is already paid for in the
    acceptance test, and reweighting on top of it collapses the posterior
    onto a single particle. Returns the validated set and the acceptance
    rate.
    """
    old = log_likelihood(lik, original.positions)
    new = log_likelihood(lik, perturbed.positions)
    with np.errstate(invalid="ignore"):
        log_ratio = new - old
    # zero likelihood at the proposal always rejects; at the origin always accepts
    log_ratio = np.where(np.isneginf(new), -np.inf, log_ratio)
    log_ratio = np.where(np.isneginf(old) & ~np.isneginf(new), np.inf, log_ratio)
    whitened = forward_solve(low, deltas)
    log_alpha = log_ratio - 0.5 * np.einsum("ij,ij->i", whitened, whitened)
    u = rng.random(original.count)
    with np.errstate(divide="ignore"):
        accept = log_alpha >= np.log(u)
    positions = np.where(accept[:, None], perturbed.positions, original.positions)
    return ParticleSet(positions, original.weights.copy()), float(accept.mean())


def depf_step(
    particles: ParticleSet,
    trans: TransitionSpec,
    lik,
    params: DepfParams,
    rng: np.random.Generator,
) -> tuple[ParticleSet, StepDiagnostics]:
    n_particles, dim = particles.count, particles.dim
    current = predict(particles, trans, rng)
    current = inject_exploratory(current, params, rng)
    current, degenerate = update_weights(current, lik)
    current = ParticleSet(current.positions, entropy_regularize(current.weights, params.beta, params.eps_log))
    ess = effective_sample_size(current.weights)
    resampled = ess < params.ess_threshold_frac * n_particles
    if resampled:
        current = systematic_resample(current, rng)

    h = optimal_bandwidth(n_particles, dim).h_opt if params.bandwidth is None else params.bandwidth
    acceptance = float("nan")
    if h > 0.0:
        _, low, _ = regularized_cholesky(current, params.lambda_reg)
        perturbed, deltas = kernel_perturb(current, h, low, rng)
        current, acceptance = mh_validate(current, perturbed, deltas, low, lik, rng)

    diag = StepDiagnostics(
        ess=ess,
        entropy=shannon_entropy(current.weights, params.eps_log),
        resampled=resampled,
        degenerate=degenerate,
        acceptance_rate=acceptance,
    )
    return current, diag
