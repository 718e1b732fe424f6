import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boundarypf.core import ParticleSet, normalize_weights, shannon_entropy
from boundarypf.depf import (
    CholeskyFailure,
    DepfParams,
    NotPositiveDefinite,
    cholesky_lower,
    depf_step,
    entropy_regularize,
    forward_solve,
    inject_exploratory,
    kernel_perturb,
    mh_validate,
    optimal_bandwidth,
    regularized_cholesky,
    weighted_covariance,
)
from boundarypf.filter import STATIC, tpf_step
from boundarypf.priors import Box, PriorSpec, sample_prior, support_contains
from boundarypf.scenarios.localization import PnormLikelihood

UNIT = Box([0.0], [5.0])

# mpmath at 40 digits: A * N**(-1/(n+4)), A = (4/(n+2))**(1/(n+4))
H_1_400 = 0.3195771718380609
H_2_600 = 0.3443299437308187


def hp_bandwidth(n, N):
    mpmath.mp.dps = 40
    a = (mpmath.mpf(4) / (n + 2)) ** (mpmath.mpf(1) / (n + 4))
    return a * mpmath.mpf(N) ** (-mpmath.mpf(1) / (n + 4))


def random_set(r, n, dim):
    return ParticleSet(r.normal(size=(n, dim)) * r.uniform(0.1, 5), normalize_weights(r.random(n) + 1e-6))


# exploratory injection

def test_inject_zero_ratio_is_noop(rng):
    ps = random_set(rng, 30, 2)
    out = inject_exploratory(ps, DepfParams(Box.cube(0, 5, 2), exploration_ratio=0.0), rng)
    assert np.array_equal(out.positions, ps.positions)
    assert np.array_equal(out.weights, ps.weights)


def test_inject_full_ratio_replaces_everything(rng):
    box = Box.cube(10, 11, 2)
    out = inject_exploratory(random_set(rng, 50, 2), DepfParams(box, exploration_ratio=1.0), rng)
    assert box.contains(out.positions).all()
    np.testing.assert_allclose(out.weights, np.full(50, 0.02))


def test_inject_counts_and_weights(rng):
    eps = 1e-3
    ps = ParticleSet(rng.uniform(4.9, 5.0, size=400), normalize_weights(rng.random(400) + 0.5))
    out = inject_exploratory(ps, DepfParams(UNIT, exploration_ratio=0.3, epsilon_weight=eps), rng)
    changed = np.flatnonzero(np.any(out.positions != ps.positions, axis=1))
    assert changed.size == 120
    victims = np.argsort(ps.weights, kind="stable")[:120]
    assert set(changed) == set(victims)
    # before renormalization survivors keep their weight and explorers get eps/120
    keep = np.setdiff1d(np.arange(400), victims)
    scale = out.weights[keep[0]] / ps.weights[keep[0]]
    np.testing.assert_allclose(out.weights[victims] / scale, eps / 120, rtol=1e-12)
    np.testing.assert_allclose(out.weights[keep] / scale, ps.weights[keep], rtol=1e-12)


def test_inject_ties_go_to_lowest_index(rng):
    ps = ParticleSet.uniform(np.full(10, 4.95))
    out = inject_exploratory(ps, DepfParams(UNIT, exploration_ratio=0.3), rng)
    moved = np.flatnonzero(out.positions[:, 0] != 4.95)
    assert moved.tolist() == [0, 1, 2]


# entropy regularization

def test_entropy_regularize_examples():
    w = normalize_weights([1.0, 2.0, 3.0])
    assert np.array_equal(entropy_regularize(w, 0.0), w)
    np.testing.assert_allclose(entropy_regularize(np.full(8, 1 / 8), 0.7), np.full(8, 1 / 8), atol=1e-15)
    np.testing.assert_allclose(entropy_regularize(np.array([1.0, 0.0]), 1.0), [1.0, 0.0], atol=1e-11)


@given(st.integers(2, 50), st.floats(1e-6, 10.0), st.integers(0, 2**32 - 1))
def test_entropy_regularize_closed_form(n, beta, seed):
    w = normalize_weights(np.random.default_rng(seed).random(n) + 1e-3)
    h = shannon_entropy(w)
    expected = (w + beta * h) / (1 + n * beta * h)
    out = entropy_regularize(w, beta)
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)
    assert abs(out.sum() - 1) < 1e-12
    if np.ptp(w) > 0:
        assert out.min() > w.min()


# bandwidth

def test_bandwidth_examples():
    assert optimal_bandwidth(123, 2).scale_A == 1.0
    assert optimal_bandwidth(600, 2).h_opt == pytest.approx(H_2_600, abs=1e-12)
    assert optimal_bandwidth(400, 1).h_opt == pytest.approx(H_1_400, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 8))
@pytest.mark.parametrize("N", [50, 200, 300, 400, 600, 700, 800, 900, 1000])
def test_bandwidth_matches_high_precision(n, N):
    info = optimal_bandwidth(N, n)
    exact = hp_bandwidth(n, N)
    assert abs(info.h_opt - float(exact)) <= 1e-12 * float(exact)
    assert info.h_opt == pytest.approx(info.scale_A * N ** (-1 / (n + 4)), rel=1e-15)


# covariance and Cholesky

def test_covariance_examples(rng):
    same = ParticleSet.uniform(np.ones((7, 3)))
    np.testing.assert_allclose(weighted_covariance(same, 1e-6), 1e-6 * np.eye(3), atol=1e-18)
    two = ParticleSet([0.0, 2.0], [0.5, 0.5])
    np.testing.assert_allclose(weighted_covariance(two, 1e-6), [[1 + 1e-6]], rtol=1e-14)
    ps = random_set(rng, 40, 3)
    perm = rng.permutation(40)
    np.testing.assert_allclose(
        weighted_covariance(ParticleSet(ps.positions[perm], ps.weights[perm]), 1e-6),
        weighted_covariance(ps, 1e-6), rtol=1e-12, atol=1e-14,
    )


@given(st.integers(1, 7), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_covariance_psd_and_cholesky_reconstructs(dim, n, seed):
    r = np.random.default_rng(seed)
    ps = random_set(r, n, dim)
    lam = 1e-6
    sigma = weighted_covariance(ps, lam)
    assert np.allclose(sigma, sigma.T)
    assert np.linalg.eigvalsh(sigma - lam * np.eye(dim)).min() >= -1e-10 * max(1.0, np.abs(sigma).max())
    low = cholesky_lower(sigma)
    assert np.allclose(low, np.tril(low)) and np.all(np.diag(low) > 0)
    err = np.linalg.norm(low @ low.T - sigma) / np.linalg.norm(sigma)
    assert err <= 1e-10


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky_lower(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(cholesky_lower(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    np.testing.assert_allclose(
        cholesky_lower([[2.0, 1.0], [1.0, 2.0]]),
        [[1.41421, 0.0], [0.70711, 1.22474]], atol=1e-5,
    )


def test_cholesky_agrees_with_numpy(rng):
    for dim in range(1, 8):
        a = rng.normal(size=(dim, dim))
        spd = a @ a.T + dim * np.eye(dim)
        np.testing.assert_allclose(cholesky_lower(spd), np.linalg.cholesky(spd), rtol=1e-12, atol=1e-12)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_lower([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        cholesky_lower(np.zeros((2, 2)))


def test_regularized_cholesky_retries_then_fails(monkeypatch):
    import boundarypf.depf as depf

    # spread matrix with a -5e-5 eigenvalue: ridges 1e-6 and 1e-5 fail, 1e-4 works
    monkeypatch.setattr(depf, "weighted_covariance", lambda ps, lam: np.diag([-5e-5, 1.0]) + lam * np.eye(2))
    _, low, lam = regularized_cholesky(ParticleSet.uniform(np.zeros((3, 2))), 1e-6)
    assert lam == pytest.approx(1e-4)
    assert low[0, 0] > 0

    monkeypatch.setattr(depf, "weighted_covariance", lambda ps, lam: np.diag([-1.0, 1.0]) + lam * np.eye(2))
    with pytest.raises(CholeskyFailure):
        regularized_cholesky(ParticleSet.uniform(np.zeros((3, 2))), 1e-6)


def test_forward_solve(rng):
    a = rng.normal(size=(4, 4))
    low = np.linalg.cholesky(a @ a.T + 4 * np.eye(4))
    rhs = rng.normal(size=(50, 4))
    np.testing.assert_allclose(forward_solve(low, rhs), np.linalg.solve(low, rhs.T).T, atol=1e-12)


# kernel perturbation

def test_perturb_zero_bandwidth(rng):
    ps = random_set(rng, 20, 2)
    out, deltas = kernel_perturb(ps, 0.0, np.eye(2), rng)
    assert np.all(deltas == 0) and np.array_equal(out.positions, ps.positions)


def test_perturb_identity_covariance(rng):
    ps = ParticleSet.uniform(np.zeros((100_000, 2)))
    out, deltas = kernel_perturb(ps, 1.0, np.eye(2), rng)
    cov = np.cov(deltas.T)
    np.testing.assert_allclose(np.diag(cov), [1.0, 1.0], rtol=0.03)
    assert abs(cov[0, 1]) < 0.03
    np.testing.assert_array_equal(out.positions, deltas)
    np.testing.assert_array_equal(out.weights, ps.weights)


def test_perturb_diagonal_scale(rng):
    ps = ParticleSet.uniform(np.zeros((100_000, 2)))
    _, deltas = kernel_perturb(ps, 1.0, np.diag([2.0, 0.5]), rng)
    np.testing.assert_allclose(deltas.std(axis=0), [2.0, 0.5], rtol=0.03)


# Metropolis-Hastings validation

def test_mh_zero_move_always_accepted(rng):
    ps = random_set(rng, 200, 2)
    out, rate = mh_validate(ps, ps.copy(), np.zeros((200, 2)), np.eye(2), lambda x: np.full(len(x), 0.3), rng)
    assert rate == 1.0
    np.testing.assert_array_equal(out.positions, ps.positions)


def test_mh_ratio_above_one_accepted(rng):
    orig = ParticleSet.uniform(np.zeros((100, 1)))
    moved = ParticleSet.uniform(np.ones((100, 1)))
    lik = lambda x: np.where(x[:, 0] > 0.5, 0.8, 0.4)
    # delta recorded as zero isolates the likelihood ratio (= 2)
    out, rate = mh_validate(orig, moved, np.zeros((100, 1)), np.eye(1), lik, rng)
    assert rate == 1.0
    assert np.all(out.positions == 1.0)


def test_mh_zero_likelihood_rejected(rng):
    orig = ParticleSet(np.zeros((100, 1)), normalize_weights(rng.random(100)))
    moved = ParticleSet(np.ones((100, 1)), np.full(100, 0.01))
    lik = lambda x: np.where(x[:, 0] > 0.5, 0.0, 0.4)
    out, rate = mh_validate(orig, moved, np.ones((100, 1)), np.eye(1), lik, rng)
    assert rate == 0.0
    np.testing.assert_array_equal(out.positions, orig.positions)
    np.testing.assert_array_equal(out.weights, orig.weights)


def test_mh_equal_likelihood_swaps_at_zero_delta(rng):
    # two-state world with equal likelihood: identity-distance swaps are always taken
    states = np.array([[0.0], [1.0]])
    lik = lambda x: np.full(len(x), 0.5)
    current = ParticleSet.uniform(states[rng.integers(0, 2, 500)])
    accepted = 0
    for _ in range(200):
        proposal = ParticleSet(1.0 - current.positions, current.weights)
        current, rate = mh_validate(current, proposal, np.zeros((500, 1)), np.eye(1), lik, rng)
        accepted += rate
    assert accepted == 200


def test_mh_penalizes_long_jumps(rng):
    orig = ParticleSet.uniform(np.zeros((20_000, 1)))
    delta = np.full((20_000, 1), 2.0)
    moved = ParticleSet.uniform(delta)
    _, rate = mh_validate(orig, moved, delta, np.eye(1), lambda x: np.ones(len(x)), rng)
    assert rate == pytest.approx(math.exp(-2.0), abs=0.01)


# full step

def test_reduction_to_tpf():
    prior = PriorSpec.uniform(Box([4.9], [5.0]))
    lik = PnormLikelihood([2.0])
    params = DepfParams(UNIT, exploration_ratio=0.0, beta=0.0, bandwidth=0.0)
    r_tpf, r_depf = np.random.default_rng(5), np.random.default_rng(5)
    start = ParticleSet.uniform(sample_prior(prior, 400, np.random.default_rng(1)))
    a, b = start.copy(), start.copy()
    for _ in range(50):
        a, da = tpf_step(a, STATIC, lik, 200, r_tpf)
        b, db = depf_step(b, STATIC, lik, params, r_depf)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.weights, b.weights)
        assert da.resampled == db.resampled


def test_escape_and_diagnostics(rng):
    prior = PriorSpec.uniform(Box([4.9], [5.0]))
    lik = PnormLikelihood([2.0])
    ps = ParticleSet.uniform(sample_prior(prior, 400, rng))
    params = DepfParams(UNIT, exploration_ratio=0.3)
    escaped_by = None
    for it in range(50):
        ps, diag = depf_step(ps, STATIC, lik, params, rng)
        assert 0.0 <= diag.acceptance_rate <= 1.0
        assert ps.count == 400
        if escaped_by is None and not support_contains(prior, ps.positions).all():
            escaped_by = it + 1
    assert escaped_by is not None and escaped_by <= 2
    assert abs(ps.weights @ ps.positions[:, 0] - 2.0) < 0.3


def test_params_validation():
    with pytest.raises(ValueError):
        DepfParams(UNIT, exploration_ratio=1.5)
    with pytest.raises(ValueError):
        DepfParams(UNIT, epsilon_weight=0.0)
    with pytest.raises(ValueError):
        DepfParams(UNIT, lambda_reg=0.0)
    assert DepfParams(UNIT, exploration_ratio=0.3).exploratory_count(400) == 120
    assert DepfParams(UNIT, exploration_ratio=0.1).exploratory_count(10) == 1
