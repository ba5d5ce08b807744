"""
Tests for the mixture model service: sampling, exact oracles and the
k-locality check.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from gmdiffuse.core.errors import InvalidParameterError, OracleUnavailableError
from gmdiffuse.schemas.mixture import LocalityClause, MixtureSpec
from gmdiffuse.services.mixture_model import (
    OracleScore,
    discretize_mixture,
    exact_score,
    log_density,
    oracle_models,
    posterior_clean_mean,
    posterior_mean,
    posterior_weights,
    sample_mixture,
    second_moment,
    validate_k_locality,
)


# ============================================================================
# MixtureSpec construction
# ============================================================================

def test_weights_must_sum_to_one(make_spec):
    with pytest.raises(ValueError):
        make_spec([[0.0], [1.0]], [0.5, 0.6], alpha_min=0.5, D=1.0)


def test_mean_dimension_must_match_n():
    with pytest.raises(ValueError):
        MixtureSpec.model_validate({
            "n": 2,
            "sigma0_sq": 1.0,
            "components": [{"mean": [0.0], "weight": 1.0}],
            "locality": {"R0": 1.0, "alpha_min": 1.0, "D": 1.0, "k": 1},
        })


def test_unknown_field_rejected():
    with pytest.raises(ValueError):
        MixtureSpec.model_validate({
            "n": 1,
            "sigma0_sq": 1.0,
            "sigma0": 1.0,
            "components": [{"mean": [0.0], "weight": 1.0}],
            "locality": {"R0": 1.0, "alpha_min": 1.0, "D": 1.0, "k": 1},
        })


# ============================================================================
# k-locality
# ============================================================================

def test_locality_holds_for_separated_pair(make_spec):
    spec = make_spec([[0.0], [10.0]], [0.5, 0.5], R0=1.0, alpha_min=0.5, D=10.0, k=2)
    assert validate_k_locality(spec) == []


def test_locality_mass_clause(make_spec):
    spec = make_spec([[0.0], [10.0]], [0.5, 0.5], R0=1.0, alpha_min=0.6, D=10.0, k=2)
    clauses = {v.clause for v in validate_k_locality(spec)}
    assert LocalityClause.MASS in clauses


def test_locality_support_clause(make_spec):
    spec = make_spec([[0.0], [11.0]], [0.5, 0.5], R0=1.0, alpha_min=0.5, D=10.0, k=2)
    violations = validate_k_locality(spec)
    support = [v for v in violations if v.clause == LocalityClause.SUPPORT]
    assert len(support) == 1
    assert support[0].component == 1


def test_locality_cover_clause(make_spec):
    spec = make_spec([[0.0], [5.0], [10.0]], [0.4, 0.3, 0.3], R0=1.0, alpha_min=0.3, D=10.0, k=2)
    clauses = {v.clause for v in validate_k_locality(spec)}
    assert LocalityClause.COVER in clauses


def test_locality_ball_component_radius(make_spec):
    spec = make_spec([[0.0], [10.0]], [0.5, 0.5], R0=1.0, alpha_min=0.5, D=12.0, k=2, radii=[0.0, 1.5])
    violations = validate_k_locality(spec)
    assert any(v.clause == LocalityClause.COVER and v.component == 1 for v in violations)
    assert any(v.clause == LocalityClause.MASS and v.component == 1 for v in violations)


def test_benchmark_fixtures_are_k_local(delta0, pair4, pair1, triangle, five_atoms):
    for spec in (delta0, pair4, pair1, triangle, five_atoms):
        assert validate_k_locality(spec) == []


# ============================================================================
# Sampling
# ============================================================================

def test_sample_zero_count(pair4):
    samples = sample_mixture(pair4, 0, seed=1)
    assert samples.shape == (0, 1)


def test_sample_negative_count_rejected(pair4):
    with pytest.raises(InvalidParameterError):
        sample_mixture(pair4, -1, seed=1)


def test_sample_single_gaussian_moments(delta0):
    samples = sample_mixture(delta0, 100_000, seed=11)
    assert abs(samples.mean()) < 0.02
    assert abs(samples.var() - 1.0) < 0.03


def test_sample_pair_balance(pair5):
    samples = sample_mixture(pair5, 10_000, seed=3)
    fraction = float(np.mean(samples[:, 0] > 0))
    assert abs(fraction - 0.5) < 0.02


def test_sample_deterministic(triangle):
    a = sample_mixture(triangle, 500, seed=42)
    b = sample_mixture(triangle, 500, seed=42)
    np.testing.assert_array_equal(a, b)


def test_sample_ball_component_within_reach(make_spec):
    spec = make_spec([[0.0, 0.0]], [1.0], sigma0_sq=1e-6, R0=2.0, alpha_min=1.0, D=2.0, k=1, radii=[2.0])
    samples = sample_mixture(spec, 2000, seed=5)
    norms = np.linalg.norm(samples, axis=1)
    assert norms.max() < 2.01
    # uniform in the disc: E||x||^2 = r^2 n / (n + 2) = 2
    assert abs(np.mean(norms ** 2) - 2.0) < 0.1


# ============================================================================
# Posterior mean and score
# ============================================================================

def test_posterior_mean_single_atom(make_spec):
    spec = make_spec([[1.5, -2.0]], [1.0], alpha_min=1.0, D=3.0, k=1)
    ys = np.random.default_rng(0).normal(size=(20, 2)) * 10
    np.testing.assert_allclose(posterior_mean(spec, ys, 0.7), np.tile([1.5, -2.0], (20, 1)))


def test_posterior_mean_symmetric_pair(pair1):
    assert posterior_mean(pair1, [0.0], 1.0)[0] == pytest.approx(0.0, abs=1e-15)
    assert posterior_mean(pair1, [1.0], 1.0)[0] == pytest.approx(math.tanh(1.0), abs=1e-12)
    assert math.tanh(1.0) == pytest.approx(0.761594, abs=1e-6)


def test_posterior_mean_closed_form_pair(pair4):
    ys = np.linspace(-6, 6, 25).reshape(-1, 1)
    expected = 4.0 * np.tanh(4.0 * ys / 2.0)
    np.testing.assert_allclose(posterior_mean(pair4, ys, 2.0), expected, atol=1e-12)


def test_posterior_mean_stays_in_hull(triangle):
    ys = np.random.default_rng(1).normal(size=(200, 2)) * 50
    weights = posterior_weights(triangle, ys, 1e-3)
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(weights >= 0)
    means = posterior_mean(triangle, ys, 1e-3)
    assert np.all(np.isfinite(means))
    assert np.all(np.linalg.norm(means, axis=1) <= 10.0 / math.sqrt(3.0) + 1e-9)


def test_posterior_mean_rejects_nonpositive_variance(pair4):
    with pytest.raises(InvalidParameterError):
        posterior_mean(pair4, [0.0], 0.0)


def test_exact_score_single_gaussian(delta0):
    assert exact_score(delta0, [2.0], 1.0)[0] == pytest.approx(-1.0, abs=1e-15)


def test_exact_score_symmetric_zero(pair4):
    assert exact_score(pair4, [0.0], 0.5)[0] == pytest.approx(0.0, abs=1e-15)


def test_exact_score_matches_density_gradient(triangle):
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(5):
        y = rng.normal(size=2) * 4
        t = float(rng.uniform(0.1, 3.0))
        grad = np.array([
            (log_density(triangle, y + h * e, t) - log_density(triangle, y - h * e, t)) / (2 * h)
            for e in np.eye(2)
        ])
        np.testing.assert_allclose(exact_score(triangle, y, t), grad, rtol=1e-5, atol=1e-7)


def test_score_formulations_agree(triangle):
    rng = np.random.default_rng(9)
    ys = rng.normal(size=(50, 2)) * 5
    for t in (0.05, 1.0, 20.0):
        clean = posterior_clean_mean(triangle, ys, t)
        np.testing.assert_allclose((clean - ys) / t, exact_score(triangle, ys, t), atol=1e-8)


def _random_discrete_mixtures(make_spec, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(1, 6))
        n = int(rng.integers(1, 4))
        means = rng.uniform(-3.0, 3.0, size=(k, n))
        weights = rng.dirichlet(np.ones(k))
        sigma0_sq = float(rng.uniform(0.5, 2.0))
        yield make_spec(means.tolist(), weights.tolist(), sigma0_sq=sigma0_sq), rng


def test_tweedie_consistency_random_mixtures(make_spec):
    # f(y) = y + sigma^2 grad ln p_t(y), checked analytically and against
    # central differences of the log density
    h = 1e-5
    for spec, rng in _random_discrete_mixtures(make_spec, 50, seed=2):
        t = float(rng.uniform(0.0, 2.0))
        sigma_sq = t + spec.sigma0_sq
        ys = rng.normal(size=(4, spec.n)) * 3

        f = posterior_mean(spec, ys, sigma_sq)
        analytic = ys + sigma_sq * exact_score(spec, ys, t)
        np.testing.assert_allclose(f, analytic, rtol=1e-10, atol=1e-10)

        for y, f_y in zip(ys, f):
            grad = np.array([
                (log_density(spec, y + h * e, t) - log_density(spec, y - h * e, t)) / (2 * h)
                for e in np.eye(spec.n)
            ])
            assert np.max(np.abs(f_y - y - sigma_sq * grad)) <= 1e-5


# ============================================================================
# Density and moments
# ============================================================================

def test_log_density_standard_normal(delta0):
    assert log_density(delta0, [0.0], 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    assert log_density(delta0, [0.0], 0.0) == pytest.approx(-0.918939, abs=1e-6)


def test_log_density_integrates_to_one(pair4):
    total, _ = integrate.quad(lambda y: math.exp(log_density(pair4, [y], 0.5)), -30.0, 30.0, points=[-4.0, 4.0], limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_log_density_translation(make_spec):
    a = make_spec([[0.0], [3.0]], [0.3, 0.7], alpha_min=0.3, D=3.0)
    b = make_spec([[2.0], [5.0]], [0.3, 0.7], alpha_min=0.3, D=5.0)
    ys = np.linspace(-3, 6, 10).reshape(-1, 1)
    np.testing.assert_allclose(log_density(a, ys, 1.0), log_density(b, ys + 2.0, 1.0), atol=1e-12)


def test_second_moment(pair4, triangle):
    assert second_moment(pair4) == pytest.approx(17.0)
    assert second_moment(triangle) == pytest.approx(100.0 / 3.0 + 2.0)


# ============================================================================
# Generalized mixtures and oracles
# ============================================================================

def test_ball_component_has_no_exact_oracle(make_spec):
    spec = make_spec([[0.0]], [1.0], alpha_min=1.0, D=1.0, k=1, radii=[0.5])
    with pytest.raises(OracleUnavailableError):
        exact_score(spec, [0.0], 1.0)
    with pytest.raises(OracleUnavailableError):
        OracleScore(spec, 1.0)


def test_discretize_mixture(make_spec):
    spec = make_spec([[0.0], [10.0]], [0.5, 0.5], R0=1.0, alpha_min=0.5, D=11.0, k=2, radii=[0.0, 1.0])
    surrogate = discretize_mixture(spec, 16, seed=4)
    assert surrogate.is_discrete
    assert surrogate.k_components == 1 + 16
    assert surrogate.weights.sum() == pytest.approx(1.0, abs=1e-12)
    ball_atoms = surrogate.means[1:, 0]
    assert np.all(np.abs(ball_atoms - 10.0) <= 1.0)


def test_discretize_keeps_discrete_spec(pair4):
    assert discretize_mixture(pair4, 8, seed=0) is pair4


def test_oracle_models(pair4):
    models = oracle_models(pair4, [0.5, 2.0])
    assert sorted(models) == [0.5, 2.0]
    ys = np.array([[1.0], [-3.0]])
    np.testing.assert_array_equal(models[2.0](ys), exact_score(pair4, ys, 2.0))
    assert models[0.5].sigma_sq == pytest.approx(1.5)
