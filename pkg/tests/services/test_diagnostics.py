"""
Tests for the diagnostics service: score error, Hermite spectrum, TV and
change-of-measure checks, sample quality and the VP/VE check.
"""

import math

import numpy as np
import pytest

from gmdiffuse.core.errors import InvalidParameterError
from gmdiffuse.schemas.warm_start import WarmStartSet
from gmdiffuse.services.diagnostics import (
    change_of_measure_check,
    gaussian_tv_1d,
    hermite_coefficient_spectrum,
    sample_quality_metrics,
    score_error_profile,
    score_l2_error,
    spectrum_rows,
    summarize_quality,
    truncation_check,
    tv_upper_bound,
    vp_ve_equivalence_check,
    warm_start_coverage,
)
from gmdiffuse.services.mixture_model import OracleScore, oracle_models, sample_mixture, second_moment
from gmdiffuse.services.noise_schedule import build_schedule
from gmdiffuse.services.reverse_sampler import generate


# ============================================================================
# Score error
# ============================================================================

def test_oracle_score_error_is_zero(triangle):
    report = score_l2_error(OracleScore(triangle, 0.7), triangle, 0.7, 500, seed=0)
    assert report.estimate <= 1e-20
    assert report.relative_error == pytest.approx(0.0, abs=1e-10)


def test_zero_score_error_equals_dimension(delta0):
    report = score_l2_error(lambda y: np.zeros_like(y), delta0, 0.0, 20_000, seed=1)
    assert abs(report.estimate - 1.0) <= 3 * report.standard_error
    assert report.relative_error == pytest.approx(1.0)


def test_score_error_standard_error_scales_with_draws(delta0):
    zero = lambda y: np.zeros_like(y)  # noqa: E731
    small = score_l2_error(zero, delta0, 0.0, 20_000, seed=3)
    large = score_l2_error(zero, delta0, 0.0, 40_000, seed=4)
    # Var(y^2) = 2 under N(0, 1)
    assert small.standard_error == pytest.approx(math.sqrt(2.0 / 20_000), rel=0.1)
    assert small.standard_error / large.standard_error == pytest.approx(math.sqrt(2.0), rel=0.1)


def test_score_error_needs_two_draws(delta0):
    with pytest.raises(InvalidParameterError):
        score_l2_error(OracleScore(delta0, 1.0), delta0, 1.0, 1, seed=0)


def test_score_error_profile(pair4):
    schedule = build_schedule(0.5, 1.0, 1, second_moment(pair4))
    models = oracle_models(pair4, schedule.times[1:])
    reports = score_error_profile(models, pair4, schedule, [2, schedule.N], 100, seed=3)
    assert [r.level for r in reports] == [2, schedule.N]
    assert all(r.estimate <= 1e-20 for r in reports)


# ============================================================================
# Hermite spectrum
# ============================================================================

def test_spectrum_constant_function(make_spec):
    spec = make_spec([[0.7]], [1.0], alpha_min=1.0, D=1.0, k=1)
    report = hermite_coefficient_spectrum(spec, 1.3, [0.2], 6)
    assert report.coefficients[0][0] == pytest.approx(0.7, abs=1e-10)
    assert np.all(np.abs(np.array(report.coefficients[1:])) < 1e-10)
    tail, error = truncation_check(report, 1)
    assert tail == pytest.approx(0.0, abs=1e-18)
    assert error == pytest.approx(0.0, abs=1e-15)


def test_spectrum_identity_hook():
    sigma_sq = 2.25
    report = hermite_coefficient_spectrum(None, sigma_sq, [0.0], 5, function=lambda ys: ys)
    coefficients = np.array(report.coefficients)[:, 0]
    assert coefficients[1] == pytest.approx(1.5, abs=1e-12)
    coefficients[1] = 0.0
    assert np.all(np.abs(coefficients) < 1e-12)


def test_spectrum_pair_tail_decay(pair1):
    report = hermite_coefficient_spectrum(pair1, 1.0, [0.0], 24)
    assert report.tail_sums[20] <= 1e-6
    assert report.nodes_per_axis >= 2 * 24 + 1

    shifted = hermite_coefficient_spectrum(pair1, 1.0, [0.25], 24)
    tails = shifted.tail_sums[:13]
    assert all(b < a for a, b in zip(tails, tails[1:]))


def test_spectrum_parseval(pair1, five_atoms):
    for spec, center in ((pair1, [0.25]), (five_atoms, [0.1, -0.2])):
        report = hermite_coefficient_spectrum(spec, 0.8, center, 10)
        assert truncation_check(report, 0)[0] == pytest.approx(report.tail_sums[0])
        for d in range(report.d_max + 2):
            tail, error = truncation_check(report, d)
            assert abs(error - tail) <= 1e-8


def test_spectrum_parseval_with_energy_beyond_d_max(pair4):
    # d_max = 3 leaves most of the tanh-like energy unresolved
    report = hermite_coefficient_spectrum(pair4, 1.0, [0.5], 3)
    assert report.residual_energy > 1e-3
    for d in range(report.d_max + 2):
        tail, error = truncation_check(report, d)
        assert abs(error - tail) <= 1e-8
    assert truncation_check(report, report.d_max + 1) == pytest.approx((0.0, 0.0), abs=1e-8)


def test_spectrum_two_dimensional_ordering(five_atoms):
    report = hermite_coefficient_spectrum(five_atoms, 1.0, [0.0, 0.0], 3)
    assert report.indices[:3] == [[0, 0], [1, 0], [0, 1]]
    assert len(report.indices) == math.comb(5, 3)
    rows = spectrum_rows(report)
    assert rows[0] == (0, report.tail_sums[0])
    assert len(rows) == report.d_max + 2


def test_spectrum_rejects_large_inputs(triangle, make_spec):
    spec3 = make_spec([[0.0, 0.0, 0.0]], [1.0], alpha_min=1.0, D=1.0, k=1)
    with pytest.raises(InvalidParameterError):
        hermite_coefficient_spectrum(spec3, 1.0, [0.0, 0.0, 0.0], 2)
    with pytest.raises(InvalidParameterError):
        hermite_coefficient_spectrum(triangle, 1.0, [0.0, 0.0], 61)
    report = hermite_coefficient_spectrum(triangle, 1.0, [0.0, 0.0], 2)
    with pytest.raises(InvalidParameterError):
        truncation_check(report, 4)


# ============================================================================
# TV and change of measure
# ============================================================================

def test_tv_upper_bound_values():
    assert tv_upper_bound(0.0, 1.0, 3) == 0.0
    assert tv_upper_bound(0.1, 1.0, 4) == pytest.approx(0.2 / math.sqrt(2.0), abs=1e-12)
    assert tv_upper_bound(0.1, 1.0, 4) == pytest.approx(0.141421, abs=1e-6)
    with pytest.raises(InvalidParameterError):
        tv_upper_bound(0.1, 0.0, 1)


@pytest.mark.parametrize("sigma_sq", [0.01, 0.1, 0.5])
def test_tv_bound_dominates_exact_tv(sigma_sq):
    report = gaussian_tv_1d(1.0, 1.0 + sigma_sq)
    assert report.tv == pytest.approx(report.closed_form, abs=1e-9)
    assert report.tv <= tv_upper_bound(sigma_sq, 1.0, 1)

    xs = np.linspace(-40, 40, 400_001)
    gap = np.abs(
        np.exp(-xs ** 2 / 2) / math.sqrt(2 * math.pi)
        - np.exp(-xs ** 2 / (2 * (1 + sigma_sq))) / math.sqrt(2 * math.pi * (1 + sigma_sq))
    )
    trapezoid = 0.5 * float(np.sum((gap[1:] + gap[:-1]) * np.diff(xs)))
    assert report.tv == pytest.approx(trapezoid, abs=1e-6)


def test_tv_equal_variances():
    assert gaussian_tv_1d(2.0, 2.0).tv == 0.0


def test_change_of_measure_examples():
    zero = change_of_measure_check(1.0, 1.0, mu=0.0)
    assert zero.lhs_closed_form == 1.0
    assert zero.holds and not zero.tight

    edge = change_of_measure_check(1.0, 1.0)
    assert edge.lhs_closed_form == pytest.approx(math.e)
    assert edge.bound == pytest.approx(math.e)
    assert edge.lhs_quadrature == pytest.approx(math.e, rel=1e-9)
    assert edge.tight

    inside = change_of_measure_check(1.0, 2.0, mu=0.5)
    assert inside.lhs_closed_form == pytest.approx(math.exp(0.75))
    assert inside.bound == pytest.approx(math.exp(3.0))
    assert inside.holds and not inside.tight


def test_change_of_measure_rejects_mean_outside_radius():
    with pytest.raises(InvalidParameterError):
        change_of_measure_check(1.0, 1.0, mu=1.5)


# ============================================================================
# Sample quality and coverage
# ============================================================================

def test_sample_quality_identical_sets(triangle):
    samples = sample_mixture(triangle, 2000, seed=0)
    report = sample_quality_metrics(samples, samples, triangle.means)
    assert report.sliced_w1 == 0.0
    assert report.max_weight_error == 0.0
    assert all(c.mean_error == 0.0 for c in report.clusters)
    assert report.n_directions == 64


def test_sample_quality_shift(make_spec):
    spec = make_spec([[0.0, 0.0]], [1.0], alpha_min=1.0, D=1.0, k=1)
    reference = sample_mixture(spec, 1000, seed=1)
    report = sample_quality_metrics(reference, reference + [1.0, 0.0], spec.means)
    assert report.clusters[0].mean_error == pytest.approx(1.0, abs=1e-12)
    summary = summarize_quality(report)
    assert summary["max_mean_error"] == pytest.approx(1.0, abs=1e-12)


def test_sample_quality_deterministic(pair4):
    a = sample_mixture(pair4, 500, seed=2)
    b = sample_mixture(pair4, 500, seed=3)
    first = sample_quality_metrics(a, b, pair4.means, direction_seed=9)
    second = sample_quality_metrics(a, b, pair4.means, direction_seed=9)
    assert first.sliced_w1 == second.sliced_w1


def test_sample_quality_oracle_generation(pair4):
    schedule = build_schedule(0.3, 1.0, 1, second_moment(pair4))
    generated = generate(oracle_models(pair4, schedule.times[1:]), schedule, 10_000, seed=4)
    reference = sample_mixture(pair4, 10_000, seed=5)
    report = sample_quality_metrics(generated, reference, pair4.means)
    assert report.sliced_w1 <= 0.5
    assert report.max_weight_error <= 0.03


def test_sample_quality_needs_samples(pair4):
    with pytest.raises(InvalidParameterError):
        sample_quality_metrics(np.empty((0, 1)), np.zeros((3, 1)), pair4.means)


def test_warm_start_coverage(triangle):
    warm = WarmStartSet(centers=triangle.means[:2].tolist(), radius=1.0, noise_level=1.0)
    report = warm_start_coverage(warm, triangle)
    assert report.covered == [True, True, False]
    assert not report.all_covered
    assert report.distances[2] == pytest.approx(10.0)


# ============================================================================
# VP / VE
# ============================================================================

def test_vp_ve_equivalence():
    report = vp_ve_equivalence_check(seed=0)
    assert report.passed
    assert report.times[0] == 0.0
    assert report.times[1] == pytest.approx(math.log(2.0))
    assert len(report.times) == 12
    assert report.max_variance_error <= 1e-10
    assert report.max_step_error <= 1e-10


def test_vp_marginal_at_log_two():
    # e^{-2t} ((e^{2t} - 1) + 1) = 1
    t = math.log(2.0)
    assert math.exp(-2 * t) * (math.expm1(2 * t) + 1.0) == pytest.approx(1.0, abs=1e-15)
