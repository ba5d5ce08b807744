"""
Tests for the noise schedule: construction, invariants and the reverse
step coefficient.
"""

import math

import numpy as np
import pytest

from gmdiffuse.core.errors import InvalidParameterError, ScheduleError
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.services.noise_schedule import (
    build_schedule,
    check_schedule,
    estimate_second_moment,
    first_time,
    kl_bound_terms,
    reverse_step_coefficient,
    schedule_kappa,
    step_down,
    terminal_time,
    vp_times,
)


# ============================================================================
# Step rule
# ============================================================================

def test_step_down_small_time_regime():
    # 4^{-0.5} = 0.5 > e^{-1}
    assert step_down(3.0, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_step_down_large_time_regime():
    t_next = math.exp(4.0) - 1.0
    assert step_down(t_next, 0.5) + 1.0 == pytest.approx(math.exp(3.0), rel=1e-14)


# ============================================================================
# build_schedule
# ============================================================================

@pytest.mark.parametrize(
    "eps,sigma0_sq,n,M2",
    [(0.3, 1.0, 1, 1.0), (0.5, 1.0, 1, 17.0), (0.2, 0.5, 2, 35.3), (0.5, 2.0, 4, 0.0)],
)
def test_schedule_endpoints_and_invariants(eps, sigma0_sq, n, M2):
    schedule = build_schedule(eps, sigma0_sq, n, M2)
    assert schedule.T == terminal_time(eps, n, M2) == (M2 + n) / eps ** 2
    assert schedule.times[-1] == schedule.T
    assert schedule.times[0] == first_time(eps, sigma0_sq, n) == eps ** 2 * sigma0_sq / (2 * math.sqrt(n))
    assert schedule.kappa == pytest.approx(eps ** 2 / (M2 + n * math.log(schedule.T + 1)), rel=1e-14)
    assert schedule.kappa == schedule_kappa(eps, n, M2)
    assert np.all(np.diff(schedule.time_array) > 0)
    assert check_schedule(schedule) == []


def test_schedule_follows_equality_recursion():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    times, kappa = schedule.times, schedule.kappa
    for k in range(1, schedule.N - 1):
        assert times[k] == pytest.approx(step_down(times[k + 1], kappa), rel=1e-12, abs=1e-15)


def test_schedule_length_bound():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    bound = 5.0 / schedule.kappa * math.log((schedule.T + 1.0) / schedule.t1)
    assert schedule.N <= bound


def test_schedule_budgets():
    schedule = build_schedule(0.3, 1.0, 2, 4.0)
    log_T1 = math.log(schedule.T + 1.0)
    expected = [0.09 * (t + 1.0) / log_T1 for t in schedule.times]
    np.testing.assert_allclose(schedule.eps_budgets, expected, rtol=1e-14)


@pytest.mark.parametrize("eps", [0.0, -0.1, 0.51, 1.0])
def test_schedule_rejects_eps(eps):
    with pytest.raises(ScheduleError):
        build_schedule(eps, 1.0, 1, 1.0)


def test_schedule_rejects_terminal_below_first():
    # T = 1/0.25 = 4 while t_1 = 0.25 * 100 / 2 = 12.5
    with pytest.raises(ScheduleError):
        build_schedule(0.5, 100.0, 1, 0.0)


def test_schedule_error_is_value_error():
    with pytest.raises(ValueError):
        build_schedule(0.6, 1.0, 1, 1.0)


def test_schedule_structure_validation():
    with pytest.raises(ValueError):
        NoiseSchedule(
            times=[0.1, 0.05, 2.0], kappa=0.1, T=2.0, eps_budgets=[0.1, 0.1, 0.1],
            M2=1.0, n=1, eps=0.3, sigma0_sq=1.0,
        )
    with pytest.raises(ValueError):
        NoiseSchedule(
            times=[0.1, 1.0, 2.0], kappa=0.1, T=3.0, eps_budgets=[0.1, 0.1, 0.1],
            M2=1.0, n=1, eps=0.3, sigma0_sq=1.0,
        )


def test_check_schedule_reports_violations():
    good = build_schedule(0.3, 1.0, 1, 1.0)
    # drop an interior time: the step rule breaks at the gap
    times = good.times[:5] + good.times[6:]
    budgets = good.eps_budgets[:5] + good.eps_budgets[6:]
    broken = good.model_copy(update={"times": times, "eps_budgets": budgets})
    assert any("step rule" in problem for problem in check_schedule(broken))


def test_schedule_json_roundtrip_exact():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    restored = NoiseSchedule.model_validate_json(schedule.model_dump_json())
    assert restored.times == schedule.times
    assert restored.kappa == schedule.kappa


def test_time_at_levels():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    assert schedule.time_at(1) == schedule.t1
    assert schedule.time_at(schedule.N) == schedule.T
    with pytest.raises(IndexError):
        schedule.time_at(0)


# ============================================================================
# Reverse step coefficient
# ============================================================================

def test_coefficient_examples():
    assert reverse_step_coefficient(2.0, 2.0) == 0.0
    assert reverse_step_coefficient(0.0, 3.0) == pytest.approx(4.0, rel=1e-15)


def test_coefficient_small_gap_limit():
    gap = 1e-6
    c = reverse_step_coefficient(5.0, 5.0 + gap)
    assert c / gap == pytest.approx(1.0, abs=1e-5)


def test_coefficient_matches_direct_form():
    for a, b in [(0.1, 0.5), (1.0, 10.0), (3.0, 3.5)]:
        direct = 2.0 * ((b + 1.0) - math.sqrt((a + 1.0) * (b + 1.0)))
        assert reverse_step_coefficient(a, b) == pytest.approx(direct, rel=1e-12)


def test_coefficient_rejects_bad_order():
    with pytest.raises(InvalidParameterError):
        reverse_step_coefficient(3.0, 2.0)
    with pytest.raises(InvalidParameterError):
        reverse_step_coefficient(-0.5, 2.0)


# ============================================================================
# Helpers
# ============================================================================

def test_estimate_second_moment():
    samples = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
    assert estimate_second_moment(samples) == pytest.approx((1 + 4 + 9) / 3)
    with pytest.raises(InvalidParameterError):
        estimate_second_moment(np.empty((0, 2)))


def test_vp_times():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    np.testing.assert_allclose(vp_times(schedule), 0.5 * np.log(schedule.time_array + 1.0))


def test_kl_bound_terms():
    schedule = build_schedule(0.3, 1.0, 1, 1.0)
    report = kl_bound_terms(schedule)
    assert report.initialization == pytest.approx((1 + 1.0) / (schedule.T + 1.0))
    assert report.discretization_log == pytest.approx(schedule.kappa * math.log(schedule.T + 1))
    assert report.discretization_steps == pytest.approx(schedule.kappa ** 2 * schedule.N)
    assert report.total == pytest.approx(
        report.initialization + report.score + report.discretization_log
        + report.discretization_steps + report.discretization_moment
    )
    assert not report.used_measured_errors

    measured = kl_bound_terms(schedule, np.zeros(schedule.N))
    assert measured.score == 0.0
    assert measured.used_measured_errors
    with pytest.raises(InvalidParameterError):
        kl_bound_terms(schedule, [0.1, 0.2])
