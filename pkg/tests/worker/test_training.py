"""
Tests for the learning pipeline task.

Most end-to-end runs use eps = 0.5 so the schedule stays short; the
triangle run at eps = 0.3 takes several minutes.
"""

import logging
import math

import numpy as np
import pytest

from gmdiffuse.core.errors import ArtifactError, InsufficientSamplesError, InvalidParameterError
from gmdiffuse.models.stack import TrainedStack
from gmdiffuse.schemas.mixture import KLocalityParams, MixtureComponent, MixtureSpec
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.schemas.training import TrainConfig
from gmdiffuse.services.diagnostics import sample_quality_metrics, score_l2_error, warm_start_coverage
from gmdiffuse.services.mixture_model import sample_mixture, second_moment
from gmdiffuse.services.noise_schedule import build_schedule
from gmdiffuse.services.reverse_sampler import generate
from gmdiffuse.services.warm_starts import round_budget
from gmdiffuse.worker.sources import ArraySampleSource, MixtureSampleSource
from gmdiffuse.worker.tasks.training import degree_formula, halving_refresh_points, train


def _schedule(times):
    return NoiseSchedule(
        times=times, kappa=math.log(2.0) / 2.0, T=times[-1], eps_budgets=[0.1] * len(times),
        M2=1.0, n=1, eps=0.5, sigma0_sq=1.0,
    )


# ============================================================================
# Helpers
# ============================================================================

def test_halving_every_level_on_doubling_grid():
    # t + 1 doubles between consecutive times
    schedule = _schedule([1.0, 3.0, 7.0, 15.0, 31.0])
    assert halving_refresh_points(schedule) == {1, 2, 3, 4}


def test_halving_none_on_short_grid():
    assert halving_refresh_points(_schedule([2.0, 3.0])) == set()


def test_degree_formula():
    log_inv = math.log(2.0)
    assert degree_formula(0.5, 1.0, 1.0) == math.ceil((log_inv ** 3 + 1.0) * log_inv ** 4)
    assert degree_formula(0.5, 2.0, 4.0) == degree_formula(0.5, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        degree_formula(1.0, 1.0, 1.0)


# ============================================================================
# train
# ============================================================================

@pytest.fixture(scope="module")
def single_atom_stack():
    spec = MixtureSpec(
        n=1,
        sigma0_sq=1.0,
        components=[MixtureComponent(mean=[0.0], weight=1.0)],
        locality=KLocalityParams(R0=1.0, alpha_min=1.0, D=1.0, k=1),
    )
    cfg = TrainConfig.for_mixture(spec, eps=0.5, samples_per_level=20_000, seed=11, M2=1.0)
    return spec, train(MixtureSampleSource(spec, seed=3), cfg)


def test_single_atom_stack_accuracy(single_atom_stack):
    spec, stack = single_atom_stack
    errors = [
        score_l2_error(stack.model_at(level), spec, stack.schedule.time_at(level), 5000, seed=level)
        .relative_error
        for level in range(1, stack.schedule.N + 1)
    ]
    assert np.mean(errors) <= 0.15


def test_single_atom_stack_structure(single_atom_stack):
    _, stack = single_atom_stack
    schedule = stack.schedule
    assert stack.check_invariants() == []
    assert sorted(stack.models) == schedule.times[1:]
    assert stack.terminal_model is not None
    assert [a.level for a in stack.audit] == list(range(schedule.N, 0, -1))
    assert stack.refresh_levels == sorted(halving_refresh_points(schedule))
    assert stack.degree_info["effective"] == min(stack.degree_info["formula"], 4)


def test_stack_save_load_roundtrip(single_atom_stack, tmp_path):
    _, stack = single_atom_stack
    stack.save(tmp_path / "models")
    restored = TrainedStack.load(tmp_path / "models")
    assert restored.schedule == stack.schedule
    assert restored.refresh_levels == stack.refresh_levels
    assert restored.check_invariants() == []
    ys = np.linspace(-5, 5, 11).reshape(-1, 1)
    for t, model in stack.models.items():
        np.testing.assert_array_equal(restored.models[t].score(ys), model.score(ys))
    hashes = TrainedStack.file_hashes(tmp_path / "models")
    assert "schedule.json" in hashes
    assert len(hashes) == stack.schedule.N + 1


def test_load_missing_directory(tmp_path):
    with pytest.raises(ArtifactError):
        TrainedStack.load(tmp_path / "nope")


def test_pair_warm_starts_cover_both_modes(pair4, caplog):
    cfg = TrainConfig.for_mixture(
        pair4, eps=0.5, samples_per_level=4000, seed=2, M2=second_moment(pair4)
    )
    with caplog.at_level(logging.WARNING, logger="gmdiffuse"):
        stack = train(MixtureSampleSource(pair4, seed=9), cfg)
    # high-noise refreshes merge both modes into one center
    collapsed = [a.level for a in stack.audit if a.refreshed and a.warm_start_count == 1]
    assert collapsed
    assert sum("collapsed to a single center" in r.getMessage() for r in caplog.records) == len(collapsed)
    final = stack.final_warm_starts
    assert final.size <= round_budget(pair4.locality)
    distances = np.abs(pair4.means[:, 0][:, None] - final.center_array[:, 0][None, :]).min(axis=1)
    assert np.all(distances <= final.radius)
    assert stack.check_invariants() == []


def test_exhausted_stream_reports_level(delta0):
    cfg = TrainConfig.for_mixture(delta0, eps=0.5, samples_per_level=60, seed=0, M2=1.0)
    source = ArraySampleSource(sample_mixture(delta0, 100, seed=1))
    with pytest.raises(InsufficientSamplesError) as info:
        train(source, cfg)
    assert info.value.level == build_schedule(0.5, 1.0, 1, 1.0).N - 1
    assert info.value.context["level"] == info.value.level


def test_dimension_mismatch(delta0, triangle):
    cfg = TrainConfig.for_mixture(delta0, eps=0.5, seed=0, M2=1.0)
    with pytest.raises(InvalidParameterError):
        train(MixtureSampleSource(triangle, seed=0), cfg)


def test_triangle_end_to_end(triangle):
    cfg = TrainConfig.for_mixture(triangle, eps=0.3, degree=4, samples_per_level=20_000, seed=0)
    stack = train(MixtureSampleSource(triangle, seed=1), cfg)
    assert stack.check_invariants() == []
    assert warm_start_coverage(stack.final_warm_starts, triangle).all_covered

    generated = generate(stack.models, stack.schedule, 10_000, seed=2)
    reference = sample_mixture(triangle, 10_000, seed=3)
    report = sample_quality_metrics(generated, reference, triangle.means)
    assert report.sliced_w1 <= 0.5
    assert report.max_weight_error <= 0.1
