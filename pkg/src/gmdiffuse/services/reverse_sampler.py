"""
Reverse Sampler Service
Version: 1.0.0

Generates samples by discretizing the variance-exploding reverse SDE on the
schedule grid, from t_N = T down to t_1:

    y <- y + c(t_{l-1}, t_l) s_{t_l}(y) + sqrt(t_l - t_{l-1}) xi,

with the score consumed at the upper time of each interval and
c = 2[(t_l + 1) - sqrt((t_{l-1} + 1)(t_l + 1))].

Trajectories start from N(0, (T + 1) I_n). Randomness is counter based:
trajectory i lives in block i // B, whose Philox stream is keyed by
(seed, block). Every block draws full-width noise, so any trajectory's path is
independent of how many samples were requested and of the thread count.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from gmdiffuse.core import config
from gmdiffuse.core.errors import (
    InvalidParameterError,
    MissingScoreError,
    ScoreEvaluationError,
    TrajectoryDivergedError,
)
from gmdiffuse.core.storage import sha256_file, write_json, write_samples_csv
from gmdiffuse.models.trajectory import ReverseTrajectory
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.services.noise_schedule import reverse_step_coefficient
from gmdiffuse.worker.pool import run_concurrently


logger = logging.getLogger(__name__)

ScoreFunction = Callable[[np.ndarray], np.ndarray]
CoefficientFunction = Callable[[float, float], float]

# Relative tolerance when matching model keys to schedule times
TIME_MATCH_RTOL = 1e-12


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of trajectories."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def init_sample(T: float, n: int, seed, count: Optional[int] = None) -> np.ndarray:
    """
    Draw y_T ~ N(0, (T + 1) I_n).

    Returns:
        np.ndarray: (n,) when count is None, else (count, n)
    """
    if T <= 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    shape = (n,) if count is None else (count, n)
    return math.sqrt(T + 1.0) * rng.standard_normal(shape)


def reverse_step(
    y,
    score_value,
    t_prev: float,
    t_next: float,
    noise,
    coefficient: CoefficientFunction = reverse_step_coefficient,
) -> np.ndarray:
    """
    One reverse step from t_next down to t_prev.

    Raises:
        InvalidParameterError: If t_prev >= t_next
    """
    if t_prev >= t_next:
        raise InvalidParameterError(f"t_prev={t_prev} must be below t_next={t_next}")
    c = coefficient(t_prev, t_next)
    return (
        np.asarray(y, dtype=float)
        + c * np.asarray(score_value, dtype=float)
        + math.sqrt(t_next - t_prev) * np.asarray(noise, dtype=float)
    )


def resolve_models(models: Mapping[float, ScoreFunction], times: Sequence[float]) -> List[ScoreFunction]:
    """
    Score estimate for every requested time.

    Keys match exactly or within a relative 1e-12.

    Raises:
        MissingScoreError: Listing every time without a model
    """
    keys = np.array(sorted(float(k) for k in models), dtype=float)
    by_key: Dict[float, ScoreFunction] = {float(k): v for k, v in models.items()}

    resolved: List[ScoreFunction] = []
    missing: List[float] = []
    for t in times:
        if t in by_key:
            resolved.append(by_key[t])
            continue
        if keys.size:
            nearest = keys[np.argmin(np.abs(keys - t))]
            if abs(nearest - t) <= TIME_MATCH_RTOL * max(1.0, abs(t)):
                resolved.append(by_key[float(nearest)])
                continue
        missing.append(t)

    if missing:
        preview = ", ".join(f"{t:.6g}" for t in missing[:5])
        raise MissingScoreError(
            f"no score estimate for {len(missing)} schedule times (first: {preview})",
            missing=len(missing),
        )
    return resolved


def _evaluate_score(score: ScoreFunction, y: np.ndarray, t: float) -> np.ndarray:
    try:
        value = np.asarray(score(y), dtype=float)
    except Exception as e:
        raise ScoreEvaluationError(f"score at t={t:.6g} failed: {e}") from e
    if value.shape != y.shape:
        raise ScoreEvaluationError(
            f"score at t={t:.6g} returned shape {value.shape}, expected {y.shape}"
        )
    return value


def _simulate_block(
    scores: Sequence[ScoreFunction],
    times: Sequence[float],
    n: int,
    seed: int,
    block: int,
    block_size: int,
    coefficient: CoefficientFunction,
    record_row: Optional[int] = None,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Run one block of trajectories from T down to t_1.

    scores[i] is the estimate at times[i + 1].
    """
    rng = block_generator(seed, block)
    T = times[-1]
    y = math.sqrt(T + 1.0) * rng.standard_normal((block_size, n))
    path: List[np.ndarray] = [] if record_row is None else [y[record_row].copy()]

    for i in range(len(times) - 1, 0, -1):
        t_next, t_prev = times[i], times[i - 1]
        value = _evaluate_score(scores[i - 1], y, t_next)
        noise = rng.standard_normal((block_size, n))
        y = reverse_step(y, value, t_prev, t_next, noise, coefficient)

        if not np.all(np.isfinite(y)):
            raise TrajectoryDivergedError(
                f"non-finite state in block {block} at t={t_prev:.6g}",
                block=block,
                t=t_prev,
            )
        if record_row is not None:
            path.append(y[record_row].copy())

    return y, path


def generate(
    models: Mapping[float, ScoreFunction],
    schedule: NoiseSchedule,
    count: int,
    seed: int,
    block_size: Optional[int] = None,
    threads: Optional[int] = None,
    coefficient: CoefficientFunction = reverse_step_coefficient,
) -> np.ndarray:
    """
    Sample approximately from P_{t_1}.

    Args:
        models: Map time -> score estimate; needs every schedule time above t_1
        schedule: Noise schedule
        count: Number of samples (>= 0)
        seed: Nonnegative integer seed
        block_size: Trajectories per RNG block (defaults to GMDIFFUSE_SAMPLER_BLOCK)
        threads: Worker cap for blocks
        coefficient: Step coefficient function

    Returns:
        np.ndarray: (count, n) terminal states at t_1

    Raises:
        MissingScoreError: Before simulating, if a required time has no model
        TrajectoryDivergedError: If a state becomes non-finite
    """
    if count < 0:
        raise InvalidParameterError(f"count must be nonnegative, got {count}")
    times = schedule.times
    scores = resolve_models(models, times[1:])
    n = schedule.n
    if count == 0:
        return np.empty((0, n))

    width = block_size or config.SAMPLER_BLOCK_SIZE
    n_blocks = math.ceil(count / width)
    logger.info(
        f"[INFO] Generating {count} samples over {len(times) - 1} steps "
        f"({n_blocks} blocks); initial variance T+1={schedule.T + 1.0:.6g} (not t_N={schedule.T:.6g})"
    )

    def run_block(b: int) -> np.ndarray:
        states, _ = _simulate_block(scores, times, n, seed, b, width, coefficient)
        return states

    blocks = run_concurrently(run_block, range(n_blocks), threads)
    samples = np.concatenate(blocks, axis=0)[:count]
    logger.info(f"[OK] Generated {count} samples at t_1={times[0]:.6g}")
    return samples


def trace_trajectory(
    models: Mapping[float, ScoreFunction],
    schedule: NoiseSchedule,
    seed: int,
    index: int,
    block_size: Optional[int] = None,
    coefficient: CoefficientFunction = reverse_step_coefficient,
) -> ReverseTrajectory:
    """Full path of trajectory `index` of generate(models, schedule, count, seed)."""
    if index < 0:
        raise InvalidParameterError(f"index must be nonnegative, got {index}")
    times = schedule.times
    scores = resolve_models(models, times[1:])
    width = block_size or config.SAMPLER_BLOCK_SIZE

    _, path = _simulate_block(
        scores, times, schedule.n, seed, index // width, width, coefficient, record_row=index % width
    )
    return ReverseTrajectory(times[::-1], np.array(path), seed=seed, index=index)


def write_generated_samples(
    out_dir,
    samples: np.ndarray,
    schedule: NoiseSchedule,
    seed: int,
    model_hashes: Optional[Dict[str, str]] = None,
    schedule_hash: Optional[str] = None,
    block_size: Optional[int] = None,
) -> Path:
    """
    Write samples.csv and its samples.json sidecar.

    Returns:
        Path: The CSV file
    """
    out_dir = Path(out_dir)
    csv_path = write_samples_csv(out_dir / "samples.csv", samples)
    sidecar = {
        "count": int(samples.shape[0]),
        "n": schedule.n,
        "seed": seed,
        "block_size": block_size or config.SAMPLER_BLOCK_SIZE,
        "schedule": {
            "N": schedule.N,
            "T": schedule.T,
            "t1": schedule.t1,
            "kappa": schedule.kappa,
            "eps": schedule.eps,
            "sha256": schedule_hash,
        },
        "models": model_hashes or {},
        "samples_sha256": sha256_file(csv_path),
    }
    write_json(out_dir / "samples.json", sidecar)
    return csv_path


# Export sampler services
__all__ = [
    "block_generator",
    "init_sample",
    "reverse_step",
    "resolve_models",
    "generate",
    "trace_trajectory",
    "write_generated_samples",
]
