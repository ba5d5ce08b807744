"""
Learning Pipeline Task
Version: 1.0.0

Learns a score estimate at every schedule time, from the largest noise level
down, refining the warm starts (approximate component centers) each time
the noise scale has halved.

Pipeline Flow:
    Pilot batch -> M2 -> build_schedule -> degree, refresh plan
                              |
                              v
    for l = N .. 1:   fresh batch -> noise to t_l -> Voronoi cells of C_l
                              |
                              v
                      fit_piecewise (norm-constrained Hermite regression)
                              |
                              v  (l in refresh plan)
                      fresh batch -> noise to t_l -> denoise -> greedy cover
                              |
                              v
                      C_{l-1}, LevelAudit
                              |
                              v
                      TrainedStack

Seeding:
    All noise at level l comes from SeedSequence([seed, l, purpose]), so a
    run is reproducible from the config seed and the sample stream alone.
"""

import logging
import math
import time
from typing import List, Set

import numpy as np

from gmdiffuse.core.errors import InsufficientSamplesError, InvalidParameterError
from gmdiffuse.models.stack import TrainedStack
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.schemas.training import LevelAudit, TrainConfig
from gmdiffuse.schemas.warm_start import WarmStartSet
from gmdiffuse.services.hermite_features import build_basis
from gmdiffuse.services.noise_schedule import build_schedule, estimate_second_moment
from gmdiffuse.services.score_regression import build_denoising_dataset, fit_piecewise
from gmdiffuse.services.warm_starts import (
    refresh_radius,
    refresh_warm_starts_with_residual,
    required_refresh_samples,
)
from gmdiffuse.worker.sources import SampleSource


logger = logging.getLogger(__name__)

# Relative slack when testing the halving condition on t + 1
HALVING_RTOL = 1e-12

# Purpose codes for per-level seed streams
REGRESSION_NOISE = 0
REFRESH_NOISE = 1


def degree_formula(eps: float, R0: float, sigma0_sq: float) -> int:
    """ceil((ln(1/eps)^3 + (R0/sigma0)^6) ln(1/eps)^4)."""
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError(f"eps must be in (0, 1), got {eps}")
    log_inv = math.log(1.0 / eps)
    return math.ceil((log_inv ** 3 + (R0 / math.sqrt(sigma0_sq)) ** 6) * log_inv ** 4)


def halving_refresh_points(schedule: NoiseSchedule) -> Set[int]:
    """
    Levels after whose fit the warm starts are refreshed.

    Scanning l = N down to 1, level l is a refresh point when
    t_l + 1 <= (t_last + 1) / 2, where t_last is the time of the previous
    refresh (initially T).
    """
    refresh: Set[int] = set()
    t_last = schedule.T
    for level in range(schedule.N, 0, -1):
        t = schedule.time_at(level)
        if (t + 1.0) <= 0.5 * (t_last + 1.0) * (1.0 + HALVING_RTOL):
            refresh.add(level)
            t_last = t
    return refresh


def _level_seed(seed: int, level: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(level), int(purpose)])


def _at_level(error: InsufficientSamplesError, level: int, prefix: str = "") -> InsufficientSamplesError:
    context = {k: v for k, v in error.context.items() if k != "level"}
    return InsufficientSamplesError(f"{prefix}{error.message}", level=level, **context)


def _draw(source: SampleSource, count: int, level: int, purpose: str) -> np.ndarray:
    try:
        return source.draw(count, purpose=f"{purpose}:{level}")
    except InsufficientSamplesError as e:
        raise _at_level(e, level, f"level {level} {purpose}: ") from e


def train(source: SampleSource, cfg: TrainConfig) -> TrainedStack:
    """
    Learn score models for every schedule level.

    Args:
        source: Stream of fresh P_0 samples
        cfg: Training configuration

    Returns:
        TrainedStack: models for t_2..t_N, the t_1 fit, warm-start history,
            per-level audit

    Raises:
        InsufficientSamplesError: If the stream runs dry or a refresh batch
            is below the required size; carries the level
        InvalidParameterError: If the stream dimension differs from cfg.n
    """
    if source.n != cfg.n:
        raise InvalidParameterError(f"sample source has dimension {source.n}, config says {cfg.n}")
    started = time.perf_counter()
    locality = cfg.locality

    M2 = cfg.M2
    if M2 is None:
        pilot = source.draw(cfg.m2_samples, purpose="second_moment")
        M2 = estimate_second_moment(pilot)

    schedule = build_schedule(cfg.eps, cfg.sigma0_sq, cfg.n, M2)
    N = schedule.N

    formula = degree_formula(cfg.eps, locality.R0, cfg.sigma0_sq)
    degree = min(formula, cfg.degree)
    if degree < formula:
        logger.info(f"[INFO] Hermite degree capped at {degree} (formula gives {formula})")

    refresh_levels = halving_refresh_points(schedule)
    norm_bound = cfg.effective_norm_bound
    level_delta = cfg.delta / (2.0 * N)
    refresh_batch = max(
        cfg.refresh_samples, required_refresh_samples(locality, level_delta, cfg.sample_constant)
    )

    sigma_top = schedule.T + cfg.sigma0_sq
    warm = WarmStartSet(
        centers=[[0.0] * cfg.n],
        radius=max(norm_bound, refresh_radius(locality, sigma_top, cfg.radius_constant)),
        noise_level=sigma_top,
    )
    history = {N: warm}
    models = {}
    terminal_model = None
    audit: List[LevelAudit] = []

    logger.info(
        f"[INFO] Training {N} levels: degree {degree}, {cfg.samples_per_level} samples/level, "
        f"{len(refresh_levels)} refreshes of {refresh_batch} samples"
    )

    report_every = max(1, N // 10)
    for level in range(N, 0, -1):
        level_started = time.perf_counter()
        t = schedule.time_at(level)
        sigma_sq = t + cfg.sigma0_sq

        batch = _draw(source, cfg.samples_per_level, level, "regression")
        ds = build_denoising_dataset(
            batch, t, cfg.sigma0_sq, warm, _level_seed(cfg.seed, level, REGRESSION_NOISE)
        )
        basis = build_basis(cfg.n, degree, sigma_sq)
        model = fit_piecewise(ds, basis, norm_bound, threads=cfg.threads)
        if level == 1:
            terminal_model = model
        else:
            models[t] = model

        cell_partition = warm
        refreshed = level in refresh_levels
        refresh_draws = 0
        uncovered = None
        if refreshed:
            fresh = _draw(source, refresh_batch, level, "refresh")
            rng = np.random.default_rng(_level_seed(cfg.seed, level, REFRESH_NOISE))
            noisy = fresh + math.sqrt(t) * rng.standard_normal(fresh.shape)
            try:
                warm, uncovered = refresh_warm_starts_with_residual(
                    model,
                    noisy,
                    locality,
                    sigma_sq,
                    level_delta,
                    cfg.radius_constant,
                    cfg.rounds_constant,
                    cfg.sample_constant,
                )
            except InsufficientSamplesError as e:
                raise _at_level(e, level) from e
            history[level - 1] = warm
            refresh_draws = refresh_batch
            if warm.size == 1 and locality.k > 1:
                logger.warning(
                    f"[WARN] Level {level}: refresh collapsed to a single center (k={locality.k}); "
                    f"radius {warm.radius:.4g} covers every candidate, cells are trivial"
                )

        counts = model.cell_counts
        losses = model.cell_losses
        fitted = [(c, l) for c, l in zip(counts, losses) if l is not None]
        total = sum(c for c, _ in fitted)
        audit.append(
            LevelAudit(
                level=level,
                t=t,
                sigma_sq=sigma_sq,
                cell_count=cell_partition.size,
                cell_sample_counts=counts,
                cell_losses=losses,
                empirical_loss=sum(c * l for c, l in fitted) / total if total else 0.0,
                refreshed=refreshed,
                warm_start_count=warm.size,
                warm_start_radius=warm.radius,
                regression_draws=cfg.samples_per_level,
                refresh_draws=refresh_draws,
                uncovered=uncovered,
                elapsed_seconds=time.perf_counter() - level_started,
            )
        )

        if refreshed:
            logger.info(
                f"[INFO] Level {level}/{N} (t={t:.4g}): refreshed to {warm.size} warm starts, "
                f"radius {warm.radius:.4g}"
            )
        elif level % report_every == 0:
            logger.info(f"[INFO] Level {level}/{N} (t={t:.4g}) fitted on {cell_partition.size} cells")

    stack = TrainedStack(
        schedule=schedule,
        models=models,
        terminal_model=terminal_model,
        warm_start_history=history,
        audit=audit,
        config=cfg,
        degree_info={"formula": formula, "effective": degree},
        refresh_levels=sorted(refresh_levels),
    )
    logger.info(
        f"[OK] Training complete: {N} levels, {source.consumed} samples consumed, "
        f"{time.perf_counter() - started:.1f}s"
    )
    return stack


# Export pipeline task
__all__ = ["train", "degree_formula", "halving_refresh_points"]
