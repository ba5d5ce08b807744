"""
Subcommand handlers for the gmdiffuse CLI.

Each handler takes a resolved RunConfig, writes its outputs into cfg.out and
returns a status dict that the entry point prints.
"""

import logging
from typing import Any, Callable, Dict, Optional

import numpy as np
from pydantic import ValidationError

from gmdiffuse.core.errors import ConfigError, OracleUnavailableError
from gmdiffuse.core.storage import (
    FLOAT_FORMAT,
    read_json,
    read_samples_csv,
    write_json,
    write_samples_csv,
    write_table_csv,
)
from gmdiffuse.models.stack import TrainedStack
from gmdiffuse.schemas.mixture import MixtureSpec
from gmdiffuse.schemas.run_config import Command, RunConfig
from gmdiffuse.schemas.training import TrainConfig
from gmdiffuse.services.diagnostics import (
    hermite_coefficient_spectrum,
    sample_quality_metrics,
    score_error_profile,
    spectrum_rows,
    summarize_quality,
    truncation_check,
    tv_upper_bound,
    vp_ve_equivalence_check,
    warm_start_coverage,
)
from gmdiffuse.services.mixture_model import (
    discretize_mixture,
    oracle_models,
    sample_mixture,
    second_moment,
    validate_k_locality,
)
from gmdiffuse.services.noise_schedule import build_schedule, check_schedule, kl_bound_terms
from gmdiffuse.services.reverse_sampler import generate, write_generated_samples
from gmdiffuse.worker.sources import ArraySampleSource, MixtureSampleSource
from gmdiffuse.worker.tasks.training import train as train_stack


logger = logging.getLogger(__name__)

# Score-error levels reported by eval
MAX_PROFILE_LEVELS = 8

# Seed-stream tags for draws the CLI makes on top of cfg.seed
DISCRETIZE_STREAM = 1
REFERENCE_STREAM = 2


# ============================================================================
# Input helpers
# ============================================================================

def load_mixture(cfg: RunConfig) -> Optional[MixtureSpec]:
    """Mixture from cfg.mixture_spec or the cfg.mixture file, if either is set."""
    if cfg.mixture_spec is not None:
        return cfg.mixture_spec
    if cfg.mixture is None:
        return None
    try:
        return MixtureSpec.model_validate(read_json(cfg.mixture))
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(["mixture"] + [str(p) for p in first["loc"]])
        raise ConfigError(f"Invalid mixture file {cfg.mixture}: {key}: {first['msg']}", key=key)


def require_mixture(cfg: RunConfig) -> MixtureSpec:
    spec = load_mixture(cfg)
    if spec is None:
        raise ConfigError(f"'{cfg.command}' needs a mixture (--mixture or mixture_spec)", key="mixture")
    return spec


def oracle_spec(spec: MixtureSpec, cfg: RunConfig) -> MixtureSpec:
    """The mixture itself, or its discrete surrogate when it has ball components."""
    if spec.is_discrete:
        return spec
    logger.info(
        f"[INFO] Mixture has ball components; using {cfg.atoms_per_component} atoms per ball for exact scores"
    )
    return discretize_mixture(
        spec, cfg.atoms_per_component, np.random.SeedSequence([cfg.seed, DISCRETIZE_STREAM])
    )


def _train_config(cfg: RunConfig, spec: Optional[MixtureSpec], n: int) -> TrainConfig:
    knobs: Dict[str, Any] = {
        "eps": cfg.eps,
        "delta": cfg.delta,
        "degree": cfg.degree,
        "samples_per_level": cfg.samples_per_level,
        "refresh_samples": cfg.refresh_samples,
        "radius_constant": cfg.radius_constant,
        "rounds_constant": cfg.rounds_constant,
        "sample_constant": cfg.sample_constant,
        "seed": cfg.seed,
        "norm_bound": cfg.norm_bound,
        "M2": cfg.M2,
        "m2_samples": cfg.m2_samples,
        "threads": cfg.threads,
    }
    if spec is not None:
        return TrainConfig.for_mixture(spec, **knobs)

    if cfg.sigma0_sq is None:
        raise ConfigError("training from samples without a mixture needs 'sigma0_sq'", key="sigma0_sq")
    if cfg.locality is None:
        raise ConfigError("training from samples without a mixture needs 'locality'", key="locality")
    return TrainConfig(sigma0_sq=cfg.sigma0_sq, n=n, locality=cfg.locality, **knobs)


def _profile_levels(N: int) -> list:
    """Up to MAX_PROFILE_LEVELS levels spread over 2..N."""
    if N < 2:
        return []
    points = np.linspace(2, N, min(MAX_PROFILE_LEVELS, N - 1))
    return sorted(set(int(round(p)) for p in points))


# ============================================================================
# Handlers
# ============================================================================

def gen_mixture(cfg: RunConfig) -> Dict[str, Any]:
    """Sample P_0 to samples.csv and record the k-locality check."""
    spec = require_mixture(cfg)
    samples = sample_mixture(spec, cfg.count, cfg.seed)
    write_samples_csv(cfg.out / "samples.csv", samples)
    write_json(cfg.out / "mixture.json", spec.model_dump(mode="json"))

    violations = validate_k_locality(spec)
    write_json(cfg.out / "locality.json", [v.model_dump(mode="json") for v in violations])
    logger.info(f"[OK] Wrote {cfg.count} mixture samples to {cfg.out / 'samples.csv'}")
    return {"status": "completed", "command": cfg.command, "count": cfg.count, "violations": len(violations)}


def train(cfg: RunConfig) -> Dict[str, Any]:
    """Run the learning pipeline and save the TrainedStack into cfg.out."""
    spec = load_mixture(cfg)
    if cfg.samples is not None:
        source = ArraySampleSource(read_samples_csv(cfg.samples))
        logger.info(f"[INFO] Training from {source.points.shape[0]} samples in {cfg.samples}")
    elif spec is not None:
        source = MixtureSampleSource(spec, cfg.seed)
    else:
        raise ConfigError("'train' needs --samples or a mixture", key="samples")

    tcfg = _train_config(cfg, spec, source.n)
    stack = train_stack(source, tcfg)
    stack.save(cfg.out)
    write_json(cfg.out / "draws.json", [{"purpose": p, "count": c} for p, c in source.history])

    for problem in stack.check_invariants():
        logger.warning(f"[WARN] {problem}")

    final = stack.final_warm_starts
    return {
        "status": "completed",
        "command": cfg.command,
        "levels": stack.schedule.N,
        "refreshes": len(stack.refresh_levels),
        "warm_starts": final.size,
        "warm_start_radius": final.radius,
        "samples_consumed": source.consumed,
    }


def sample(cfg: RunConfig) -> Dict[str, Any]:
    """Generate samples from a trained stack, or from exact scores of a mixture."""
    model_hashes = None
    schedule_hash = None
    if cfg.models is not None:
        stack = TrainedStack.load(cfg.models)
        models, schedule = stack.models, stack.schedule
        model_hashes = TrainedStack.file_hashes(cfg.models)
        schedule_hash = model_hashes.pop("schedule.json", None)
    else:
        spec = load_mixture(cfg)
        if spec is None:
            raise ConfigError("'sample' needs --models or a mixture", key="models")
        exact = oracle_spec(spec, cfg)
        schedule = build_schedule(cfg.eps, spec.sigma0_sq, spec.n, second_moment(spec))
        models = oracle_models(exact, schedule.times[1:])
        write_json(cfg.out / "schedule.json", schedule.model_dump(mode="json"))
        logger.info("[INFO] Sampling with exact mixture scores")

    samples = generate(models, schedule, cfg.count, cfg.seed, threads=cfg.threads)
    path = write_generated_samples(
        cfg.out, samples, schedule, cfg.seed, model_hashes=model_hashes, schedule_hash=schedule_hash
    )
    return {"status": "completed", "command": cfg.command, "count": cfg.count, "samples": str(path)}


def evaluate(cfg: RunConfig) -> Dict[str, Any]:
    """Write metrics.json: score errors, sample quality, coverage and bound terms."""
    spec = require_mixture(cfg)
    metrics: Dict[str, Any] = {}

    if cfg.models is not None:
        stack = TrainedStack.load(cfg.models)
        schedule = stack.schedule
        levels = _profile_levels(schedule.N)
        try:
            profile = score_error_profile(
                stack.models, oracle_spec(spec, cfg), schedule, levels, cfg.mc_count, cfg.seed
            )
            metrics["score_errors"] = [r.model_dump(mode="json") for r in profile]
        except OracleUnavailableError as e:
            logger.warning(f"[WARN] Score errors skipped: {e.message}")
        metrics["coverage"] = warm_start_coverage(stack.final_warm_starts, spec).model_dump(mode="json")
        metrics["coverage"]["all_covered"] = all(metrics["coverage"]["covered"])
    else:
        schedule = build_schedule(cfg.eps, spec.sigma0_sq, spec.n, second_moment(spec))

    metrics["schedule"] = {"N": schedule.N, "T": schedule.T, "t1": schedule.t1, "kappa": schedule.kappa}
    metrics["schedule_violations"] = check_schedule(schedule)
    metrics["kl_bound"] = kl_bound_terms(schedule).model_dump(mode="json")
    metrics["tv_bound_t1"] = tv_upper_bound(schedule.t1, spec.sigma0_sq, spec.n)

    if cfg.generated is not None:
        generated = read_samples_csv(cfg.generated)
        if cfg.reference is not None:
            reference = read_samples_csv(cfg.reference)
        else:
            reference = sample_mixture(
                spec, generated.shape[0], np.random.SeedSequence([cfg.seed, REFERENCE_STREAM])
            )
        quality = sample_quality_metrics(generated, reference, spec.means, direction_seed=cfg.seed)
        metrics["sample_quality"] = quality.model_dump(mode="json")
        metrics["sample_quality"]["summary"] = summarize_quality(quality)

    metrics["vp_ve"] = vp_ve_equivalence_check(cfg.seed).model_dump(mode="json")

    write_json(cfg.out / "metrics.json", metrics)
    summary: Dict[str, Any] = {"status": "completed", "command": cfg.command, "metrics": str(cfg.out / "metrics.json")}
    if "sample_quality" in metrics:
        summary.update(metrics["sample_quality"]["summary"])
    return summary


def spectrum(cfg: RunConfig) -> Dict[str, Any]:
    """Hermite spectrum of the posterior mean: spectrum.json and spectrum.csv."""
    spec = require_mixture(cfg)
    center = cfg.center if cfg.center is not None else [0.0] * spec.n
    report = hermite_coefficient_spectrum(oracle_spec(spec, cfg), cfg.sigma_sq, center, cfg.d_max)

    truncation = []
    for d in range(report.d_max + 2):
        tail, error = truncation_check(report, d)
        truncation.append({"degree": d, "tail": tail, "error": error})

    payload = report.model_dump(mode="json")
    payload["truncation"] = truncation
    payload["residual_energy"] = report.residual_energy
    write_json(cfg.out / "spectrum.json", payload)
    write_table_csv(cfg.out / "spectrum.csv", ["degree", "tail"], spectrum_rows(report), ["%d", FLOAT_FORMAT])
    return {
        "status": "completed",
        "command": cfg.command,
        "d_max": report.d_max,
        "function_energy": report.function_energy,
    }


HANDLERS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    Command.GEN_MIXTURE.value: gen_mixture,
    Command.TRAIN.value: train,
    Command.SAMPLE.value: sample,
    Command.EVAL.value: evaluate,
    Command.SPECTRUM.value: spectrum,
}


# Export handlers
__all__ = ["HANDLERS", "load_mixture", "gen_mixture", "train", "sample", "evaluate", "spectrum"]
