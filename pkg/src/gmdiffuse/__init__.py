"""
gmdiffuse: learning Gaussian mixtures with a score-based diffusion model.

Packages:
    core      settings, logging, errors, run-directory persistence
    schemas   pydantic data contracts (mixtures, schedules, configs, reports)
    models    fitted objects (Hermite basis, score models, model stack)
    services  mixture oracles, features, schedule, regression, sampler, diagnostics
    worker    thread pool, sample sources, the learning pipeline task
    cli       command-line entry point
"""

__version__ = "1.0.0"
