"""
Pydantic schemas for gmdiffuse data contracts.
"""

# Mixture schemas
from gmdiffuse.schemas.mixture import (
    KLocalityParams,
    LocalityClause,
    LocalityViolation,
    MixtureComponent,
    MixtureSpec,
)

# Schedule schemas
from gmdiffuse.schemas.schedule import KLBoundReport, NoiseSchedule

# Warm-start schemas
from gmdiffuse.schemas.warm_start import WarmStartSet

# Training schemas
from gmdiffuse.schemas.training import LevelAudit, TrainConfig

# Report schemas
from gmdiffuse.schemas.reports import (
    ChangeOfMeasureReport,
    ClusterMetrics,
    CoverageReport,
    SampleQualityReport,
    ScoreErrorReport,
    SpectrumReport,
    TVReport,
    VPVEReport,
)

# Run config schemas
from gmdiffuse.schemas.run_config import Command, RunConfig

__all__ = [
    # Mixture
    "KLocalityParams",
    "LocalityClause",
    "LocalityViolation",
    "MixtureComponent",
    "MixtureSpec",
    # Schedule
    "KLBoundReport",
    "NoiseSchedule",
    # Warm starts
    "WarmStartSet",
    # Training
    "LevelAudit",
    "TrainConfig",
    # Reports
    "ChangeOfMeasureReport",
    "ClusterMetrics",
    "CoverageReport",
    "SampleQualityReport",
    "ScoreErrorReport",
    "SpectrumReport",
    "TVReport",
    "VPVEReport",
    # Run config
    "Command",
    "RunConfig",
]
