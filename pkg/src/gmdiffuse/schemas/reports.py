"""
Pydantic schemas for diagnostic reports.

All reports serialize to JSON through model_dump(mode="json").
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr


class ScoreErrorReport(BaseModel):
    """Monte-Carlo estimate of E_{P_t} ||grad ln p_t - s||^2."""

    t: float = Field(..., ge=0.0)
    mc_count: int = Field(..., ge=2)
    estimate: float = Field(..., ge=0.0)
    standard_error: float = Field(..., ge=0.0, description="Jackknife standard error")
    reference_energy: float = Field(..., ge=0.0, description="E ||grad ln p_t||^2")
    relative_error: Optional[float] = Field(
        None, description="sqrt(estimate / reference_energy); None when the energy is 0"
    )
    level: Optional[int] = None


class SpectrumReport(BaseModel):
    """Orthonormal Hermite coefficients of the posterior mean around a center."""

    sigma_sq: float = Field(..., gt=0.0)
    center: List[float]
    d_max: int = Field(..., ge=0)
    nodes_per_axis: int
    indices: List[List[int]] = Field(..., description="Multi-indices, graded-lex order")
    coefficients: List[List[float]] = Field(..., description="a_k, one n-vector per index")
    tail_sums: List[float] = Field(..., description="sum_{|k| >= d} ||a_k||^2 for d = 0..d_max+1")
    degree_energy: List[float] = Field(..., description="sum_{|k| = d} ||a_k||^2")
    function_energy: float = Field(..., description="Quadrature value of ||f||^2")

    # Quadrature grid kept in memory for truncation_check; not serialized
    _quadrature: Optional[Dict[str, Any]] = PrivateAttr(default=None)

    @property
    def residual_energy(self) -> float:
        """Quadrature energy not captured by degrees <= d_max."""
        return max(0.0, self.function_energy - self.tail_sums[0])


class TVReport(BaseModel):
    """Total variation between two centered 1D Gaussians."""

    var_a: float
    var_b: float
    tv: float = Field(..., ge=0.0)
    quadrature_error: float = Field(..., ge=0.0)
    closed_form: float = Field(..., ge=0.0)


class ChangeOfMeasureReport(BaseModel):
    """Moment of the likelihood ratio of N(mu, 1) against N(0, 1)."""

    mu: float
    R: float
    a: float
    lhs_closed_form: float
    lhs_quadrature: float
    quadrature_error: float
    bound: float
    holds: bool
    tight: bool = Field(..., description="Equality within tolerance (|mu| = R)")


class ClusterMetrics(BaseModel):
    """Per-cluster comparison between generated and reference samples."""

    cluster: int
    generated_weight: float
    reference_weight: float
    weight_error: float
    mean_error: Optional[float] = Field(
        None, description="||mean_gen - mean_ref||; None when a set has no points in the cluster"
    )


class SampleQualityReport(BaseModel):
    """Sample-quality metrics: cluster weights/means and sliced Wasserstein-1."""

    generated_count: int
    reference_count: int
    n_directions: int
    direction_seed: int
    sliced_w1: float = Field(..., ge=0.0)
    clusters: List[ClusterMetrics]

    @property
    def max_weight_error(self) -> float:
        return max(c.weight_error for c in self.clusters)


class VPVEReport(BaseModel):
    """Agreement between the variance-exploding and variance-preserving clocks."""

    times: List[float]
    max_mean_error: float
    max_variance_error: float
    max_step_error: float = Field(..., description="Discrete reverse-step coupling error")
    tolerance: float
    passed: bool


class CoverageReport(BaseModel):
    """Distance from each true mean to its nearest warm-start center."""

    radius: float
    distances: List[float]
    covered: List[bool]

    @property
    def all_covered(self) -> bool:
        return all(self.covered)


# Export report schemas
__all__ = [
    "ScoreErrorReport",
    "SpectrumReport",
    "TVReport",
    "ChangeOfMeasureReport",
    "ClusterMetrics",
    "SampleQualityReport",
    "VPVEReport",
    "CoverageReport",
]
