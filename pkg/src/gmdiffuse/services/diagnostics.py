"""
Diagnostics Service
Version: 1.0.0

Quantitative checks on learned scores, spectra and generated samples.

Checks:
    - Score error: Monte-Carlo E_{P_t} ||grad ln p_t - s||^2 against the exact
      score of a discrete mixture, with a jackknife standard error
    - Hermite spectrum: orthonormal coefficients of the posterior mean around
      a center by tensor Gauss-Hermite quadrature (n <= 2), their tail sums,
      and the direct truncation error they must agree with
    - TV: the bound sigma^2 sqrt(n) / (sqrt(2) sigma0^2) and the exact 1D
      Gaussian TV it dominates
    - Change of measure: moments of dN(mu,1)/dN(0,1) against e^{a(a+1)R^2/2}
    - Sample quality: cluster weights and means, sliced Wasserstein-1
    - VP/VE: matching marginals and a matching reverse step on both clocks
"""

import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, stats
from scipy.spatial.distance import cdist

from gmdiffuse.core.errors import InvalidParameterError
from gmdiffuse.schemas.mixture import MixtureSpec
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
from gmdiffuse.schemas.schedule import NoiseSchedule
from gmdiffuse.schemas.warm_start import WarmStartSet
from gmdiffuse.services.hermite_features import enumerate_multi_indices, hermite_table
from gmdiffuse.services.mixture_model import exact_score, posterior_mean, sample_mixture
from gmdiffuse.services.reverse_sampler import resolve_models, reverse_step
from gmdiffuse.services.warm_starts import assign_voronoi


logger = logging.getLogger(__name__)

ScoreFunction = Callable[[np.ndarray], np.ndarray]

MAX_SPECTRUM_DIM = 2
MAX_SPECTRUM_DEGREE = 60
QUAD_TOL = 1e-12


# ============================================================================
# Score error
# ============================================================================

def _jackknife_mean_se(values: np.ndarray) -> float:
    """Jackknife standard error of the sample mean."""
    m = values.size
    leave_one_out = (values.sum() - values) / (m - 1)
    spread = leave_one_out - leave_one_out.mean()
    return float(math.sqrt((m - 1) / m * np.dot(spread, spread)))


def score_l2_error(
    model: ScoreFunction,
    spec: MixtureSpec,
    t: float,
    mc_count: int,
    seed,
    level: Optional[int] = None,
) -> ScoreErrorReport:
    """
    Estimate E_{P_t} ||grad ln p_t(y) - s_t(y)||^2.

    Args:
        model: Score estimate at time t (any callable on (m, n) batches)
        spec: Discrete mixture defining the exact score
        t: Noise time (>= 0)
        mc_count: Monte-Carlo draws from P_t (>= 2)
        seed: Seed for the draws
        level: Schedule level, recorded on the report

    Returns:
        ScoreErrorReport: estimate, jackknife standard error, relative error
    """
    if mc_count < 2:
        raise InvalidParameterError(f"mc_count must be at least 2, got {mc_count}")
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t}")

    rng = np.random.default_rng(seed)
    ys = sample_mixture(spec, mc_count, rng)
    if t > 0:
        ys = ys + math.sqrt(t) * rng.standard_normal(ys.shape)

    truth = exact_score(spec, ys, t)
    residual = truth - np.asarray(model(ys), dtype=float)
    sq_errors = np.einsum("ij,ij->i", residual, residual)
    energy = float(np.mean(np.einsum("ij,ij->i", truth, truth)))

    estimate = float(sq_errors.mean())
    return ScoreErrorReport(
        t=t,
        mc_count=mc_count,
        estimate=estimate,
        standard_error=_jackknife_mean_se(sq_errors),
        reference_energy=energy,
        relative_error=math.sqrt(estimate / energy) if energy > 0 else None,
        level=level,
    )


def score_error_profile(
    models: Mapping[float, ScoreFunction],
    spec: MixtureSpec,
    schedule: NoiseSchedule,
    levels: Sequence[int],
    mc_count: int,
    seed: int,
) -> List[ScoreErrorReport]:
    """score_l2_error at several schedule levels, one seed stream per level."""
    reports = []
    for level in levels:
        t = schedule.time_at(level)
        model = resolve_models(models, [t])[0]
        report = score_l2_error(
            model, spec, t, mc_count, np.random.SeedSequence([int(seed), int(level)]), level=level
        )
        logger.debug(
            f"[INFO] Level {level}: score error {report.estimate:.4e} +/- {report.standard_error:.2e}"
        )
        reports.append(report)
    return reports


# ============================================================================
# Hermite spectrum
# ============================================================================

def hermite_coefficient_spectrum(
    spec: Optional[MixtureSpec],
    sigma_sq: float,
    center,
    d_max: int,
    nodes: Optional[int] = None,
    function: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> SpectrumReport:
    """
    Orthonormal Hermite coefficients of f around a center.

    a_k = E_{u ~ N(0, I)} [f(center + sigma u) h_k(u)] with h_k the
    orthonormal tensor Hermite polynomials, by tensor Gauss-Hermite
    quadrature with at least 2 d_max + 1 nodes per axis. f is the posterior
    mean f_{sigma^2} of the mixture unless `function` is given.

    Raises:
        InvalidParameterError: If n > 2, d_max is out of [0, 60], or neither
            a mixture nor a function is supplied
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = center.size
    if spec is not None and spec.n != n:
        raise InvalidParameterError(f"center has dimension {n}, mixture has {spec.n}")
    if n > MAX_SPECTRUM_DIM:
        raise InvalidParameterError(f"spectrum needs n <= {MAX_SPECTRUM_DIM}, got {n}")
    if not 0 <= d_max <= MAX_SPECTRUM_DEGREE:
        raise InvalidParameterError(f"d_max must be in [0, {MAX_SPECTRUM_DEGREE}], got {d_max}")
    if sigma_sq <= 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    if function is None:
        if spec is None:
            raise InvalidParameterError("need a mixture or a function to expand")

        def function(ys: np.ndarray) -> np.ndarray:
            return posterior_mean(spec, ys, sigma_sq)

    q = max(nodes or 0, 2 * d_max + 1)
    u_nodes, raw_weights = hermegauss(q)
    weights = raw_weights / math.sqrt(2.0 * math.pi)
    table = hermite_table(d_max, u_nodes, normalized=True)  # (q, d_max + 1)

    axes = np.meshgrid(*([u_nodes] * n), indexing="ij")
    u_grid = np.stack([a.ravel() for a in axes], axis=1)
    values = np.asarray(function(center + math.sqrt(sigma_sq) * u_grid), dtype=float)
    values = values.reshape((q,) * n + (-1,))

    if n == 1:
        dense = np.einsum("i,io,ik->ko", weights, values, table)
        grid_weights = weights
    else:
        dense = np.einsum("i,j,ijo,ik,jl->klo", weights, weights, values, table, table)
        grid_weights = np.outer(weights, weights)

    indices = enumerate_multi_indices(n, d_max, cap=math.comb(n + d_max, d_max))
    coefficients = np.array([dense[idx.entries] for idx in indices])
    degrees = np.array([idx.degree for idx in indices])
    energies = np.einsum("ij,ij->i", coefficients, coefficients)

    degree_energy = np.bincount(degrees, weights=energies, minlength=d_max + 1)
    tail_sums = np.append(np.cumsum(degree_energy[::-1])[::-1], 0.0)
    function_energy = float(np.sum(grid_weights[..., None] * values ** 2))

    report = SpectrumReport(
        sigma_sq=sigma_sq,
        center=center.tolist(),
        d_max=d_max,
        nodes_per_axis=q,
        indices=[list(idx.entries) for idx in indices],
        coefficients=coefficients.tolist(),
        tail_sums=tail_sums.tolist(),
        degree_energy=degree_energy.tolist(),
        function_energy=function_energy,
    )
    report._quadrature = {
        "weights": grid_weights,
        "values": values,
        "table": table,
        "dense": dense,
    }
    logger.info(
        f"[OK] Hermite spectrum: n={n}, d_max={d_max}, {q} nodes/axis, "
        f"energy {function_energy:.6g}, residual beyond d_max {report.residual_energy:.2e}"
    )
    return report


def truncation_check(report: SpectrumReport, d: int) -> Tuple[float, float]:
    """
    (tail sum at d, quadrature L^2 error of the degree-<d truncation).

    The error is measured directly on the quadrature grid and then has
    report.residual_energy (the grid energy beyond d_max, which no tail sum
    sees) removed, so by Parseval the two values agree to rounding. A
    mismatch means the coefficients or the grid orthonormality are off.
    """
    if not 0 <= d <= report.d_max + 1:
        raise InvalidParameterError(f"d must be in [0, {report.d_max + 1}], got {d}")
    quad = report._quadrature
    if quad is None:
        raise InvalidParameterError("report carries no quadrature grid (loaded from disk?)")

    dense, table = quad["dense"], quad["table"]
    n = len(report.center)
    if n == 1:
        truncated = table[:, :d] @ dense[:d]
    else:
        k1, k2 = np.indices(dense.shape[:2])
        kept = np.where((k1 + k2 < d)[..., None], dense, 0.0)
        truncated = np.einsum("ik,jl,klo->ijo", table, table, kept)

    residual = quad["values"] - truncated
    error = float(np.sum(quad["weights"][..., None] * residual ** 2)) - report.residual_energy
    return report.tail_sums[d], error


def spectrum_rows(report: SpectrumReport) -> List[Tuple[int, float]]:
    """(degree, tail sum) rows for plotting."""
    return [(d, tail) for d, tail in enumerate(report.tail_sums)]


# ============================================================================
# Total variation and change of measure
# ============================================================================

def tv_upper_bound(sigma_sq: float, sigma0_sq: float, n: int) -> float:
    """sigma^2 sqrt(n) / (sqrt(2) sigma0^2), the TV cost of stopping at sigma^2."""
    if sigma0_sq <= 0:
        raise InvalidParameterError(f"sigma0_sq must be positive, got {sigma0_sq}")
    if sigma_sq < 0:
        raise InvalidParameterError(f"sigma_sq must be nonnegative, got {sigma_sq}")
    return sigma_sq * math.sqrt(n) / (math.sqrt(2.0) * sigma0_sq)


def gaussian_tv_1d(var_a: float, var_b: float, limit: int = 200) -> TVReport:
    """
    TV between N(0, var_a) and N(0, var_b).

    Integrated by adaptive quadrature split at the density crossings +-x*,
    and in closed form 2 (Phi(x*/s_a) - Phi(x*/s_b)) with s_a < s_b.
    """
    if var_a <= 0 or var_b <= 0:
        raise InvalidParameterError(f"variances must be positive, got {var_a}, {var_b}")
    if var_a == var_b:
        return TVReport(var_a=var_a, var_b=var_b, tv=0.0, quadrature_error=0.0, closed_form=0.0)

    s_a, s_b = math.sqrt(min(var_a, var_b)), math.sqrt(max(var_a, var_b))
    crossing = math.sqrt(
        2.0 * math.log(s_b / s_a) * s_a ** 2 * s_b ** 2 / (s_b ** 2 - s_a ** 2)
    )

    def gap(x: float) -> float:
        return abs(stats.norm.pdf(x, scale=s_a) - stats.norm.pdf(x, scale=s_b))

    inner, inner_err = integrate.quad(gap, 0.0, crossing, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=limit)
    outer, outer_err = integrate.quad(gap, crossing, np.inf, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=limit)

    # even integrand: half of the full-line integral equals the half-line one
    tv = inner + outer
    closed = 2.0 * (stats.norm.cdf(crossing / s_a) - stats.norm.cdf(crossing / s_b))
    return TVReport(
        var_a=var_a,
        var_b=var_b,
        tv=tv,
        quadrature_error=inner_err + outer_err,
        closed_form=closed,
    )


def change_of_measure_check(R: float, a: float, mu: Optional[float] = None, limit: int = 200) -> ChangeOfMeasureReport:
    """
    Check E_gamma[(dP/dgamma)^{1+a}] <= e^{a(a+1)R^2/2} for P = N(mu, 1), |mu| <= R.

    The left side is e^{a(a+1)mu^2/2} in closed form; it is also integrated
    numerically with `limit` quad subdivisions. Equality holds at |mu| = R.
    """
    mu = R if mu is None else mu
    if R < 0 or a < 0:
        raise InvalidParameterError(f"need R >= 0 and a >= 0, got R={R}, a={a}")
    if abs(mu) > R:
        raise InvalidParameterError(f"|mu|={abs(mu)} exceeds R={R}")

    closed = math.exp(a * (a + 1.0) * mu ** 2 / 2.0)
    bound = math.exp(a * (a + 1.0) * R ** 2 / 2.0)

    def integrand(x: float) -> float:
        return math.exp((1.0 + a) * (mu * x - mu ** 2 / 2.0) - x ** 2 / 2.0) / math.sqrt(2.0 * math.pi)

    numeric, err = integrate.quad(integrand, -np.inf, np.inf, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=limit)
    return ChangeOfMeasureReport(
        mu=mu,
        R=R,
        a=a,
        lhs_closed_form=closed,
        lhs_quadrature=numeric,
        quadrature_error=err,
        bound=bound,
        holds=closed <= bound * (1.0 + 1e-12),
        tight=math.isclose(closed, bound, rel_tol=1e-12),
    )


# ============================================================================
# Sample quality
# ============================================================================

def sample_quality_metrics(
    generated,
    reference,
    cluster_means,
    n_directions: int = 64,
    direction_seed: int = 0,
) -> SampleQualityReport:
    """
    Compare generated samples with reference samples.

    Cluster membership is the nearest cluster mean. Sliced W1 averages 1D
    Wasserstein-1 distances over `n_directions` unit directions drawn from
    `direction_seed`.
    """
    generated = np.atleast_2d(np.asarray(generated, dtype=float))
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    means = np.atleast_2d(np.asarray(cluster_means, dtype=float))
    if generated.shape[0] == 0 or reference.shape[0] == 0:
        raise InvalidParameterError("both sample sets must be nonempty")
    if generated.shape[1] != reference.shape[1] or means.shape[1] != generated.shape[1]:
        raise InvalidParameterError("generated, reference and cluster means must share a dimension")

    k = means.shape[0]
    gen_labels = np.atleast_1d(assign_voronoi(means, generated))
    ref_labels = np.atleast_1d(assign_voronoi(means, reference))
    gen_weights = np.bincount(gen_labels, minlength=k) / generated.shape[0]
    ref_weights = np.bincount(ref_labels, minlength=k) / reference.shape[0]

    clusters = []
    for j in range(k):
        gen_j, ref_j = generated[gen_labels == j], reference[ref_labels == j]
        mean_error = None
        if gen_j.shape[0] and ref_j.shape[0]:
            mean_error = float(np.linalg.norm(gen_j.mean(axis=0) - ref_j.mean(axis=0)))
        clusters.append(
            ClusterMetrics(
                cluster=j,
                generated_weight=float(gen_weights[j]),
                reference_weight=float(ref_weights[j]),
                weight_error=float(abs(gen_weights[j] - ref_weights[j])),
                mean_error=mean_error,
            )
        )

    rng = np.random.default_rng(direction_seed)
    directions = rng.standard_normal((n_directions, generated.shape[1]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    sliced = float(np.mean([
        stats.wasserstein_distance(generated @ theta, reference @ theta) for theta in directions
    ]))

    return SampleQualityReport(
        generated_count=generated.shape[0],
        reference_count=reference.shape[0],
        n_directions=n_directions,
        direction_seed=direction_seed,
        sliced_w1=sliced,
        clusters=clusters,
    )


def warm_start_coverage(warm_starts: WarmStartSet, spec: MixtureSpec) -> CoverageReport:
    """Distance from each true mean to its nearest warm-start center."""
    distances = cdist(spec.means, warm_starts.center_array).min(axis=1)
    return CoverageReport(
        radius=warm_starts.radius,
        distances=distances.tolist(),
        covered=[bool(d <= warm_starts.radius) for d in distances],
    )


# ============================================================================
# VP / VE clocks
# ============================================================================

def vp_ve_equivalence_check(seed, n_times: int = 10, tolerance: float = 1e-10) -> VPVEReport:
    """
    Compare the variance-exploding and variance-preserving processes.

    For a 1D Gaussian start N(m, v), y_s ~ N(m, v + s) and the OU marginal
    x_t ~ N(e^{-t} m, e^{-2t} v + 1 - e^{-2t}) must equal the law of
    e^{-t} y_{e^{2t} - 1}. The discrete check runs one VE reverse step with
    exact scores and one VP exponential-integrator step on the mapped clock
    from the same state and noise; e^{t^x} times the VP result must equal
    the VE result.
    """
    rng = np.random.default_rng(seed)
    m0 = float(rng.standard_normal())
    v0 = float(rng.uniform(0.5, 2.0))
    times = np.concatenate([[0.0, math.log(2.0)], rng.uniform(0.0, 3.0, n_times)])

    ve_times = np.expm1(2.0 * times)
    mapped_mean = np.exp(-times) * m0
    mapped_var = np.exp(-2.0 * times) * (v0 + ve_times)
    vp_mean = np.exp(-times) * m0
    vp_var = np.exp(-2.0 * times) * v0 + 1.0 - np.exp(-2.0 * times)
    mean_error = float(np.max(np.abs(mapped_mean - vp_mean)))
    var_error = float(np.max(np.abs(mapped_var - vp_var)))

    def ve_score(y: np.ndarray, s: float) -> np.ndarray:
        return -(y - m0) / (v0 + s)

    def vp_score(x: np.ndarray, tau: float) -> np.ndarray:
        return math.exp(tau) * ve_score(math.exp(tau) * x, math.expm1(2.0 * tau))

    step_error = 0.0
    for _ in range(n_times):
        s_prev, s_next = np.sort(rng.uniform(0.0, 10.0, 2))
        if s_next - s_prev < 1e-6:
            continue
        y = np.array([m0 + math.sqrt(v0 + s_next) * rng.standard_normal()])
        xi = rng.standard_normal(1)
        ve_next = reverse_step(y, ve_score(y, s_next), s_prev, s_next, xi)

        tau_prev, tau_next = 0.5 * math.log1p(s_prev), 0.5 * math.log1p(s_next)
        zeta = tau_next - tau_prev
        x = math.exp(-tau_next) * y
        vp_next = (
            math.exp(zeta) * x
            + 2.0 * math.expm1(zeta) * vp_score(x, tau_next)
            + math.sqrt(math.expm1(2.0 * zeta)) * xi
        )
        mapped = math.exp(tau_prev) * vp_next
        step_error = max(step_error, float(np.max(np.abs(mapped - ve_next) / np.maximum(1.0, np.abs(ve_next)))))

    passed = max(mean_error, var_error, step_error) <= tolerance
    log = logger.info if passed else logger.warning
    log(
        f"[{'OK' if passed else 'WARN'}] VP/VE check: mean {mean_error:.2e}, "
        f"variance {var_error:.2e}, step {step_error:.2e}"
    )
    return VPVEReport(
        times=times.tolist(),
        max_mean_error=mean_error,
        max_variance_error=var_error,
        max_step_error=step_error,
        tolerance=tolerance,
        passed=passed,
    )


def summarize_quality(report: SampleQualityReport) -> Dict[str, float]:
    """Headline numbers for logs and metrics.json."""
    return {
        "sliced_w1": report.sliced_w1,
        "max_weight_error": report.max_weight_error,
        "max_mean_error": max((c.mean_error or 0.0) for c in report.clusters),
    }


# Export diagnostics services
__all__ = [
    "score_l2_error",
    "score_error_profile",
    "hermite_coefficient_spectrum",
    "truncation_check",
    "spectrum_rows",
    "tv_upper_bound",
    "gaussian_tv_1d",
    "change_of_measure_check",
    "sample_quality_metrics",
    "warm_start_coverage",
    "vp_ve_equivalence_check",
    "summarize_quality",
]
