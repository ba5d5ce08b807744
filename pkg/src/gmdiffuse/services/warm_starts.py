"""
Warm-Start Service
Version: 1.0.0

Maintains the warm-start centers that partition space into Voronoi cells for
the piecewise score regression.

Refresh Flow:
    1. Denoise samples from P_t with the current score: mu_i = y_i + sigma^2 s(y_i)
    2. Greedy set cover of the candidates with balls of radius
       R~ = C (R0 + sigma sqrt(ln(1/alpha_min)))
    3. Stop after ceil(C' k ln(1/alpha_min)) rounds or when everything is covered

Ties are broken by lowest index everywhere so runs are reproducible.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from gmdiffuse.core import config
from gmdiffuse.core.errors import (
    InsufficientSamplesError,
    InvalidParameterError,
    ScoreEvaluationError,
)
from gmdiffuse.schemas.mixture import KLocalityParams
from gmdiffuse.schemas.warm_start import WarmStartSet


logger = logging.getLogger(__name__)

ScoreFunction = Callable[[np.ndarray], np.ndarray]
Centers = Union[WarmStartSet, Sequence[Sequence[float]], np.ndarray]


def _center_array(centers: Centers) -> np.ndarray:
    if isinstance(centers, WarmStartSet):
        return centers.center_array
    array = np.asarray(centers, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.shape[0] == 0:
        raise InvalidParameterError("centers must be nonempty")
    return array


def assign_voronoi(centers: Centers, y):
    """
    Index of the nearest center (lowest index on ties).

    Args:
        centers: WarmStartSet or (k', n) points
        y: One point (n,) or a batch (m, n)

    Returns:
        int for one point, (m,) int array for a batch
    """
    center_array = _center_array(centers)
    ys = np.asarray(y, dtype=float)
    single = ys.ndim == 1
    ys = np.atleast_2d(ys)
    if ys.shape[1] != center_array.shape[1]:
        raise InvalidParameterError(
            f"points have dimension {ys.shape[1]}, centers {center_array.shape[1]}"
        )

    # Direct squared differences keep exact ties exact
    diffs = ys[:, None, :] - center_array[None, :, :]
    sq_dist = np.einsum("mkn,mkn->mk", diffs, diffs)
    cells = np.argmin(sq_dist, axis=1)
    return int(cells[0]) if single else cells


def _locate_failure(score: ScoreFunction, ys: np.ndarray) -> int:
    """Evaluate row by row to find the first point the score cannot handle."""
    for i in range(ys.shape[0]):
        try:
            value = np.asarray(score(ys[i:i + 1]), dtype=float)
        except Exception:
            return i
        if not np.all(np.isfinite(value)):
            return i
    return -1


def denoise_points(score: ScoreFunction, ys, sigma_sq: float) -> np.ndarray:
    """
    Tweedie candidates mu_i = y_i + sigma^2 s(y_i), order preserved.

    Raises:
        ScoreEvaluationError: If the score fails or returns non-finite values;
            the error carries the index of the first offending point
    """
    if sigma_sq <= 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[0] == 0:
        return ys.copy()

    try:
        values = np.asarray(score(ys), dtype=float)
    except Exception as e:
        index = _locate_failure(score, ys)
        raise ScoreEvaluationError(
            f"score evaluation failed at point {index}: {e}", index=index
        ) from e

    if values.shape != ys.shape:
        raise ScoreEvaluationError(
            f"score returned shape {values.shape} for inputs of shape {ys.shape}"
        )
    bad = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
    if bad.size:
        raise ScoreEvaluationError(
            f"score returned non-finite values at point {int(bad[0])}", index=int(bad[0])
        )

    return ys + sigma_sq * values


def greedy_set_cover(
    membership: np.ndarray,
    max_rounds: int,
    restrict_to_uncovered: bool = False,
) -> Tuple[List[int], np.ndarray]:
    """
    Greedy set cover over a boolean membership matrix.

    Each round picks the set covering the most still-uncovered elements
    (lowest index on ties) and marks its elements covered.

    Args:
        membership: (s, p) boolean matrix, membership[i, e] = element e in set i
        max_rounds: Round budget
        restrict_to_uncovered: Sets and elements share indices (s == p) and set i
            is eligible only while element i is uncovered

    Returns:
        tuple: (chosen set indices, boolean uncovered mask over elements)
    """
    membership = np.asarray(membership, dtype=bool)
    n_sets, n_elements = membership.shape
    if restrict_to_uncovered and n_sets != n_elements:
        raise InvalidParameterError("restrict_to_uncovered needs a square membership matrix")

    uncovered = np.ones(n_elements, dtype=bool)
    gains = membership.sum(axis=1).astype(np.int64)
    chosen: List[int] = []

    for _ in range(max(0, max_rounds)):
        if not uncovered.any():
            break
        eligible = gains if not restrict_to_uncovered else np.where(uncovered, gains, -1)
        best = int(np.argmax(eligible))
        if eligible[best] <= 0:
            break
        chosen.append(best)

        newly = membership[best] & uncovered
        uncovered &= ~newly
        gains -= membership[:, newly].sum(axis=1)

    return chosen, uncovered


def greedy_cover_indices(candidates, radius: float, max_rounds: int) -> Tuple[List[int], int]:
    """
    Greedy cover of candidate points by balls centered at uncovered candidates.

    Returns:
        tuple: (selected candidate indices, number of candidates left uncovered)
    """
    if radius <= 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    points = np.asarray(candidates, dtype=float)
    if points.size == 0:
        return [], 0
    points = points.reshape(points.shape[0], -1)

    membership = cdist(points, points) <= radius
    chosen, uncovered = greedy_set_cover(membership, max_rounds, restrict_to_uncovered=True)
    return chosen, int(uncovered.sum())


def greedy_cover(candidates, radius: float, max_rounds: int) -> np.ndarray:
    """
    Selected centers of the greedy cover, in selection order.

    Returns:
        np.ndarray: (selected, n) array; empty input gives an empty array
    """
    points = np.asarray(candidates, dtype=float)
    chosen, _ = greedy_cover_indices(points, radius, max_rounds)
    if not chosen:
        width = points.shape[1] if points.ndim == 2 else 0
        return np.empty((0, width))
    return points.reshape(points.shape[0], -1)[chosen]


def refresh_radius(params: KLocalityParams, sigma_sq: float, radius_constant: Optional[float] = None) -> float:
    """R~ = C (R0 + sigma sqrt(ln(1/alpha_min)))."""
    c = config.WARM_START_RADIUS_C if radius_constant is None else radius_constant
    return c * (params.R0 + math.sqrt(sigma_sq) * math.sqrt(math.log(1.0 / params.alpha_min)))


def round_budget(params: KLocalityParams, rounds_constant: Optional[float] = None) -> int:
    """ceil(C' k ln(1/alpha_min)), at least one round."""
    c = config.WARM_START_ROUNDS_C if rounds_constant is None else rounds_constant
    return max(1, math.ceil(c * params.k * math.log(1.0 / params.alpha_min)))


def required_refresh_samples(
    params: KLocalityParams,
    delta: float,
    sample_constant: Optional[float] = None,
) -> int:
    """ceil(c ln(1/delta) k / alpha_min)."""
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    c = config.WARM_START_SAMPLES_C if sample_constant is None else sample_constant
    return max(1, math.ceil(c * math.log(1.0 / delta) * params.k / params.alpha_min))


def refresh_warm_starts_with_residual(
    score: ScoreFunction,
    samples,
    params: KLocalityParams,
    sigma_sq: float,
    delta: float,
    radius_constant: Optional[float] = None,
    rounds_constant: Optional[float] = None,
    sample_constant: Optional[float] = None,
) -> Tuple[WarmStartSet, int]:
    """
    refresh_warm_starts plus the number of candidates left uncovered.

    Raises:
        InsufficientSamplesError: If fewer samples than c ln(1/delta) k / alpha_min
    """
    ys = np.atleast_2d(np.asarray(samples, dtype=float))
    required = required_refresh_samples(params, delta, sample_constant)
    if ys.shape[0] < required:
        raise InsufficientSamplesError(
            f"warm-start refresh needs {required} samples, got {ys.shape[0]}",
            required=required,
            available=int(ys.shape[0]),
        )

    radius = refresh_radius(params, sigma_sq, radius_constant)
    rounds = round_budget(params, rounds_constant)

    candidates = denoise_points(score, ys, sigma_sq)
    chosen, uncovered = greedy_cover_indices(candidates, radius, rounds)

    if uncovered:
        logger.info(
            f"[INFO] Greedy cover left {uncovered}/{len(candidates)} candidates uncovered "
            f"after {rounds} rounds (radius {radius:.4g})"
        )

    warm = WarmStartSet(
        centers=candidates[chosen].tolist(),
        radius=radius,
        noise_level=sigma_sq,
    )
    logger.debug(
        f"[OK] Refreshed warm starts: {warm.size} centers, radius {radius:.4g}, sigma^2 {sigma_sq:.4g}"
    )
    return warm, uncovered


def refresh_warm_starts(
    score: ScoreFunction,
    samples,
    params: KLocalityParams,
    sigma_sq: float,
    delta: float,
    radius_constant: Optional[float] = None,
    rounds_constant: Optional[float] = None,
    sample_constant: Optional[float] = None,
) -> WarmStartSet:
    """
    New warm-start set from fresh samples of P_t and a score estimate at t.

    Args:
        score: Score estimate at the samples' noise level
        samples: (m, n) points from P_t
        params: k-locality parameters
        sigma_sq: t + sigma0^2
        delta: Failure probability for the sample-count requirement
        radius_constant: C (defaults to GMDIFFUSE_WARM_START_RADIUS_C)
        rounds_constant: C' (defaults to GMDIFFUSE_WARM_START_ROUNDS_C)
        sample_constant: c (defaults to GMDIFFUSE_WARM_START_SAMPLES_C)

    Returns:
        WarmStartSet: Centers with radius R~ and noise_level sigma_sq
    """
    warm, _ = refresh_warm_starts_with_residual(
        score, samples, params, sigma_sq, delta,
        radius_constant, rounds_constant, sample_constant,
    )
    return warm


# Export warm-start services
__all__ = [
    "ScoreFunction",
    "assign_voronoi",
    "denoise_points",
    "greedy_set_cover",
    "greedy_cover_indices",
    "greedy_cover",
    "refresh_radius",
    "round_budget",
    "required_refresh_samples",
    "refresh_warm_starts_with_residual",
    "refresh_warm_starts",
]
