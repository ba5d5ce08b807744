"""
Mixture Model Service
Version: 1.0.0

Data distribution P_0 = Q_0 * N(0, sigma0^2 I_n) and its exact oracles.

With sigma^2 = t + sigma0^2, the noised law is P_t = Q_0 * N(0, sigma^2 I_n), so
for a discrete Q_0 every quantity the learner needs has a closed form:

    posterior weights   w_j(y) ~ w_j exp(<y, mu_j>/sigma^2 - ||mu_j||^2 / (2 sigma^2))
    posterior mean      f_{sigma^2}(y) = E[mu | Y=y] = sum_j w_j(y) mu_j
    score               grad ln p_t(y) = (f_{sigma^2}(y) - y) / sigma^2

All softmax and density computations go through scipy.special's log-sum-exp
routines; <y, mu>/sigma^2 overflows at small sigma^2 otherwise.

Every function accepts one point of shape (n,) or a batch of shape (m, n) and
returns the matching shape.
"""

import logging
import math
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from gmdiffuse.core.errors import InvalidParameterError, OracleUnavailableError
from gmdiffuse.schemas.mixture import (
    LocalityClause,
    LocalityViolation,
    MixtureComponent,
    MixtureSpec,
)
from gmdiffuse.services.warm_starts import greedy_cover_indices


logger = logging.getLogger(__name__)

# Slack for the geometric k-locality comparisons
LOCALITY_TOLERANCE = 1e-12


def _as_batch(y, n: int) -> Tuple[np.ndarray, bool]:
    """Return y as an (m, n) array plus a flag telling whether it was a single point."""
    ys = np.asarray(y, dtype=float)
    single = ys.ndim == 1
    ys = np.atleast_2d(ys)
    if ys.shape[1] != n:
        raise InvalidParameterError(f"expected points of dimension {n}, got {ys.shape[1]}")
    return ys, single


def _require_discrete(spec: MixtureSpec, what: str) -> None:
    if not spec.is_discrete:
        raise OracleUnavailableError(
            f"{what} needs a discrete mixing measure; use discretize_mixture() for a surrogate"
        )


def _logits(spec: MixtureSpec, ys: np.ndarray, sigma_sq: float) -> np.ndarray:
    """(m, k) unnormalized log posterior weights of the components."""
    means = spec.means
    half_sq_norms = 0.5 * np.einsum("ij,ij->i", means, means)
    return (ys @ means.T - half_sq_norms) / sigma_sq + np.log(spec.weights)


def posterior_weights(spec: MixtureSpec, y, sigma_sq: float) -> np.ndarray:
    """
    Posterior probabilities of the components given Y = y at noise level sigma_sq.

    Returns:
        np.ndarray: (k,) for one point or (m, k) for a batch; rows sum to 1
    """
    if sigma_sq <= 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    _require_discrete(spec, "posterior_weights")

    ys, single = _as_batch(y, spec.n)
    weights = softmax(_logits(spec, ys, sigma_sq), axis=1)
    return weights[0] if single else weights


def posterior_mean(spec: MixtureSpec, y, sigma_sq: float) -> np.ndarray:
    """f_{sigma^2}(y) = E[mu | Y=y]; always inside the convex hull of the means."""
    weights = posterior_weights(spec, y, sigma_sq)
    return weights @ spec.means


def exact_score(spec: MixtureSpec, y, t: float) -> np.ndarray:
    """grad ln p_t(y) with sigma^2 = t + sigma0^2."""
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t}")
    sigma_sq = t + spec.sigma0_sq
    ys = np.asarray(y, dtype=float)
    return (posterior_mean(spec, ys, sigma_sq) - ys) / sigma_sq


def log_density(spec: MixtureSpec, y, t: float):
    """
    ln p_t(y): log-sum-exp over components of N(mu_j, (t + sigma0^2) I) log densities.

    Returns:
        float for one point, (m,) array for a batch
    """
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t}")
    _require_discrete(spec, "log_density")

    sigma_sq = t + spec.sigma0_sq
    ys, single = _as_batch(y, spec.n)
    diffs = ys[:, None, :] - spec.means[None, :, :]
    sq_dist = np.einsum("mkn,mkn->mk", diffs, diffs)
    log_terms = np.log(spec.weights) - sq_dist / (2.0 * sigma_sq)
    values = logsumexp(log_terms, axis=1) - 0.5 * spec.n * math.log(2.0 * math.pi * sigma_sq)
    return float(values[0]) if single else values


def posterior_clean_mean(spec: MixtureSpec, y, t: float) -> np.ndarray:
    """
    E[X | Y=y] for Y = X + sqrt(t) xi, X ~ P_0.

    Conditions each Gaussian component separately,
    E[X | Y=y, j] = mu_j + sigma0^2 / (sigma0^2 + t) (y - mu_j),
    and averages with the posterior component weights. (E[X|Y=y] - y) / t is
    the score written against P_0 instead of Q_0.
    """
    if t <= 0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    sigma_sq = t + spec.sigma0_sq
    ys, single = _as_batch(y, spec.n)
    weights = np.atleast_2d(posterior_weights(spec, ys, sigma_sq))

    shrink = spec.sigma0_sq / sigma_sq
    # (m, k, n) per-component conditional means
    component_means = spec.means[None, :, :] + shrink * (ys[:, None, :] - spec.means[None, :, :])
    clean = np.einsum("mk,mkn->mn", weights, component_means)
    return clean[0] if single else clean


def second_moment(spec: MixtureSpec) -> float:
    """E||x||^2 under P_0 (a uniform ball of radius r adds r^2 n / (n + 2))."""
    sq_norms = np.einsum("ij,ij->i", spec.means, spec.means)
    ball_terms = spec.radii ** 2 * spec.n / (spec.n + 2.0)
    return float(spec.weights @ (sq_norms + ball_terms) + spec.n * spec.sigma0_sq)


def _uniform_ball(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """count points uniform in the unit ball of R^n."""
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.random(count) ** (1.0 / n)
    return directions * radii[:, None]


def sample_mixture(spec: MixtureSpec, count: int, seed) -> np.ndarray:
    """
    Draw count points X = mu + sigma0 xi from P_0.

    Ball components draw their mean uniformly from the ball first.

    Args:
        spec: Mixture specification
        count: Number of points (>= 0)
        seed: Anything numpy.random.default_rng accepts (int, SeedSequence, Generator)

    Returns:
        np.ndarray: (count, n) samples, deterministic given the seed
    """
    if count < 0:
        raise InvalidParameterError(f"count must be nonnegative, got {count}")

    rng = np.random.default_rng(seed)
    n = spec.n
    if count == 0:
        return np.empty((0, n))

    labels = rng.choice(spec.k_components, size=count, p=spec.weights)
    centers = spec.means[labels]

    if not spec.is_discrete:
        offsets = _uniform_ball(rng, count, n) * spec.radii[labels][:, None]
        centers = centers + offsets

    return centers + math.sqrt(spec.sigma0_sq) * rng.standard_normal((count, n))


def discretize_mixture(spec: MixtureSpec, atoms_per_component: int, seed) -> MixtureSpec:
    """
    Discrete surrogate of a generalized mixture.

    Each ball component becomes atoms_per_component equal-weight atoms drawn
    uniformly from its ball; point masses are kept as they are.
    """
    if atoms_per_component < 1:
        raise InvalidParameterError(f"atoms_per_component must be >= 1, got {atoms_per_component}")
    if spec.is_discrete:
        return spec

    rng = np.random.default_rng(seed)
    components: List[MixtureComponent] = []
    for component in spec.components:
        if component.is_atom:
            components.append(component)
            continue
        mean = np.asarray(component.mean)
        atoms = mean + component.radius * _uniform_ball(rng, atoms_per_component, spec.n)
        share = component.weight / atoms_per_component
        components.extend(
            MixtureComponent(mean=atom.tolist(), weight=share) for atom in atoms
        )

    # Rescale so the weights sum to 1 exactly after the split
    total = math.fsum(c.weight for c in components)
    components = [
        MixtureComponent(mean=c.mean, weight=c.weight / total) for c in components
    ]

    logger.info(
        f"[INFO] Discretized {spec.k_components} components into {len(components)} atoms"
    )
    return MixtureSpec(
        n=spec.n,
        sigma0_sq=spec.sigma0_sq,
        components=components,
        locality=spec.locality,
    )


def validate_k_locality(spec: MixtureSpec) -> List[LocalityViolation]:
    """
    Check the k-locality clauses.

    (a) every mean has at least alpha_min total weight within R0 of it
    (b) the means are covered by k balls of radius R0 (greedy, centers at means)
    (c) every mean lies in B_D(0)

    Ball components count toward (a) only when the whole ball is within R0,
    must have radius <= R0 for (b), and must fit inside B_D(0) for (c).

    Returns:
        list: Violated clauses; empty when all hold
    """
    params = spec.locality
    means = spec.means
    weights = spec.weights
    radii = spec.radii
    violations: List[LocalityViolation] = []

    if params.alpha_min * params.k > 1.0 + LOCALITY_TOLERANCE:
        logger.warning(
            f"[WARN] alpha_min={params.alpha_min} exceeds 1/k={1.0 / params.k:.6g}; "
            f"disjoint balls cannot all hold alpha_min mass"
        )

    # (a) nearby mass
    distances = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
    inside = distances + radii[None, :] <= params.R0 + LOCALITY_TOLERANCE
    nearby_mass = inside.astype(float) @ weights
    for j in np.flatnonzero(nearby_mass < params.alpha_min - LOCALITY_TOLERANCE):
        violations.append(
            LocalityViolation(
                clause=LocalityClause.MASS,
                detail=f"mass {nearby_mass[j]:.6g} within R0={params.R0} of component {j} "
                       f"is below alpha_min={params.alpha_min}",
                component=int(j),
            )
        )

    # (b) cover by k balls
    for j in np.flatnonzero(radii > params.R0 + LOCALITY_TOLERANCE):
        violations.append(
            LocalityViolation(
                clause=LocalityClause.COVER,
                detail=f"component {j} radius {radii[j]} exceeds R0={params.R0}",
                component=int(j),
            )
        )
    _, uncovered = greedy_cover_indices(means, params.R0, params.k)
    if uncovered > 0:
        violations.append(
            LocalityViolation(
                clause=LocalityClause.COVER,
                detail=f"{uncovered} means left uncovered by {params.k} greedy balls of radius {params.R0}",
            )
        )

    # (c) support radius
    outer = np.linalg.norm(means, axis=1) + radii
    for j in np.flatnonzero(outer > params.D + LOCALITY_TOLERANCE):
        violations.append(
            LocalityViolation(
                clause=LocalityClause.SUPPORT,
                detail=f"component {j} reaches norm {outer[j]:.6g} outside D={params.D}",
                component=int(j),
            )
        )

    if violations:
        logger.info(f"[INFO] k-locality check found {len(violations)} violations")
    return violations


class OracleScore:
    """
    Exact score of a discrete mixture at a fixed time, usable wherever a
    learned score estimate is expected.
    """

    def __init__(self, spec: MixtureSpec, t: float):
        _require_discrete(spec, "OracleScore")
        if t < 0:
            raise InvalidParameterError(f"t must be nonnegative, got {t}")
        self.spec = spec
        self.t = float(t)

    @property
    def sigma_sq(self) -> float:
        return self.t + self.spec.sigma0_sq

    def __call__(self, ys) -> np.ndarray:
        return exact_score(self.spec, ys, self.t)

    def __repr__(self) -> str:
        return f"<OracleScore(t={self.t}, components={self.spec.k_components})>"


def oracle_models(spec: MixtureSpec, times: Iterable[float]) -> Dict[float, OracleScore]:
    """Map every time to the exact score at that time."""
    return {float(t): OracleScore(spec, t) for t in times}


# Export mixture services
__all__ = [
    "posterior_weights",
    "posterior_mean",
    "exact_score",
    "log_density",
    "posterior_clean_mean",
    "second_moment",
    "sample_mixture",
    "discretize_mixture",
    "validate_k_locality",
    "OracleScore",
    "oracle_models",
]
