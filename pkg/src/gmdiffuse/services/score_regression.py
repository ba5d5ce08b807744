"""
Score Regression Service
Version: 1.0.0

Fits the piecewise Hermite score model at one noise level.

Task Flow:
    1. Noise a fresh batch: y_i = x_i + sqrt(t) xi_i, label each y_i with its
       Voronoi cell
    2. Regression targets (1 - sigma^2/t) y_i + (sigma^2/t) x_i, whose
       conditional mean given y is the posterior mean f_{sigma^2}(y)
    3. Per nonempty cell: norm-constrained least squares on the orthonormal
       Hermite features centered at the cell's warm start
    4. Empty cells: constant block predicting the cell center

Constrained least squares (fit_cell):
    min ||Phi W - Z||_F^2  subject to  ||W||_F <= D

is solved through an eigendecomposition of the Gram matrix. The ridge
solution at lambda_floor = 1e-10 mean(diag(Phi^T Phi)) is returned when it
is feasible; otherwise lambda is bisected (in log space) until
||W(lambda)||_F = D, the boundary solution of the trust-region subproblem.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from gmdiffuse.core.errors import CellFitError, InvalidParameterError
from gmdiffuse.models.basis import FeatureBasis
from gmdiffuse.models.dataset import DenoisingDataset
from gmdiffuse.models.score_model import PiecewiseScoreModel
from gmdiffuse.schemas.warm_start import WarmStartSet
from gmdiffuse.services.hermite_features import feature_vector
from gmdiffuse.services.warm_starts import assign_voronoi
from gmdiffuse.worker.pool import run_concurrently


logger = logging.getLogger(__name__)

RIDGE_FLOOR = 1e-10
BISECTION_MAX_ITER = 200
BISECTION_RTOL = 1e-13


def build_denoising_dataset(
    samples,
    t: float,
    sigma0_sq: float,
    centers: WarmStartSet,
    seed,
) -> DenoisingDataset:
    """
    Noise clean samples to time t and assign Voronoi cells.

    Args:
        samples: (m, n) points from P_0
        t: Noise time (>= 0); t = 0 keeps ys equal to xs
        sigma0_sq: Base noise variance of the data
        centers: Current warm-start set
        seed: Seed for the Gaussian noise

    Returns:
        DenoisingDataset: deterministic given the seed
    """
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t}")
    if sigma0_sq <= 0:
        raise InvalidParameterError(f"sigma0_sq must be positive, got {sigma0_sq}")

    xs = np.atleast_2d(np.asarray(samples, dtype=float))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(xs.shape)
    ys = xs.copy() if t == 0 else xs + math.sqrt(t) * noise

    cell_of = assign_voronoi(centers, ys) if xs.shape[0] else np.empty(0, dtype=np.intp)
    return DenoisingDataset(xs, ys, t, t + sigma0_sq, centers, cell_of)


def regression_targets(ds: DenoisingDataset) -> np.ndarray:
    """
    (1 - sigma^2/t) y + (sigma^2/t) x for every pair.

    Raises:
        InvalidParameterError: If t = 0 (targets undefined)
    """
    if ds.t <= 0:
        raise InvalidParameterError("regression targets need t > 0")
    ratio = ds.sigma_sq / ds.t
    return (1.0 - ratio) * ds.ys + ratio * ds.xs


def fit_cell(features, targets, norm_bound: float) -> np.ndarray:
    """
    Norm-constrained least squares for one cell.

    Args:
        features: (m, C) feature matrix Phi
        targets: (m, n) target matrix Z
        norm_bound: Frobenius bound D

    Returns:
        np.ndarray: (n, C) coefficient matrix B with g(y) = B phi(y)

    Raises:
        CellFitError: If the feature matrix is empty or row counts differ
    """
    Phi = np.atleast_2d(np.asarray(features, dtype=float))
    Z = np.asarray(targets, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if Phi.shape[0] == 0 or Phi.shape[1] == 0:
        raise CellFitError("empty feature matrix")
    if Phi.shape[0] != Z.shape[0]:
        raise CellFitError(f"{Phi.shape[0]} feature rows for {Z.shape[0]} targets")
    if norm_bound <= 0:
        raise InvalidParameterError(f"norm_bound must be positive, got {norm_bound}")

    gram = Phi.T @ Phi
    cross = Phi.T @ Z
    eigenvalues, eigenvectors = linalg.eigh(gram)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    projected = eigenvectors.T @ cross  # (C, n)

    scale = float(np.mean(np.diag(gram)))
    if scale <= 0 or not np.any(projected):
        return np.zeros((Z.shape[1], Phi.shape[1]))
    lam_floor = RIDGE_FLOOR * scale

    def solution(lam: float) -> np.ndarray:
        return eigenvectors @ (projected / (eigenvalues + lam)[:, None])

    def solution_norm(lam: float) -> float:
        return float(np.sqrt(np.sum((projected / (eigenvalues + lam)[:, None]) ** 2)))

    if solution_norm(lam_floor) <= norm_bound:
        return solution(lam_floor).T

    # ||W(lam)|| <= ||cross||_F / lam, so hi is feasible
    lo = lam_floor
    hi = max(lam_floor, float(np.linalg.norm(cross)) / norm_bound)
    for _ in range(BISECTION_MAX_ITER):
        if hi / lo - 1.0 <= BISECTION_RTOL:
            break
        mid = math.sqrt(lo * hi)
        if solution_norm(mid) > norm_bound:
            lo = mid
        else:
            hi = mid

    W = solution(hi)
    norm = float(np.linalg.norm(W))
    if norm > norm_bound:
        W *= norm_bound / norm
    logger.debug(f"[INFO] Norm constraint active: lambda={hi:.4e}, ||B||_F={min(norm, norm_bound):.6g}")
    return W.T


def empirical_loss(features: np.ndarray, targets: np.ndarray, block: np.ndarray) -> float:
    """Mean squared residual ||B phi - z||^2 over the rows."""
    residual = features @ block.T - targets
    return float(np.mean(np.einsum("ij,ij->i", residual, residual)))


def constant_block(center: np.ndarray, basis: FeatureBasis, norm_bound: float) -> np.ndarray:
    """Block predicting the constant center (coefficient of the k = 0 feature only)."""
    block = np.zeros((basis.n, basis.size))
    norm = float(np.linalg.norm(center))
    if norm > norm_bound:
        logger.info(f"[INFO] Empty-cell center norm {norm:.6g} scaled onto the bound {norm_bound:.6g}")
        center = center * (norm_bound / norm)
    block[:, 0] = center
    return block


def fit_piecewise(
    ds: DenoisingDataset,
    basis: FeatureBasis,
    norm_bound: float,
    threads: Optional[int] = None,
) -> PiecewiseScoreModel:
    """
    Fit one norm-constrained block per Voronoi cell.

    Args:
        ds: Denoising dataset with t > 0
        basis: Orthonormal basis at the dataset's sigma^2
        norm_bound: Frobenius bound D per block
        threads: Worker cap for concurrent cell fits

    Returns:
        PiecewiseScoreModel: with per-cell counts and losses recorded
    """
    if ds.t <= 0:
        raise InvalidParameterError("fit_piecewise needs t > 0")
    if abs(basis.sigma_sq - ds.sigma_sq) > 1e-12 * ds.sigma_sq:
        raise InvalidParameterError(
            f"basis sigma_sq {basis.sigma_sq} does not match dataset sigma_sq {ds.sigma_sq}"
        )

    targets = regression_targets(ds)
    center_array = ds.centers.center_array

    def fit_one(j: int) -> Tuple[np.ndarray, int, Optional[float]]:
        rows = np.flatnonzero(ds.cell_of == j)
        if rows.size == 0:
            return constant_block(center_array[j], basis, norm_bound), 0, None
        features = feature_vector(basis, ds.ys[rows], center_array[j])
        block = fit_cell(features, targets[rows], norm_bound)
        return block, int(rows.size), empirical_loss(features, targets[rows], block)

    results = run_concurrently(fit_one, range(ds.centers.size), threads)
    blocks: List[np.ndarray] = [r[0] for r in results]
    counts = [r[1] for r in results]
    losses = [r[2] for r in results]

    empty = counts.count(0)
    if empty:
        logger.info(f"[INFO] {empty}/{len(counts)} cells empty at t={ds.t:.6g}; using center blocks")

    return PiecewiseScoreModel(
        centers=ds.centers,
        basis=basis,
        blocks=blocks,
        norm_bound=norm_bound,
        t=ds.t,
        cell_counts=counts,
        cell_losses=losses,
    )


def evaluate_model(model: PiecewiseScoreModel, y) -> Tuple[np.ndarray, np.ndarray]:
    """(g(y), s(y)) with s(y) = (g(y) - y) / sigma^2."""
    ys = np.asarray(y, dtype=float)
    g = model.denoise(ys)
    return g, (g - ys) / model.sigma_sq


# Export regression services
__all__ = [
    "build_denoising_dataset",
    "regression_targets",
    "fit_cell",
    "empirical_loss",
    "constant_block",
    "fit_piecewise",
    "evaluate_model",
]
