"""
Denoising dataset for one noise level.
"""

from typing import Any, Dict

import numpy as np

from gmdiffuse.schemas.warm_start import WarmStartSet


class DenoisingDataset:
    """
    Paired clean and noised samples y_i = x_i + sqrt(t) xi_i with Voronoi labels.

    Attributes:
        xs: (m, n) clean samples from P_0
        ys: (m, n) noised samples from P_t
        t: Noise time
        sigma_sq: t + sigma0^2
        centers: Warm-start set defining the partition
        cell_of: (m,) Voronoi cell index of every y_i
    """

    def __init__(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
        t: float,
        sigma_sq: float,
        centers: WarmStartSet,
        cell_of: np.ndarray,
    ):
        xs = np.atleast_2d(np.array(xs, dtype=float))
        ys = np.atleast_2d(np.array(ys, dtype=float))
        cell_of = np.array(cell_of, dtype=np.intp)

        if xs.shape != ys.shape:
            raise ValueError(f"xs shape {xs.shape} does not match ys shape {ys.shape}")
        if cell_of.shape != (xs.shape[0],):
            raise ValueError(f"cell_of has shape {cell_of.shape}, expected ({xs.shape[0]},)")
        if t < 0:
            raise ValueError(f"t must be nonnegative, got {t}")
        if sigma_sq <= t:
            raise ValueError(f"sigma_sq={sigma_sq} must exceed t={t} (sigma0^2 > 0)")
        if centers.n != xs.shape[1]:
            raise ValueError(f"centers have dimension {centers.n}, samples {xs.shape[1]}")

        self.xs = xs
        self.ys = ys
        self.t = float(t)
        self.sigma_sq = float(sigma_sq)
        self.centers = centers
        self.cell_of = cell_of

        # Read-only during fitting
        for array in (self.xs, self.ys, self.cell_of):
            array.setflags(write=False)

    @property
    def size(self) -> int:
        return self.xs.shape[0]

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    @property
    def sigma0_sq(self) -> float:
        return self.sigma_sq - self.t

    def cell_counts(self) -> np.ndarray:
        """Number of samples in every Voronoi cell (including empty ones)."""
        return np.bincount(self.cell_of, minlength=self.centers.size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "n": self.n,
            "t": self.t,
            "sigma_sq": self.sigma_sq,
            "cells": self.centers.size,
            "cell_counts": self.cell_counts().tolist(),
        }

    def __repr__(self) -> str:
        return (
            f"<DenoisingDataset(size={self.size}, n={self.n}, t={self.t}, "
            f"cells={self.centers.size})>"
        )
