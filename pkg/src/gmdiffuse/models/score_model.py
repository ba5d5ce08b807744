"""
Piecewise Hermite score model.

One coefficient block per Voronoi cell of the warm-start centers. Inside cell
j the posterior-mean estimate is

    g(y) = B_j phi(y - mu_j),

with phi the orthonormal Hermite features at the model's noise level, and the
score estimate is s(y) = (g(y) - y) / sigma^2. The model is discontinuous
across cell boundaries.
"""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from gmdiffuse.models.basis import FeatureBasis
from gmdiffuse.schemas.warm_start import WarmStartSet
from gmdiffuse.services.hermite_features import build_basis, feature_vector
from gmdiffuse.services.warm_starts import assign_voronoi


# Slack on the Frobenius-norm constraint of each block
NORM_SLACK = 1e-9


class PiecewiseScoreModel:
    """
    Score estimate at one noise level.

    Attributes:
        centers: Warm-start set defining the cells
        basis: Orthonormal Hermite basis (degree d, variance sigma^2)
        blocks: Per-cell (n, C) coefficient matrices
        norm_bound: Frobenius bound D on every block
        t: Noise time the model was fit at (informational)
        cell_counts: Training samples per cell
        cell_losses: Mean squared residual per cell (None for empty cells)
    """

    def __init__(
        self,
        centers: WarmStartSet,
        basis: FeatureBasis,
        blocks: Sequence[np.ndarray],
        norm_bound: float,
        t: Optional[float] = None,
        cell_counts: Optional[Sequence[int]] = None,
        cell_losses: Optional[Sequence[Optional[float]]] = None,
    ):
        if len(blocks) != centers.size:
            raise ValueError(f"{len(blocks)} blocks for {centers.size} centers")
        if basis.n != centers.n:
            raise ValueError(f"basis dimension {basis.n} does not match centers {centers.n}")

        shape = (basis.n, basis.size)
        arrays: List[np.ndarray] = []
        for j, block in enumerate(blocks):
            block = np.array(block, dtype=float).reshape(shape)
            norm = np.linalg.norm(block)
            if norm > norm_bound * (1.0 + NORM_SLACK):
                raise ValueError(f"block {j} norm {norm!r} exceeds bound {norm_bound!r}")
            block.setflags(write=False)
            arrays.append(block)

        self.centers = centers
        self.basis = basis
        self.blocks = arrays
        self.norm_bound = float(norm_bound)
        self.t = None if t is None else float(t)
        self.cell_counts = list(cell_counts) if cell_counts is not None else None
        self.cell_losses = list(cell_losses) if cell_losses is not None else None

    @property
    def sigma_sq(self) -> float:
        return self.basis.sigma_sq

    @property
    def degree(self) -> int:
        return self.basis.d

    @property
    def n(self) -> int:
        return self.basis.n

    def denoise(self, y) -> np.ndarray:
        """Posterior-mean estimate g(y) using the block of y's Voronoi cell."""
        ys = np.asarray(y, dtype=float)
        single = ys.ndim == 1
        ys = np.atleast_2d(ys)

        out = np.empty_like(ys)
        if ys.shape[0] == 0:
            return out

        cells = assign_voronoi(self.centers, ys)
        center_array = self.centers.center_array
        for j in np.unique(cells):
            mask = cells == j
            features = feature_vector(self.basis, ys[mask], center_array[j])
            out[mask] = features @ self.blocks[j].T

        return out[0] if single else out

    def score(self, y) -> np.ndarray:
        """s(y) = (g(y) - y) / sigma^2."""
        ys = np.asarray(y, dtype=float)
        return (self.denoise(ys) - ys) / self.sigma_sq

    def __call__(self, y) -> np.ndarray:
        return self.score(y)

    def to_dict(self) -> Dict[str, Any]:
        """JSON form; coefficient blocks are stored row-major."""
        return {
            "sigma_sq": self.sigma_sq,
            "degree": self.degree,
            "n": self.n,
            "t": self.t,
            "norm_bound": self.norm_bound,
            "centers": self.centers.centers,
            "radius": self.centers.radius,
            "noise_level": self.centers.noise_level,
            "blocks": [
                {
                    "cell": j,
                    "coeffs": block.ravel().tolist(),
                    "count": None if self.cell_counts is None else int(self.cell_counts[j]),
                    "loss": None if self.cell_losses is None else self.cell_losses[j],
                }
                for j, block in enumerate(self.blocks)
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "PiecewiseScoreModel":
        """Rebuild a model from to_dict() output."""
        centers = WarmStartSet(
            centers=payload["centers"],
            radius=payload["radius"],
            noise_level=payload["noise_level"],
        )
        basis = build_basis(int(payload["n"]), int(payload["degree"]), float(payload["sigma_sq"]))
        entries = sorted(payload["blocks"], key=lambda b: b["cell"])
        counts = [b.get("count") for b in entries]
        return cls(
            centers=centers,
            basis=basis,
            blocks=[np.asarray(b["coeffs"], dtype=float) for b in entries],
            norm_bound=float(payload["norm_bound"]),
            t=payload.get("t"),
            cell_counts=None if any(c is None for c in counts) else counts,
            cell_losses=[b.get("loss") for b in entries],
        )

    def __repr__(self) -> str:
        return (
            f"<PiecewiseScoreModel(t={self.t}, sigma_sq={self.sigma_sq}, degree={self.degree}, "
            f"cells={self.centers.size})>"
        )
