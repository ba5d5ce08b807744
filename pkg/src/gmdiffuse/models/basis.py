"""
Hermite feature basis objects.

A FeatureBasis fixes the dimension n, the maximum total degree d, the
reference variance sigma^2 and the ordered list of multi-indices. The
evaluation itself lives in services.hermite_features.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class MultiIndex:
    """Per-coordinate degrees k = (k_1, ..., k_n)."""

    entries: Tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.entries):
            raise ValueError(f"multi-index entries must be nonnegative: {self.entries}")

    @property
    def degree(self) -> int:
        return sum(self.entries)

    @property
    def n(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"<MultiIndex{self.entries}>"


class FeatureBasis:
    """
    Scaled multivariate Hermite basis h_k(y - center) with reference N(0, sigma^2 I).

    Attributes:
        n: Dimension
        d: Maximum total degree
        sigma_sq: Variance of the reference Gaussian
        indices: All multi-indices with |k| <= d in graded-lex order
        normalized: Divide by sqrt(k!) for unit L2(gamma) norm
    """

    def __init__(
        self,
        n: int,
        d: int,
        sigma_sq: float,
        indices: Sequence[MultiIndex],
        normalized: bool = True,
    ):
        if sigma_sq <= 0:
            raise ValueError(f"sigma_sq must be positive, got {sigma_sq}")
        if any(idx.n != n for idx in indices):
            raise ValueError(f"every multi-index must have length n={n}")
        if any(idx.degree > d for idx in indices):
            raise ValueError(f"multi-index of degree above d={d}")

        self.n = n
        self.d = d
        self.sigma_sq = float(sigma_sq)
        self.indices: List[MultiIndex] = list(indices)
        self.normalized = normalized

        # (C, n) integer exponent table used by the vectorized evaluator
        self.exponents = np.array([idx.entries for idx in self.indices], dtype=np.intp).reshape(
            len(self.indices), n
        )

    @property
    def size(self) -> int:
        """Number of basis functions C(n+d, d)."""
        return len(self.indices)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma_sq))

    @property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "d": self.d,
            "sigma_sq": self.sigma_sq,
            "size": self.size,
            "normalized": self.normalized,
        }

    def __repr__(self) -> str:
        return (
            f"<FeatureBasis(n={self.n}, d={self.d}, sigma_sq={self.sigma_sq}, "
            f"size={self.size}, normalized={self.normalized})>"
        )
