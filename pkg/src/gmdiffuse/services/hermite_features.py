"""
Hermite Feature Service
Version: 1.0.0

Enumerates multi-indices and evaluates scaled probabilists' Hermite
polynomials h_{k,sigma^2}(z) = h_k(z / sigma), the regression features of
the score learner.

Conventions:
    - 1D recurrence: h_k(u) = u h_{k-1}(u) - (k-1) h_{k-2}(u), h_0 = 1, h_1 = u
    - Orthonormal variant: h_k / sqrt(k!), evaluated with its own stable
      recurrence so large degrees never overflow
    - Multi-indices in graded-lex order: by total degree, then with the first
      coordinate descending, e.g. (0,0), (1,0), (0,1), (2,0), (1,1), (0,2)
"""

import logging
import math
from typing import Iterator, List, Optional, Tuple

import numpy as np

from gmdiffuse.core import config
from gmdiffuse.core.errors import BasisTooLargeError, InvalidParameterError
from gmdiffuse.models.basis import FeatureBasis, MultiIndex


logger = logging.getLogger(__name__)


def basis_size(n: int, d: int) -> int:
    """C(n+d, d)."""
    return math.comb(n + d, d)


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """All ways to write total as `parts` nonnegative ints, first entry descending."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def enumerate_multi_indices(n: int, d: int, cap: Optional[int] = None) -> List[MultiIndex]:
    """
    List every multi-index with |k| <= d in graded-lex order.

    Args:
        n: Dimension (>= 1)
        d: Maximum total degree (>= 0)
        cap: Maximum basis size (defaults to GMDIFFUSE_BASIS_CAP)

    Returns:
        list: Exactly C(n+d, d) MultiIndex objects

    Raises:
        InvalidParameterError: If n < 1 or d < 0
        BasisTooLargeError: If C(n+d, d) exceeds the cap
    """
    if n < 1 or d < 0:
        raise InvalidParameterError(f"need n >= 1 and d >= 0, got n={n}, d={d}")

    cap = config.BASIS_CAP if cap is None else cap
    size = basis_size(n, d)
    if size > cap:
        raise BasisTooLargeError(
            f"Hermite basis for n={n}, d={d} has {size} functions, above the cap {cap}",
            size=size,
            cap=cap,
        )

    return [
        MultiIndex(entries)
        for degree in range(d + 1)
        for entries in _compositions(degree, n)
    ]


def build_basis(
    n: int,
    d: int,
    sigma_sq: float,
    normalized: bool = True,
    cap: Optional[int] = None,
) -> FeatureBasis:
    """Assemble a FeatureBasis for dimension n, degree d and reference variance sigma_sq."""
    return FeatureBasis(n, d, sigma_sq, enumerate_multi_indices(n, d, cap), normalized)


def hermite_table(d: int, u: np.ndarray, normalized: bool = False) -> np.ndarray:
    """
    Evaluate h_0..h_d at every entry of u.

    Args:
        d: Maximum degree
        u: Array of standardized arguments z / sigma
        normalized: Return h_k / sqrt(k!) instead of h_k

    Returns:
        np.ndarray: Shape u.shape + (d + 1,)
    """
    u = np.asarray(u, dtype=float)
    table = np.empty(u.shape + (d + 1,), dtype=float)
    table[..., 0] = 1.0
    if d >= 1:
        table[..., 1] = u
    for k in range(2, d + 1):
        if normalized:
            table[..., k] = (u * table[..., k - 1] - math.sqrt(k - 1) * table[..., k - 2]) / math.sqrt(k)
        else:
            table[..., k] = u * table[..., k - 1] - (k - 1) * table[..., k - 2]
    return table


def hermite_1d(k: int, sigma_sq: float, z):
    """
    Scaled probabilists' Hermite polynomial h_{k,sigma^2}(z) = h_k(z / sigma).

    Works on scalars and arrays alike.
    """
    if k < 0:
        raise InvalidParameterError(f"degree must be nonnegative, got {k}")
    if sigma_sq <= 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")

    u = np.asarray(z, dtype=float) / math.sqrt(sigma_sq)
    value = hermite_table(k, u)[..., k]
    return float(value) if value.ndim == 0 else value


def feature_vector(basis: FeatureBasis, y, center) -> np.ndarray:
    """
    Evaluate every basis function at y - center.

    Args:
        basis: FeatureBasis
        y: One point (n,) or a batch (m, n)
        center: Point (n,) subtracted before evaluation

    Returns:
        np.ndarray: (C,) for one point, (m, C) for a batch
    """
    ys = np.asarray(y, dtype=float)
    single = ys.ndim == 1
    ys = np.atleast_2d(ys)
    center = np.asarray(center, dtype=float).reshape(1, -1)
    if ys.shape[1] != basis.n or center.shape[1] != basis.n:
        raise InvalidParameterError(
            f"expected points of dimension {basis.n}, got {ys.shape[1]} and {center.shape[1]}"
        )

    m = ys.shape[0]
    out = np.empty((m, basis.size), dtype=float)
    columns = np.arange(basis.n)
    chunk = max(1, config.FEATURE_CHUNK_ROWS)

    for start in range(0, m, chunk):
        u = (ys[start:start + chunk] - center) / basis.sigma
        # (rows, n, d+1) -> gather h_{k_i}(u_i) for every index -> product over coordinates
        table = hermite_table(basis.d, u, normalized=basis.normalized)
        gathered = table[:, columns, basis.exponents]
        out[start:start + chunk] = gathered.prod(axis=2)

    return out[0] if single else out


# Export feature functions
__all__ = [
    "basis_size",
    "enumerate_multi_indices",
    "build_basis",
    "hermite_table",
    "hermite_1d",
    "feature_vector",
]
