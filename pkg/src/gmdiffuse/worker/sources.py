"""
Sample streams consumed by the learning loop.

A source hands out fresh P_0 samples in the order they are requested and
records every draw, so the audit can show that warm-start refresh batches
were taken after, and disjoint from, each level's regression batch.
"""

import logging
from typing import List, Tuple

import numpy as np

from gmdiffuse.core.errors import InsufficientSamplesError, InvalidParameterError
from gmdiffuse.schemas.mixture import MixtureSpec
from gmdiffuse.services.mixture_model import sample_mixture


logger = logging.getLogger(__name__)


class SampleSource:
    """Base class: sequential draws with a consumption log."""

    def __init__(self, n: int):
        self.n = n
        self.consumed = 0
        self.history: List[Tuple[str, int]] = []

    def _take(self, count: int) -> np.ndarray:
        raise NotImplementedError

    def draw(self, count: int, purpose: str = "regression") -> np.ndarray:
        """
        Next `count` samples from the stream.

        Raises:
            InsufficientSamplesError: If the stream cannot supply them
        """
        if count < 0:
            raise InvalidParameterError(f"count must be nonnegative, got {count}")
        batch = self._take(count)
        self.consumed += count
        self.history.append((purpose, count))
        return batch

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}(n={self.n}, consumed={self.consumed})>"


class MixtureSampleSource(SampleSource):
    """Unbounded stream of fresh draws from a mixture."""

    def __init__(self, spec: MixtureSpec, seed):
        super().__init__(spec.n)
        self.spec = spec
        self.rng = np.random.default_rng(seed)

    def _take(self, count: int) -> np.ndarray:
        return sample_mixture(self.spec, count, self.rng)


class ArraySampleSource(SampleSource):
    """Finite stream over an in-memory array (e.g. a CSV file), consumed in order."""

    def __init__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        super().__init__(points.shape[1])
        self.points = points

    @property
    def remaining(self) -> int:
        return self.points.shape[0] - self.consumed

    def _take(self, count: int) -> np.ndarray:
        if count > self.remaining:
            raise InsufficientSamplesError(
                f"sample stream exhausted: requested {count}, {self.remaining} remaining",
                requested=count,
                available=self.remaining,
            )
        return self.points[self.consumed:self.consumed + count].copy()


# Export sample sources
__all__ = ["SampleSource", "MixtureSampleSource", "ArraySampleSource"]
