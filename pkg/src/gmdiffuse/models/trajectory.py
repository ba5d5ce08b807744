"""
Recorded reverse-SDE trajectory.
"""

from typing import Any, Dict, Sequence

import numpy as np


class ReverseTrajectory:
    """
    States of one reverse trajectory at the visited times (decreasing).

    Attributes:
        times: t_N, t_{N-1}, ..., t_1
        states: (len(times), n) array, states[i] is the state at times[i]
        seed: Seed the trajectory's noise stream was derived from
        index: Trajectory index within the generate() call it mirrors
    """

    def __init__(self, times: Sequence[float], states: np.ndarray, seed: int, index: int = 0):
        states = np.atleast_2d(np.array(states, dtype=float))
        if states.shape[0] != len(times):
            raise ValueError(f"{states.shape[0]} states for {len(times)} times")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")

        self.times = [float(t) for t in times]
        self.states = states
        self.seed = seed
        self.index = index

    @property
    def terminal(self) -> np.ndarray:
        """State at the smallest time t_1."""
        return self.states[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": self.times,
            "states": self.states.tolist(),
            "seed": self.seed,
            "index": self.index,
        }

    def __repr__(self) -> str:
        return f"<ReverseTrajectory(steps={len(self.times)}, seed={self.seed}, index={self.index})>"
