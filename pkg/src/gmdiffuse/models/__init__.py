"""
Fitted objects for gmdiffuse.

Only the dependency-free containers are re-exported here. PiecewiseScoreModel
(models.score_model) and TrainedStack (models.stack) build on the services
layer and are imported from their modules directly.
"""

from gmdiffuse.models.basis import FeatureBasis, MultiIndex
from gmdiffuse.models.dataset import DenoisingDataset
from gmdiffuse.models.trajectory import ReverseTrajectory


__all__ = [
    "MultiIndex",
    "FeatureBasis",
    "DenoisingDataset",
    "ReverseTrajectory",
]
