"""ERD/ERS band-power grids, exact t-SNE and the cross-domain distance metric."""
from .adaptation import adaptation_distance, class_centroid_distances
from .erders import ErdErsGrid, erd_ers, tile_bands
from .tsne import TsneResult, joint_probabilities, tsne

__all__ = [
    "ErdErsGrid", "erd_ers", "tile_bands",
    "TsneResult", "tsne", "joint_probabilities",
    "adaptation_distance", "class_centroid_distances",
]
