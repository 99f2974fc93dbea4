"""Distance between imagined and spoken embedding centroids, per class."""
import numpy as np

from ..embedding import EmbeddingMatrix
from ..errors import CoverageError


def class_centroid_distances(embeddings):
    """``{class_id: ||mean_imagined - mean_spoken||}`` over flattened matrices."""
    if any(not isinstance(m, EmbeddingMatrix) for m in embeddings):
        raise TypeError("expected unmasked EmbeddingMatrix instances")
    groups = {}
    for m in embeddings:
        groups.setdefault((m.label, m.domain), []).append(m.values.reshape(-1))
    domains = {d for _, d in groups}
    if domains != {"imagined", "spoken"}:
        raise CoverageError(f"both domains are required, got {sorted(domains)}")
    labels = sorted({lab for lab, _ in groups})
    missing = [(lab, d) for lab in labels for d in ("imagined", "spoken") if (lab, d) not in groups]
    if missing:
        raise CoverageError(f"classes missing a domain: {missing}")
    if len(labels) < 2:
        raise CoverageError(f"at least 2 classes are required, got {labels}")
    return {
        lab: float(np.linalg.norm(np.mean(groups[lab, "imagined"], axis=0)
                                  - np.mean(groups[lab, "spoken"], axis=0)))
        for lab in labels
    }


def adaptation_distance(embeddings):
    """Mean over classes of the imagined-to-spoken centroid distance."""
    d = class_centroid_distances(embeddings)
    return float(np.mean(list(d.values())))
