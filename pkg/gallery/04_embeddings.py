"""Log-variance embeddings, the column-mean mask, and the binary container."""
import tempfile
from pathlib import Path

import numpy as np

from nse.embedding import column_mean_mask, embed, load_embeddings, save_embeddings
from nse.spatial import fit_bank, project
from nse.synthgen import SynthSpec, generate

imagined, _, _ = generate(SynthSpec(trials_per_class=3, seed=0))
ms = embed(project(fit_bank(imagined), imagined))
print(f"{len(ms)} embeddings of shape {ms[0].shape}")

masked = column_mean_mask(ms[0])
print(f"masked fraction in the first embedding: {masked.mask.mean():.2f}")

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "imagined.emb"
    save_embeddings(ms, path)
    back = load_embeddings(path)
    err = max(np.max(np.abs(a.values - b.values)) for a, b in zip(ms, back))
    print(f"{path.stat().st_size} bytes on disk, float32 round-trip error {err:.1e}")
