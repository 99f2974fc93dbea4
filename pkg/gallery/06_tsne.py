"""Exact t-SNE on three well-separated clusters."""
import numpy as np

from nse.analysis import tsne

rng = np.random.default_rng(0)
centers = np.zeros((3, 5))
centers[1, 0] = centers[2, 1] = 10.0
x = np.concatenate([c + 0.1 * rng.standard_normal((50, 5)) for c in centers])
labels = np.repeat(np.arange(3), 50)

res = tsne(x, perplexity=30, iterations=1000, seed=0)
print(f"KL {res.kl_initial:.3f} -> {res.kl_final:.3f}")
for c in range(3):
    print(f"cluster {c} centre {res.points[labels == c].mean(axis=0).round(1)}")
