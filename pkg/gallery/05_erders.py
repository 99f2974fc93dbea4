"""Band x time ERD/ERS grid with a planted 100 Hz burst at 0.5-1.25 s."""
import numpy as np

from nse.analysis import erd_ers
from nse.signal_core import EpochSet

FS = 1000.0
rng = np.random.default_rng(0)
x = rng.standard_normal((50, 16, 2000))
t = np.arange(2000) / FS
on = (t >= 0.5) & (t < 1.25)
x[..., on] += 3.0 * np.sin(2 * np.pi * 100 * t[on] + rng.uniform(0, 2 * np.pi, (50, 16, 1)))

grid = erd_ers(EpochSet(x, np.zeros(50, dtype=int), np.full(50, "imagined"), FS))
print("band      " + " ".join(f"{a:5.2f}" for a, _ in grid.time_bins))
for (lo, hi), row in zip(grid.bands, grid.values):
    print(f"{lo:3.0f}-{hi:3.0f}  " + " ".join(f"{v:5.0f}" for v in row))
b, k = grid.argmax()
print(f"maximum in {grid.bands[b]} Hz at {grid.time_bins[k]} s")
