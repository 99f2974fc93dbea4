"""Remove a planted blink with ICA guided by an EOG reference channel."""
import numpy as np

from nse.ica import artifact_components, fit_ica, reject_components
from nse.synthgen import generate_artifact_mixture

rec, eog, truth = generate_artifact_mixture(seed=0)
model = fit_ica(rec, k=4, seed=0)
rejected, corr = artifact_components(model, rec, eog, threshold=0.8)
print(f"{model.k} components, |corr| with EOG: {np.round(corr, 3)}")
print(f"rejected: {rejected.tolist()}")

clean = reject_components(model, rec, eog)
blink = truth.sources[truth.blink_index]
before = max(abs(np.corrcoef(ch, blink)[0, 1]) for ch in rec.samples)
after = max(abs(np.corrcoef(ch, blink)[0, 1]) for ch in clean.samples)
print(f"worst channel correlation with the blink: {before:.3f} -> {after:.3f}")
