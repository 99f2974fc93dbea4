"""Neural speech embeddings from EEG.

Zero-phase IIR preprocessing, reference-guided FastICA cleaning, one-vs-rest
CSP shared across imagined and spoken domains, windowed log-variance
embeddings, ERD/ERS grids, exact t-SNE, and voice-track preprocessing.
"""
from .embedding import EmbeddingMatrix, column_mean_mask, embed, load_embeddings, save_embeddings
from .ica import IcaModel, fit_ica, reject_components
from .pipeline import PipelineConfig, preprocess
from .signal_core import (
    EpochSet,
    EventList,
    Recording,
    SosFilter,
    baseline_correct,
    design_bandpass,
    design_notch,
    filtfilt,
    segment,
)
from .spatial import SpatialFilterBank, class_covariances, csp_binary, csp_multiclass, fit_bank, project

__version__ = "0.1.0"
