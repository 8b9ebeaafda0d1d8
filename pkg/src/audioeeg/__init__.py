"""Audio-EEG correlated embeddings: preprocessing, two-branch correlation
training, song-level embedding extraction and cross-modal retrieval."""

from .dcca import DccaLossResult, dcca_loss
from .linalg import LinearCCA, covariances, eig_sym, inv_sqrt_sym
from .pipeline import (
    DccaEmbedder,
    PreprocessConfig,
    TrainConfig,
    embed_eeg,
    embed_song,
    run_protocol,
)
from .retrieval import FeatureTable, RetrievalConfig, RetrievalModel, mrr
from .signal import Recording, SignalBuffer
from .synth import SynthSpec, generate
from .validation import NumericError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "DccaEmbedder",
    "DccaLossResult",
    "FeatureTable",
    "LinearCCA",
    "NumericError",
    "PreprocessConfig",
    "Recording",
    "RetrievalConfig",
    "RetrievalModel",
    "SignalBuffer",
    "SynthSpec",
    "TrainConfig",
    "ValidationError",
    "covariances",
    "dcca_loss",
    "eig_sym",
    "embed_eeg",
    "embed_song",
    "generate",
    "inv_sqrt_sym",
    "mrr",
    "run_protocol",
]
