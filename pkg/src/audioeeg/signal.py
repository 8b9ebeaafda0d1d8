"""Multichannel time-series container used by the preprocessing and training code."""

from dataclasses import dataclass, field

import numpy as np

from .validation import ValidationError, check_finite


@dataclass
class SignalBuffer:
    """A (channels, samples) block of real samples at a fixed rate.

    Audio is carried as 1 x n at 22050 Hz, EEG as 16 x n at 250 Hz.
    """

    data: np.ndarray
    rate: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 1:
            self.data = self.data[None, :]
        if self.data.ndim != 2:
            raise ValidationError(f"signal data must be 2-D, got shape {self.data.shape}")
        if not self.rate > 0:
            raise ValidationError(f"sample rate must be positive, got {self.rate}")
        check_finite(self.data, "signal data")

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.rate

    def with_data(self, data):
        """New buffer at the same rate (validates the replacement data)."""
        return SignalBuffer(data=data, rate=self.rate)

    def copy(self):
        return SignalBuffer(data=self.data.copy(), rate=self.rate)


@dataclass
class Recording:
    """One paired stimulus: aligned audio and EEG plus bookkeeping labels."""

    item_id: str
    audio: SignalBuffer
    eeg: SignalBuffer
    class_label: str = "0"
    subject_id: str = "0"
