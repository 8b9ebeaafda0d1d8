"""Time-domain filtering and range scaling.

Drift/DC removal with a 0.5 Hz Butterworth high-pass, mains suppression with
a 50 Hz notch, and per-channel min-max scaling to [-1, 1].  Filters are
realized as cascaded biquad sections and applied zero-phase (forward plus
time-reversed pass) so audio/EEG time alignment is preserved.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfiltfilt

from .signal import SignalBuffer
from .validation import ValidationError, require

DEFAULT_HIGHPASS_HZ = 0.5
DEFAULT_NOTCH_HZ = 50.0
DEFAULT_NOTCH_Q = 30.0
DEFAULT_NOTCH_SECTIONS = 2
BUTTERWORTH_Q = 1.0 / math.sqrt(2.0)


@dataclass
class BiquadSpec:
    """One filtering stage: kind, corner/center frequency, Q, section count."""

    kind: str  # "highpass" | "notch"
    frequency_hz: float
    q: float
    sections: int = 1

    def __post_init__(self):
        require(self.kind in ("highpass", "notch"),
                f"unknown filter kind {self.kind!r}")
        require(self.frequency_hz > 0, "filter frequency must be positive")
        require(self.q > 0, "filter Q must be positive")
        require(self.sections >= 1, "need at least one biquad section")


def highpass_spec(frequency_hz=DEFAULT_HIGHPASS_HZ, q=BUTTERWORTH_Q, sections=1):
    return BiquadSpec(kind="highpass", frequency_hz=frequency_hz, q=q, sections=sections)


def notch_spec(frequency_hz=DEFAULT_NOTCH_HZ, q=DEFAULT_NOTCH_Q, sections=DEFAULT_NOTCH_SECTIONS):
    return BiquadSpec(kind="notch", frequency_hz=frequency_hz, q=q, sections=sections)


def biquad_sos(spec, rate):
    """Second-order sections for the spec at the given sample rate (RBJ forms)."""
    require(spec.frequency_hz < rate / 2,
            f"filter frequency {spec.frequency_hz} Hz is not below the "
            f"Nyquist frequency {rate / 2} Hz")
    w0 = 2.0 * math.pi * spec.frequency_hz / rate
    alpha = math.sin(w0) / (2.0 * spec.q)
    cw = math.cos(w0)
    if spec.kind == "highpass":
        b = np.array([(1 + cw) / 2, -(1 + cw), (1 + cw) / 2])
    else:
        b = np.array([1.0, -2.0 * cw, 1.0])
    a = np.array([1 + alpha, -2.0 * cw, 1 - alpha])
    section = np.concatenate([b, a]) / a[0]
    return np.tile(section, (spec.sections, 1))


def filter_apply(sig, spec):
    """Zero-phase filtering of every channel; output length equals input."""
    sos = biquad_sos(spec, sig.rate)
    return sig.with_data(sosfiltfilt(sos, sig.data, axis=1))


def scale_minmax(sig, per_channel=True):
    """Affine map so min -> -1 and max -> +1; constant channels map to zeros.

    With ``per_channel=False`` one global min/max is used (the audio
    convention); otherwise every channel is scaled independently (the EEG
    convention).
    """
    data = sig.data
    if per_channel:
        lo = data.min(axis=1, keepdims=True)
        hi = data.max(axis=1, keepdims=True)
    else:
        lo = np.full((data.shape[0], 1), data.min())
        hi = np.full((data.shape[0], 1), data.max())
    span = hi - lo
    flat = span == 0
    safe_span = np.where(flat, 1.0, span)
    out = 2.0 * (data - lo) / safe_span - 1.0
    out = np.where(flat, 0.0, out)
    return sig.with_data(out)
