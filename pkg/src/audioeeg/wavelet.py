"""Multilevel discrete wavelet transform and wavelet-domain denoising.

The transform is the orthonormal Daubechies filter bank with half-point
symmetric boundary extension.  Band lengths follow (n + L - 1) // 2 per
level, which keeps enough boundary coefficients for exact reconstruction of
any input length.  On top of it sit the two denoisers used on EEG:

* artifact removal (``war``): per band, coefficients further than
  ``multiplier`` estimated standard deviations from the band center are
  pulled back to the center (or zeroed) before reconstruction.  Center and
  scale are the median and the consistent MAD estimate, so a large artifact
  cannot inflate the very statistics that are supposed to expose it, and
  only coefficients whose cone of influence lies fully inside the signal are
  candidates (boundary coefficients encode the symmetric extension, not
  artifacts);
* semblance denoising (``wsd``): a [0, 1] cross-channel coherence score is
  computed per coefficient from windowed cosine similarity, and positions
  scoring below the threshold are zeroed in every channel.
"""

from dataclasses import dataclass

import numpy as np

from .signal import SignalBuffer
from .validation import ValidationError, require

# Scaling (reconstruction lowpass) coefficients; sum = sqrt(2), unit norm.
_REC_LO = {
    "haar": [0.7071067811865476, 0.7071067811865476],
    "db2": [0.48296291314469025, 0.8365163037378079,
            0.22414386804185735, -0.12940952255092145],
    "db4": [0.23037781330885523, 0.7148465705525415,
            0.6308807679295904, -0.02798376941698385,
            -0.18703481171888114, 0.030841381835986965,
            0.032883011666982945, -0.010597401784997278],
}

DEFAULT_FAMILY = "db4"
DEFAULT_MAX_LEVELS = 6
DEFAULT_WAR_MULTIPLIER = 5.0
DEFAULT_WSD_THRESHOLD = 0.5
DEFAULT_WSD_WINDOW = 16


def wavelet_filters(family):
    """(lowpass, highpass) reconstruction filter pair for the family."""
    require(family in _REC_LO, f"unknown wavelet family {family!r}; "
            f"available: {sorted(_REC_LO)}")
    p = np.asarray(_REC_LO[family], dtype=np.float64)
    q = (p[::-1] * np.where(np.arange(len(p)) % 2 == 0, 1.0, -1.0))
    return p, q


def max_levels(n, family=DEFAULT_FAMILY):
    """Deepest admissible decomposition for a signal of length n."""
    filt_len = len(_REC_LO[family])
    if n < filt_len:
        return 0
    return int(np.floor(np.log2(n / (filt_len - 1))))


def default_levels(n, family=DEFAULT_FAMILY):
    return min(DEFAULT_MAX_LEVELS, max_levels(n, family))


@dataclass
class WaveletDecomposition:
    """Bands ordered detail level 1..J then the level-J approximation."""

    family: str
    levels: int
    bands: list
    original_length: int

    def level_lengths(self):
        """Input length at each analysis level, derived from the original."""
        filt_len = len(_REC_LO[self.family])
        lengths = [self.original_length]
        for _ in range(self.levels):
            lengths.append((lengths[-1] + filt_len - 1) // 2)
        return lengths


def _dwt_level(x, p, q):
    n = len(x)
    filt_len = len(p)
    ext = np.pad(x, (filt_len - 1, filt_len - 1), mode="symmetric")
    kept = (n + filt_len - 1) // 2
    stop = filt_len + 2 * kept
    lo = np.convolve(ext, p[::-1])[filt_len:stop:2]
    hi = np.convolve(ext, q[::-1])[filt_len:stop:2]
    return lo, hi


def _idwt_level(lo, hi, p, q, n):
    filt_len = len(p)
    up_lo = np.zeros(2 * len(lo) - 1)
    up_lo[::2] = lo
    up_hi = np.zeros(2 * len(hi) - 1)
    up_hi[::2] = hi
    rec = np.convolve(up_lo, p) + np.convolve(up_hi, q)
    return rec[filt_len - 2:filt_len - 2 + n]


def dwt(channel, family=DEFAULT_FAMILY, levels=None):
    """Multilevel analysis of a single channel."""
    x = np.asarray(channel, dtype=np.float64)
    require(x.ndim == 1, f"dwt expects a 1-D channel, got shape {x.shape}")
    n = len(x)
    admissible = max_levels(n, family)
    if levels is None:
        levels = min(DEFAULT_MAX_LEVELS, admissible)
    require(levels >= 1, f"need at least 1 level (signal of length {n} admits "
            f"{admissible})")
    require(levels <= admissible,
            f"signal of length {n} is too short for {levels} levels of "
            f"{family} (max {admissible})")
    p, q = wavelet_filters(family)
    details = []
    approx = x
    for _ in range(levels):
        approx, detail = _dwt_level(approx, p, q)
        details.append(detail)
    return WaveletDecomposition(family=family, levels=levels,
                                bands=details + [approx], original_length=n)


def idwt(dec):
    """Inverse of :func:`dwt`; exact up to float round-off."""
    p, q = wavelet_filters(dec.family)
    lengths = dec.level_lengths()
    approx = dec.bands[-1]
    for level in range(dec.levels - 1, -1, -1):
        approx = _idwt_level(approx, dec.bands[level], p, q, lengths[level])
    return approx


def interior_slices(dec):
    """Per-band slice of coefficients uninfluenced by the boundary extension.

    Tracks the contaminated edge zones through the level cascade: a level-j
    coefficient with shift i draws on input positions [2i, 2i + L - 1], and
    the approximation band's own zones feed the next level.
    """
    filt_len = len(_REC_LO[dec.family])
    half = (filt_len - 1) // 2
    lengths = dec.level_lengths()
    slices = []
    left = right = 0
    for level in range(dec.levels):
        n = lengths[level]
        kept = lengths[level + 1]
        j_lo = -(-left // 2) + half  # ceil(left/2) + half
        j_hi = (n - 1 - right - (filt_len - 1)) // 2 + half
        j_hi = min(j_hi, kept - 1)
        slices.append(slice(j_lo, j_hi + 1) if j_lo <= j_hi else slice(0, 0))
        left, right = j_lo, kept - 1 - j_hi
    slices.append(slices[-1])  # approximation shares the deepest zones
    return slices


def war_bands(dec, multiplier=DEFAULT_WAR_MULTIPLIER, replace="mean"):
    """Suppress per-band outlier coefficients; returns a new decomposition."""
    require(multiplier > 0, f"multiplier must be positive, got {multiplier}")
    require(replace in ("mean", "zero"), f"replace must be 'mean' or 'zero'")
    bands = []
    for band, interior in zip(dec.bands, interior_slices(dec)):
        cleaned = band.copy()
        inner = band[interior]
        if inner.size:
            center = np.median(inner)
            scale = 1.4826 * np.median(np.abs(inner - center))
            if scale == 0.0:
                scale = inner.std()
            if scale > 0.0:
                fill = center if replace == "mean" else 0.0
                outliers = np.abs(inner - center) > multiplier * scale
                cleaned[interior] = np.where(outliers, fill, inner)
        bands.append(cleaned)
    return WaveletDecomposition(family=dec.family, levels=dec.levels,
                                bands=bands, original_length=dec.original_length)


def war(sig, multiplier=DEFAULT_WAR_MULTIPLIER, family=DEFAULT_FAMILY,
        levels=None, replace="mean"):
    """Wavelet artifact removal, independently per channel and band."""
    out = np.empty_like(sig.data)
    for ch in range(sig.channels):
        dec = dwt(sig.data[ch], family=family, levels=levels)
        out[ch] = idwt(war_bands(dec, multiplier=multiplier, replace=replace))
    return sig.with_data(out)


def _window_sums(values, window):
    """Sliding-window sums with the window clipped at the edges."""
    n = len(values)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    half = window // 2
    starts = np.clip(np.arange(n) - half, 0, n)
    stops = np.clip(np.arange(n) - half + window, 0, n)
    return csum[stops] - csum[starts]


def semblance(band_stack, window=DEFAULT_WSD_WINDOW):
    """Cross-channel coherence score in [0, 1] per coefficient index.

    For every index, windowed coefficient vectors of all channel pairs are
    compared by cosine similarity; the pair average is mapped from [-1, 1]
    to [0, 1].  Windows in which both channels are all-zero count as fully
    coherent, mixed zero/non-zero pairs as fully incoherent.
    """
    channels, n = band_stack.shape
    require(channels >= 2, "semblance needs at least 2 channels")
    norms_sq = np.stack([_window_sums(band_stack[c] ** 2, window)
                         for c in range(channels)])
    eps = 1e-30
    scores = np.zeros(n)
    pairs = 0
    for a in range(channels):
        for b in range(a + 1, channels):
            dots = _window_sums(band_stack[a] * band_stack[b], window)
            both_zero = (norms_sq[a] < eps) & (norms_sq[b] < eps)
            denom = np.sqrt(np.maximum(norms_sq[a] * norms_sq[b], eps))
            cos = np.where(both_zero, 1.0, dots / denom)
            scores += (cos + 1.0) / 2.0
            pairs += 1
    return scores / pairs


def wsd(sig, threshold=DEFAULT_WSD_THRESHOLD, family=DEFAULT_FAMILY,
        levels=None, window=DEFAULT_WSD_WINDOW):
    """Wavelet semblance denoising across channels.

    Coefficients whose semblance score falls below ``threshold`` are zeroed
    in all channels before reconstruction.
    """
    require(sig.channels >= 2, "wsd needs a multichannel signal")
    require(0.0 <= threshold <= 1.0,
            f"threshold must be within [0, 1], got {threshold}")
    decs = [dwt(sig.data[ch], family=family, levels=levels)
            for ch in range(sig.channels)]
    for band_index in range(len(decs[0].bands)):
        stack = np.stack([dec.bands[band_index] for dec in decs])
        keep = semblance(stack, window=window) >= threshold
        for dec in decs:
            dec.bands[band_index] = dec.bands[band_index] * keep
    return sig.with_data(np.stack([idwt(dec) for dec in decs]))
