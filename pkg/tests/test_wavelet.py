import numpy as np
import pytest

from audioeeg.signal import SignalBuffer
from audioeeg.validation import ValidationError
from audioeeg.wavelet import (
    default_levels,
    dwt,
    idwt,
    max_levels,
    semblance,
    war,
    wavelet_filters,
    wsd,
)

RATE = 250.0


def sinusoid(freq=10.0, n=375, rate=RATE):
    return np.sin(2 * np.pi * freq * np.arange(n) / rate)


class TestTransform:
    @pytest.mark.parametrize("family", ["haar", "db2", "db4"])
    def test_filter_orthonormality(self, family):
        p, q = wavelet_filters(family)
        assert np.dot(p, p) == pytest.approx(1.0, abs=1e-12)
        assert np.dot(q, q) == pytest.approx(1.0, abs=1e-12)
        assert abs(np.dot(p, q)) < 1e-12
        for shift in range(2, len(p), 2):
            assert abs(np.dot(p[:-shift], p[shift:])) < 1e-12

    @pytest.mark.parametrize("n", [256, 375, 1000, 4097, 33075])
    def test_perfect_reconstruction(self, n):
        rng = np.random.default_rng(n)
        x = rng.standard_normal(n)
        rec = idwt(dwt(x))
        rel = np.abs(rec - x).max() / np.abs(x).max()
        assert rel < 1e-8

    def test_constant_signal_detail_free(self):
        dec = dwt(np.full(375, 2.5))
        for band in dec.bands[:-1]:
            assert np.abs(band).max() < 1e-8
        # The approximation carries the (scaled) mean.
        assert np.abs(idwt(dec) - 2.5).max() < 1e-10

    def test_impulse_locality(self):
        n = 512
        x = np.zeros(n)
        x[100] = 1.0
        dec = dwt(x, levels=4)
        p, _ = wavelet_filters("db4")
        filt_len = len(p)
        total = sum(float(np.square(band).sum()) for band in dec.bands)
        outside = 0.0
        position = 100
        for level, band in enumerate(dec.bands, start=1):
            scale = 2 ** min(level, dec.levels)
            # Cone of influence of the impulse at this level.
            width = (scale - 1) * (filt_len - 1) + filt_len
            center = position / scale
            idx = np.arange(len(band))
            mask = np.abs(idx - center) > (width / scale + 2)
            outside += float(np.square(band[mask]).sum())
        assert total == pytest.approx(1.0, abs=1e-10)  # orthonormality
        assert outside / total < 1e-10

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            dwt(np.zeros(16), levels=3)

    def test_level_bookkeeping(self):
        assert max_levels(375) == 5
        assert default_levels(375) == 5
        assert default_levels(33075) == 6
        dec = dwt(np.zeros(375), levels=5)
        assert dec.level_lengths() == [375, 191, 99, 53, 30, 18]
        assert [len(b) for b in dec.bands] == [191, 99, 53, 30, 18, 18]


class TestWar:
    def test_zero_signal(self):
        sig = SignalBuffer(np.zeros((1, 375)), RATE)
        assert np.all(war(sig).data == 0.0)

    def test_clean_sinusoid_preserved(self):
        sig = SignalBuffer(sinusoid()[None, :], RATE)
        out = war(sig, multiplier=5.0)
        rel = np.linalg.norm(out.data - sig.data) / np.linalg.norm(sig.data)
        assert rel < 0.02

    def test_impulse_energy_removed(self):
        clean = sinusoid()
        dirty = clean.copy()
        pos = 180
        dirty[pos] += 100.0
        out = war(SignalBuffer(dirty[None, :], RATE), multiplier=5.0)
        window = slice(pos - 8, pos + 9)
        before = np.square(dirty[window] - clean[window]).sum()
        after = np.square(out.data[0][window] - clean[window]).sum()
        assert after <= 0.1 * before

    def test_large_multiplier_is_identity(self):
        rng = np.random.default_rng(0)
        sig = SignalBuffer(rng.standard_normal((2, 375)), RATE)
        out = war(sig, multiplier=1e9)
        assert np.abs(out.data - sig.data).max() < 1e-8

    def test_never_increases_band_variance(self):
        from audioeeg.wavelet import war_bands

        rng = np.random.default_rng(1)
        x = rng.standard_normal(375)
        x[50] += 30.0
        dec = dwt(x)
        cleaned = war_bands(dec, multiplier=2.0)
        for before, after in zip(dec.bands, cleaned.bands):
            assert after.var() <= before.var() + 1e-12


class TestWsd:
    def test_threshold_zero_is_identity(self):
        rng = np.random.default_rng(2)
        sig = SignalBuffer(rng.standard_normal((16, 375)), RATE)
        out = wsd(sig, threshold=0.0)
        assert np.abs(out.data - sig.data).max() < 1e-8

    def test_identical_channels_untouched(self):
        base = sinusoid()
        sig = SignalBuffer(np.tile(base, (16, 1)), RATE)
        out = wsd(sig, threshold=0.5)
        assert np.abs(out.data - sig.data).max() < 1e-6

    def test_independent_noise_suppressed(self):
        rng = np.random.default_rng(3)
        sig = SignalBuffer(rng.standard_normal((16, 375)), RATE)
        out = wsd(sig, threshold=0.5)
        assert np.square(out.data).sum() < 0.6 * np.square(sig.data).sum()

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(4)
        data = rng.standard_normal((4, 375))
        sig = SignalBuffer(data, RATE)
        decs = [dwt(data[c]) for c in range(4)]
        for band_index in range(len(decs[0].bands)):
            stack = np.stack([d.bands[band_index] for d in decs])
            scores = semblance(stack)
            kept_low = scores >= 0.3
            kept_high = scores >= 0.7
            assert np.all(kept_low | ~kept_high)  # high-kept subset of low-kept

    def test_single_channel_rejected(self):
        with pytest.raises(ValidationError):
            wsd(SignalBuffer(np.zeros((1, 375)), RATE))

    def test_semblance_identical_is_one(self):
        stack = np.tile(sinusoid(n=256), (3, 1))
        dec = dwt(stack[0])
        band = np.tile(dec.bands[0], (3, 1))
        assert np.all(semblance(band) > 0.999999)
