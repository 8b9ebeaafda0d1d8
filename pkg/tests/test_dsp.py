import numpy as np
import pytest

from audioeeg.dsp import (
    filter_apply,
    highpass_spec,
    notch_spec,
    scale_minmax,
)
from audioeeg.signal import SignalBuffer
from audioeeg.validation import ValidationError

RATE = 250.0


def sine(freq, seconds=8.0, rate=RATE, channels=1):
    t = np.arange(int(seconds * rate)) / rate
    return SignalBuffer(np.tile(np.sin(2 * np.pi * freq * t), (channels, 1)), rate)


def central(x, frac=0.8):
    n = x.shape[-1]
    k = int(n * (1 - frac) / 2)
    return x[..., k:n - k]


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


class TestFilterApply:
    def test_dc_rejection(self):
        sig = SignalBuffer(np.full((1, 375), 3.7), RATE)
        out = filter_apply(sig, highpass_spec())
        assert np.abs(central(out.data)).max() < 1e-3 * 3.7

    def test_notch_attenuation_at_50hz(self):
        out = filter_apply(sine(50.0), notch_spec())
        att_db = 20 * np.log10(rms(central(out.data)) / rms(central(sine(50.0).data)))
        assert att_db <= -40.0

    def test_notch_passband_at_10hz(self):
        out = filter_apply(sine(10.0), notch_spec())
        gain_db = 20 * np.log10(rms(central(out.data)) / rms(central(sine(10.0).data)))
        assert abs(gain_db) <= 1.0

    def test_output_length_preserved(self):
        rng = np.random.default_rng(0)
        sig = SignalBuffer(rng.standard_normal((3, 1000)), RATE)
        out = filter_apply(sig, highpass_spec())
        assert out.data.shape == sig.data.shape
        assert out.rate == sig.rate

    def test_linearity(self):
        rng = np.random.default_rng(1)
        x = SignalBuffer(rng.standard_normal((1, 2000)), RATE)
        y = SignalBuffer(rng.standard_normal((1, 2000)), RATE)
        spec = notch_spec()
        combined = filter_apply(SignalBuffer(2.5 * x.data - 0.5 * y.data, RATE), spec)
        separate = 2.5 * filter_apply(x, spec).data - 0.5 * filter_apply(y, spec).data
        assert np.abs(combined.data - separate).max() < 1e-9

    def test_zero_phase_no_lag(self):
        sig = sine(10.0, seconds=8.0)
        out = filter_apply(sig, notch_spec())
        a = central(sig.data[0])
        b = central(out.data[0])
        lags = np.arange(-20, 21)
        scores = [np.dot(a[20:-20], b[20 + lag:len(b) - 20 + lag]) for lag in lags]
        assert lags[int(np.argmax(scores))] == 0

    def test_frequency_above_nyquist_rejected(self):
        sig = sine(10.0)
        with pytest.raises(ValidationError):
            filter_apply(sig, notch_spec(frequency_hz=130.0))


class TestScaleMinmax:
    def test_three_point_ramp(self):
        out = scale_minmax(SignalBuffer(np.array([[0.0, 5.0, 10.0]]), RATE))
        assert out.data[0] == pytest.approx([-1.0, 0.0, 1.0])

    def test_two_point_affine(self):
        out = scale_minmax(SignalBuffer(np.array([[-3.0, 1.0]]), RATE))
        assert out.data[0] == pytest.approx([-1.0, 1.0])

    def test_constant_channel_maps_to_zero(self):
        out = scale_minmax(SignalBuffer(np.array([[7.0, 7.0, 7.0]]), RATE))
        assert np.all(out.data == 0.0)

    def test_per_channel_vs_global(self):
        data = np.array([[0.0, 1.0], [0.0, 4.0]])
        per = scale_minmax(SignalBuffer(data, RATE), per_channel=True)
        assert per.data == pytest.approx(np.array([[-1.0, 1.0], [-1.0, 1.0]]))
        glob = scale_minmax(SignalBuffer(data, RATE), per_channel=False)
        assert glob.data == pytest.approx(np.array([[-1.0, -0.5], [-1.0, 1.0]]))

    def test_range_and_endpoints(self):
        rng = np.random.default_rng(2)
        sig = SignalBuffer(rng.standard_normal((4, 300)), RATE)
        out = scale_minmax(sig)
        assert out.data.min() >= -1.0 and out.data.max() <= 1.0
        assert np.allclose(out.data.min(axis=1), -1.0)
        assert np.allclose(out.data.max(axis=1), 1.0)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        sig = SignalBuffer(rng.standard_normal((2, 100)), RATE)
        once = scale_minmax(sig)
        twice = scale_minmax(once)
        assert np.abs(twice.data - once.data).max() < 1e-12
