"""Synthetic paired audio/EEG dataset with a controllable shared latent.

Each item draws a smooth low-dimensional latent trajectory around a class
anchor.  The trajectory amplitude-modulates a bank of fixed audio-band
carriers on one side and a fixed channel-mixed bank of EEG-band carriers on
the other, plus independent per-view noise.  Correlation between the views
is therefore steerable through ``noise_sigma``: zero noise gives an almost
deterministic shared envelope, large noise drowns it.
"""

from dataclasses import dataclass

import numpy as np

from .signal import Recording, SignalBuffer
from .validation import require


@dataclass
class SynthSpec:
    n_items: int = 30
    duration: float = 3.0
    latent_dim: int = 4
    noise_sigma: float = 0.3
    classes: int = 3
    audio_rate: float = 22050.0
    eeg_rate: float = 250.0
    eeg_channels: int = 16
    seed: int = 0

    def __post_init__(self):
        require(self.n_items >= 1, "n_items must be positive")
        require(self.duration > 0, "duration must be positive")
        require(self.latent_dim >= 1, "latent_dim must be positive")
        require(self.noise_sigma >= 0, "noise_sigma must be non-negative")
        require(self.classes >= 1, "classes must be positive")


@dataclass
class SynthMaps:
    """Dataset-wide mixing maps, fixed by the dataset seed."""

    audio_freqs: np.ndarray
    audio_phases: np.ndarray
    eeg_freqs: np.ndarray
    eeg_phases: np.ndarray
    eeg_mix: np.ndarray
    class_centers: np.ndarray


def _dataset_maps(spec):
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0)))
    q = spec.latent_dim
    audio_freqs = np.geomspace(220.0, 2200.0, q) * rng.uniform(0.9, 1.1, q)
    eeg_freqs = np.linspace(4.0, 24.0, q) * rng.uniform(0.9, 1.1, q)
    eeg_mix = rng.standard_normal((spec.eeg_channels, q)) / np.sqrt(q)
    centers = rng.standard_normal((spec.classes, q))
    return SynthMaps(audio_freqs=audio_freqs,
                     audio_phases=rng.uniform(0, 2 * np.pi, q),
                     eeg_freqs=eeg_freqs,
                     eeg_phases=rng.uniform(0, 2 * np.pi, q),
                     eeg_mix=eeg_mix,
                     class_centers=centers)


def generate(spec):
    """Deterministically generate the paired recordings for the spec."""
    maps = _dataset_maps(spec)
    q = spec.latent_dim
    recordings = []
    latents = []
    for item in range(spec.n_items):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1, item)))
        center = maps.class_centers[item % spec.classes]
        anchor = center + 0.35 * rng.standard_normal(q)
        label = int(np.argmin(np.linalg.norm(maps.class_centers - anchor, axis=1)))

        wander_freq = rng.uniform(0.15, 0.8, q)
        wander_phase = rng.uniform(0, 2 * np.pi, q)

        def latent(times):
            return (anchor[None, :]
                    + 0.5 * np.sin(2 * np.pi * times[:, None] * wander_freq
                                   + wander_phase))

        t_audio = np.arange(int(round(spec.duration * spec.audio_rate))) / spec.audio_rate
        t_eeg = np.arange(int(round(spec.duration * spec.eeg_rate))) / spec.eeg_rate

        env_audio = 1.0 + 0.5 * np.tanh(latent(t_audio))
        carriers = np.sin(2 * np.pi * t_audio[:, None] * maps.audio_freqs
                          + maps.audio_phases)
        audio = (env_audio * carriers).sum(axis=1) / np.sqrt(q)
        audio = audio + spec.noise_sigma * rng.standard_normal(len(t_audio))

        env_eeg = 1.0 + 0.5 * np.tanh(latent(t_eeg))
        eeg_parts = env_eeg * np.sin(2 * np.pi * t_eeg[:, None] * maps.eeg_freqs
                                     + maps.eeg_phases)
        eeg = eeg_parts @ maps.eeg_mix.T
        eeg = eeg + spec.noise_sigma * rng.standard_normal((len(t_eeg),
                                                            spec.eeg_channels))

        recordings.append(Recording(
            item_id=f"item{item:03d}",
            audio=SignalBuffer(audio[None, :], spec.audio_rate),
            eeg=SignalBuffer(eeg.T, spec.eeg_rate),
            class_label=str(label),
            subject_id=f"s{item // 2:02d}",
        ))
        latents.append(anchor)
    return recordings, np.asarray(latents)
