"""End-to-end two-branch training and song-level embedding extraction.

Ties together preprocessing, 1.5 s chunking, the two sample-level
convolutional branches, the correlation objective, the final linear CCA fit
and the balanced fold x run training protocol.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import dsp, wavelet
from .dcca import dcca_loss
from .linalg import LinearCCA
from .nn import build_branch
from .optim import make_optimizer
from .signal import Recording, SignalBuffer
from .validation import NumericError, ValidationError, require

AUDIO_RATE = 22050.0
EEG_RATE = 250.0
EEG_CHANNELS = 16
CHUNK_SECONDS = 1.5
EMBED_DIM = 128

AUDIO_BRANCH_TOKENS = ("conv-3-3-128 conv-3-1-128 mp-3 conv-3-1-256 mp-3 "
                       "conv-5-1-256 mp-5 conv-5-1-512 mp-5 conv-7-1-512 mp-7 "
                       "conv-7-1-1024 mp-7 conv-1-1-128")
EEG_BRANCH_TOKENS = ("conv-3-3-128 conv-5-1-256 mp-5 conv-5-1-512 mp-5 "
                     "conv-5-1-1024 mp-5 conv-1-1-128")


@dataclass
class PreprocessConfig:
    """Signal-conditioning constants applied per stimulus before chunking."""

    highpass_hz: float = 0.5
    notch_hz: float = 50.0
    notch_q: float = 30.0
    notch_sections: int = 2
    war_multiplier: float = 5.0
    war_replace: str = "mean"
    wsd_threshold: float = 0.5
    wsd_window: int = 16
    wavelet: str = "db4"
    wavelet_levels: int = 0  # 0 = deepest admissible up to 6


@dataclass
class TrainConfig:
    """Protocol and optimization settings for branch training."""

    epochs: int = 20
    batch_size: int = 102
    folds: int = 5
    runs_per_fold: int = 5
    reg: float = 1e-4
    eigen_floor: float = 1e-12
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    dtype: str = "float64"
    chunk_seconds: float = CHUNK_SECONDS
    cca_components: int = EMBED_DIM
    workers: int = 1

    def __post_init__(self):
        require(self.batch_size >= 2, "batch_size must be >= 2")
        require(self.folds >= 2, "folds must be >= 2")
        require(self.epochs >= 1, "epochs must be >= 1")
        require(self.runs_per_fold >= 1, "runs_per_fold must be >= 1")


def preprocess_eeg(sig, cfg=None):
    """Filtering plus wavelet denoising in the fixed order:

    high-pass + notch -> artifact removal -> per-channel min-max scaling ->
    semblance denoising.
    """
    cfg = cfg or PreprocessConfig()
    out = dsp.filter_apply(sig, dsp.highpass_spec(cfg.highpass_hz))
    out = dsp.filter_apply(out, dsp.notch_spec(cfg.notch_hz, q=cfg.notch_q,
                                               sections=cfg.notch_sections))
    levels = cfg.wavelet_levels or None
    out = wavelet.war(out, multiplier=cfg.war_multiplier, family=cfg.wavelet,
                      levels=levels, replace=cfg.war_replace)
    out = dsp.scale_minmax(out, per_channel=True)
    if out.channels >= 2:
        out = wavelet.wsd(out, threshold=cfg.wsd_threshold, family=cfg.wavelet,
                          levels=levels, window=cfg.wsd_window)
    return out


def preprocess_audio(sig):
    """Songs are min-max scaled globally to [-1, 1]."""
    return dsp.scale_minmax(sig, per_channel=False)


def preprocess_recording(rec, cfg=None):
    return Recording(item_id=rec.item_id,
                     audio=preprocess_audio(rec.audio),
                     eeg=preprocess_eeg(rec.eeg, cfg),
                     class_label=rec.class_label,
                     subject_id=rec.subject_id)


def chunk_signal(sig, chunk_seconds=CHUNK_SECONDS):
    """Consecutive non-overlapping chunks as a (n, length, channels) array.

    The trailing remainder shorter than a chunk is dropped; a signal shorter
    than one chunk is an error.
    """
    chunk_len = int(round(chunk_seconds * sig.rate))
    n = sig.n_samples // chunk_len
    require(n >= 1, f"signal of {sig.n_samples} samples is shorter than one "
            f"{chunk_seconds} s chunk ({chunk_len} samples)")
    used = sig.data[:, :n * chunk_len]
    return used.T.reshape(n, chunk_len, sig.channels).copy()


def chunk_pair(rec, chunk_seconds=CHUNK_SECONDS):
    """Aligned audio/EEG chunk arrays; both views keep the same chunk count."""
    audio = chunk_signal(rec.audio, chunk_seconds)
    eeg = chunk_signal(rec.eeg, chunk_seconds)
    n = min(len(audio), len(eeg))
    return audio[:n], eeg[:n]


def fold_partition(item_ids, folds, seed):
    """Balanced (within +-1) disjoint test folds, deterministic in the seed."""
    require(len(item_ids) >= folds, f"cannot split {len(item_ids)} items into "
            f"{folds} folds")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF01D)))
    order = rng.permutation(len(item_ids))
    assignment = [[] for _ in range(folds)]
    for pos, idx in enumerate(order):
        assignment[pos % folds].append(item_ids[idx])
    return [sorted(fold) for fold in assignment]


class DccaEmbedder(BaseEstimator):
    """Two-branch correlation-trained embedder over aligned chunk pairs.

    ``fit`` runs minibatch training of both convolutional branches on the
    correlation objective, then fits the final linear CCA on the training
    outputs.  Held-out chunks, when given, are scored once per epoch with
    the same full-batch statistics the training loss uses; the value before
    the first update is kept as the epoch-0 reference.
    """

    def __init__(self, config=None):
        self.config = config or TrainConfig()

    def _dtype(self):
        return np.float32 if self.config.dtype == "float32" else np.float64

    def fit(self, audio_chunks, eeg_chunks, heldout=None):
        cfg = self.config
        audio_chunks = np.asarray(audio_chunks, dtype=self._dtype())
        eeg_chunks = np.asarray(eeg_chunks, dtype=self._dtype())
        require(len(audio_chunks) == len(eeg_chunks),
                "audio and EEG chunk counts differ")
        n = len(audio_chunks)
        require(n >= 2, f"need at least 2 chunk pairs to train, got {n}")

        seeds = np.random.SeedSequence(cfg.seed).generate_state(3)
        self.audio_net_ = build_branch(AUDIO_BRANCH_TOKENS, in_channels=1,
                                       seed=int(seeds[0]), dtype=self._dtype())
        self.eeg_net_ = build_branch(EEG_BRANCH_TOKENS, in_channels=EEG_CHANNELS,
                                     seed=int(seeds[1]), dtype=self._dtype())
        shuffle_rng = np.random.default_rng(int(seeds[2]))
        params = self.audio_net_.params() + self.eeg_net_.params()
        optimizer = make_optimizer(cfg.optimizer, params,
                                   learning_rate=cfg.learning_rate,
                                   beta1=cfg.beta1, beta2=cfg.beta2,
                                   epsilon=cfg.adam_epsilon)

        self.train_history_ = []
        self.heldout_history_ = []
        self.heldout_initial_ = (self._heldout_loss(heldout)
                                 if heldout is not None else None)

        for _ in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            batch_losses = []
            for start in range(0, n, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                if len(batch) < 2:
                    warnings.warn("skipping batch with fewer than 2 chunks")
                    continue
                out_a = self.audio_net_.forward(audio_chunks[batch], train=True)
                out_e = self.eeg_net_.forward(eeg_chunks[batch], train=True)
                res = dcca_loss(out_a[:, 0, :].astype(np.float64),
                                out_e[:, 0, :].astype(np.float64),
                                reg=cfg.reg, eigen_floor=cfg.eigen_floor)
                if not np.isfinite(res.loss):
                    raise NumericError("training loss became non-finite")
                self.audio_net_.backward(res.grad_x[:, None, :])
                self.eeg_net_.backward(res.grad_y[:, None, :])
                optimizer.step(self.audio_net_.grads() + self.eeg_net_.grads())
                batch_losses.append(res.loss)
            require(batch_losses, "epoch produced no usable batches")
            self.train_history_.append(float(np.mean(batch_losses)))
            if heldout is not None:
                self.heldout_history_.append(self._heldout_loss(heldout))

        out_a = self._forward_chunks(self.audio_net_, audio_chunks, train=False)
        out_e = self._forward_chunks(self.eeg_net_, eeg_chunks, train=False)
        k = min(cfg.cca_components, EMBED_DIM, n - 1)
        self.cca_ = LinearCCA(n_components=k, reg=cfg.reg,
                              eigen_floor=cfg.eigen_floor).fit(out_a, out_e)
        return self

    def _heldout_loss(self, heldout):
        """Correlation loss on held-out pairs, full-batch statistics.

        Uses train-mode batch statistics so the epoch-0 value (before any
        running-statistics update exists) is comparable with later epochs.
        No parameter or running-statistics state is kept.
        """
        audio, eeg = heldout
        audio = np.asarray(audio, dtype=self._dtype())
        eeg = np.asarray(eeg, dtype=self._dtype())
        require(len(audio) == len(eeg) and len(audio) >= 2,
                "held-out set needs at least 2 aligned pairs")
        saved = [(bn.running_mean.copy(), bn.running_var.copy(), bn.updates)
                 for bn in self._batchnorms()]
        out_a = self.audio_net_.forward(audio, train=True)
        out_e = self.eeg_net_.forward(eeg, train=True)
        for bn, (rm, rv, updates) in zip(self._batchnorms(), saved):
            bn.running_mean[:] = rm
            bn.running_var[:] = rv
            bn.updates = updates
        res = dcca_loss(out_a[:, 0, :].astype(np.float64),
                        out_e[:, 0, :].astype(np.float64),
                        reg=self.config.reg,
                        eigen_floor=self.config.eigen_floor)
        return float(res.loss)

    def _batchnorms(self):
        from .nn import BatchNorm

        for net in (self.audio_net_, self.eeg_net_):
            for layer in net.layers:
                if isinstance(layer, BatchNorm):
                    yield layer

    def _forward_chunks(self, net, chunks, train=False, batch=16):
        outs = []
        for start in range(0, len(chunks), batch):
            out = net.forward(chunks[start:start + batch], train=train)
            outs.append(out[:, 0, :].astype(np.float64))
        return np.concatenate(outs, axis=0)

    def _require_fitted(self):
        if not hasattr(self, "cca_"):
            raise NotFittedError("DccaEmbedder instance is not fitted yet")

    def embed_audio_chunks(self, chunks):
        self._require_fitted()
        return self._forward_chunks(self.audio_net_,
                                    np.asarray(chunks, dtype=self._dtype()))

    def embed_eeg_chunks(self, chunks):
        self._require_fitted()
        return self._forward_chunks(self.eeg_net_,
                                    np.asarray(chunks, dtype=self._dtype()))


def embed_song(model, audio, preprocess=True, canonical=False):
    """Song-level embedding: mean over the embeddings of all 1.5 s chunks.

    ``model`` is a fitted :class:`DccaEmbedder`.  With ``canonical=True``
    the mean embedding is additionally projected through the view-x side of
    the final CCA.
    """
    require(audio.rate == AUDIO_RATE,
            f"audio must be sampled at {AUDIO_RATE:g} Hz, got {audio.rate:g} "
            "(resampling is out of scope)")
    require(audio.channels == 1, f"audio must be mono, got {audio.channels} channels")
    if preprocess:
        audio = preprocess_audio(audio)
    chunks = chunk_signal(audio, model.config.chunk_seconds)
    mean = model.embed_audio_chunks(chunks).mean(axis=0)
    if canonical:
        return mean, model.cca_.transform(mean[None, :], view="x")[0]
    return mean


def embed_eeg(model, eeg, preprocess=True, preprocess_config=None, canonical=False):
    """EEG-side counterpart of :func:`embed_song` (view-y branch and CCA)."""
    require(eeg.rate == EEG_RATE,
            f"EEG must be sampled at {EEG_RATE:g} Hz, got {eeg.rate:g}")
    require(eeg.channels == EEG_CHANNELS,
            f"EEG must have {EEG_CHANNELS} channels, got {eeg.channels}")
    if preprocess:
        eeg = preprocess_eeg(eeg, preprocess_config)
    chunks = chunk_signal(eeg, model.config.chunk_seconds)
    mean = model.embed_eeg_chunks(chunks).mean(axis=0)
    if canonical:
        return mean, model.cca_.transform(mean[None, :], view="y")[0]
    return mean


@dataclass
class RunResult:
    """Outcome of one fold x run training."""

    fold: int
    run: int
    seed: int
    train_item_ids: list
    test_item_ids: list
    train_history: list
    heldout_history: list
    heldout_initial: float
    model: object = None
    model_path: str = None

    @property
    def heldout_gain(self):
        """Final held-out total correlation minus the epoch-0 value."""
        return -self.heldout_history[-1] - (-self.heldout_initial)


@dataclass
class ProtocolResult:
    folds: list
    runs: list = field(default_factory=list)


def _run_seed(base_seed, fold, run):
    return int(np.random.SeedSequence((base_seed, fold, run)).generate_state(1)[0])


def _execute_run(job):
    """One fold x run training; module-level so worker processes can pickle it."""
    (fold, run, cfg, train_audio, train_eeg, test_audio, test_eeg,
     train_ids, test_ids, save_dir) = job
    run_cfg = replace(cfg, seed=_run_seed(cfg.seed, fold, run))
    model = DccaEmbedder(config=run_cfg)
    model.fit(train_audio, train_eeg, heldout=(test_audio, test_eeg))
    result = RunResult(fold=fold, run=run, seed=run_cfg.seed,
                       train_item_ids=list(train_ids),
                       test_item_ids=list(test_ids),
                       train_history=model.train_history_,
                       heldout_history=model.heldout_history_,
                       heldout_initial=model.heldout_initial_)
    if save_dir is not None:
        from .dataio import save_model

        result.model_path = str(save_model(model, save_dir, fold=fold, run=run))
    else:
        result.model = model
    return result


def run_protocol(recordings, config=None, preprocess_config=None,
                 preprocess=True, save_dir=None):
    """Train folds x runs_per_fold models per the fixed protocol.

    Recordings are preprocessed and chunked once; every run trains on the
    chunks of the recordings outside its test fold and monitors the loss on
    the test fold's chunks.  Runs are independent and may execute in worker
    processes (``config.workers``); results are always ordered by (fold, run).
    """
    cfg = config or TrainConfig()
    require(len(recordings) >= 2, "need at least 2 recordings")
    if preprocess:
        recordings = [preprocess_recording(r, preprocess_config) for r in recordings]
    chunks = {r.item_id: chunk_pair(r, cfg.chunk_seconds) for r in recordings}
    ids = [r.item_id for r in recordings]
    require(len(set(ids)) == len(ids), "duplicate recording ids")
    folds = fold_partition(ids, cfg.folds, cfg.seed)

    jobs = []
    for fold_index, test_ids in enumerate(folds):
        train_ids = [i for i in ids if i not in set(test_ids)]
        train_audio = np.concatenate([chunks[i][0] for i in train_ids])
        train_eeg = np.concatenate([chunks[i][1] for i in train_ids])
        test_audio = np.concatenate([chunks[i][0] for i in test_ids])
        test_eeg = np.concatenate([chunks[i][1] for i in test_ids])
        for run in range(cfg.runs_per_fold):
            jobs.append((fold_index, run, cfg, train_audio, train_eeg,
                         test_audio, test_eeg, train_ids, test_ids, save_dir))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_execute_run, jobs))
    else:
        runs = [_execute_run(job) for job in jobs]
    runs.sort(key=lambda r: (r.fold, r.run))
    return ProtocolResult(folds=folds, runs=runs)
