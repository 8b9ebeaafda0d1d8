"""File formats: WAV audio, CSV EEG, feature tables, manifests, model dirs.

All writes go through a temp-file + rename so partially written artifacts
never appear under their final name.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .retrieval import FeatureTable
from .signal import Recording, SignalBuffer
from .validation import ValidationError, require

AUDIO_RATE = 22050
EEG_RATE = 250.0
EEG_COLUMNS = 16
PCM16_SCALE = 32768.0


def atomic_write_bytes(path, payload):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text):
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, payload):
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True)
                             + "\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_wav(path, expected_rate=AUDIO_RATE):
    """Mono PCM16 or float32 WAV at the expected rate -> SignalBuffer.

    No silent resampling or channel mixing: anything else is rejected with a
    message naming the constraint.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValidationError(f"{path}: not a readable RIFF/WAVE file ({exc})")
    if data.ndim != 1:
        raise ValidationError(f"{path}: expected mono audio, file has "
                              f"{data.shape[1]} channels")
    if rate != expected_rate:
        raise ValidationError(f"{path}: expected {expected_rate} Hz audio, "
                              f"file is {rate} Hz (resampling is out of scope)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValidationError(f"{path}: unsupported sample format {data.dtype}; "
                              "use 16-bit PCM or 32-bit float")
    return SignalBuffer(samples[None, :], float(rate))


def write_wav(path, sig, encoding="pcm16"):
    require(sig.channels == 1, "WAV writer handles mono signals only")
    require(encoding in ("pcm16", "float32"), f"unknown encoding {encoding!r}")
    data = sig.data[0]
    if encoding == "pcm16":
        scaled = np.clip(np.round(data * PCM16_SCALE), -32768, 32767)
        payload = scaled.astype("<i2")
    else:
        payload = data.astype("<f4")
    buf = io.BytesIO()
    wavfile.write(buf, int(sig.rate), payload)
    return atomic_write_bytes(path, buf.getvalue())


def read_eeg_csv(path, rate=EEG_RATE, columns=EEG_COLUMNS):
    """16-column delimiter-separated samples -> SignalBuffer (rate fixed).

    A non-numeric first row is treated as a header; non-numeric cells
    elsewhere are parse errors reported with their row and column.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != columns:
                raise ValidationError(f"{path}:{line_no}: expected {columns} "
                                      f"columns, found {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(i for i, cell in enumerate(row, start=1)
                           if not _is_number(cell))
                if line_no == 1:
                    continue  # header row
                raise ValidationError(f"{path}:{line_no}: column {bad} is not "
                                      "numeric")
    require(rows, f"{path}: no data rows")
    return SignalBuffer(np.asarray(rows, dtype=np.float64).T, rate)


def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_eeg_csv(path, sig, header=True):
    require(sig.channels == EEG_COLUMNS,
            f"EEG writer expects {EEG_COLUMNS} channels, got {sig.channels}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow([f"ch{c:02d}" for c in range(sig.channels)])
    for row in sig.data.T:
        writer.writerow([repr(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_feature_table(path):
    """CSV with header id,class,v0..v{d-1} -> FeatureTable."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        require(header is not None and len(header) >= 3
                and header[0] == "id" and header[1] == "class",
                f"{path}: expected header 'id,class,v0..'")
        ids, labels, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            require(len(row) == len(header),
                    f"{path}:{line_no}: expected {len(header)} columns, "
                    f"found {len(row)}")
            ids.append(row[0])
            labels.append(row[1])
            try:
                rows.append([float(c) for c in row[2:]])
            except ValueError:
                raise ValidationError(f"{path}:{line_no}: non-numeric feature value")
    require(rows, f"{path}: no data rows")
    return FeatureTable(ids=ids, class_labels=labels,
                        vectors=np.asarray(rows, dtype=np.float64))


def write_feature_table(path, table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "class"] + [f"v{i}" for i in range(table.dim)])
    for i, (item_id, label) in enumerate(zip(table.ids, table.class_labels)):
        writer.writerow([item_id, label] + [repr(v) for v in table.vectors[i]])
    return atomic_write_text(path, buf.getvalue())


MANIFEST_FIELDS = ["audio_path", "eeg_path", "subject_id", "class_label"]


def write_manifest(path, records):
    """records: list of dicts with the manifest fields (paths noted as given)."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: rec[k] for k in MANIFEST_FIELDS})
    return atomic_write_text(path, buf.getvalue())


def read_manifest(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        require(reader.fieldnames == MANIFEST_FIELDS,
                f"{path}: expected header {','.join(MANIFEST_FIELDS)}")
        return list(reader)


def load_recordings(manifest_path):
    """Read every record of a manifest into memory as Recordings."""
    base = Path(manifest_path).parent
    recordings = []
    for rec in read_manifest(manifest_path):
        audio = read_wav(base / rec["audio_path"])
        eeg = read_eeg_csv(base / rec["eeg_path"])
        recordings.append(Recording(item_id=Path(rec["audio_path"]).stem,
                                    audio=audio, eeg=eeg,
                                    class_label=rec["class_label"],
                                    subject_id=rec["subject_id"]))
    return recordings


def save_dataset(recordings, out_dir, encoding="pcm16"):
    """Write WAV + CSV pairs plus the manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in recordings:
        wav_name = f"{rec.item_id}.wav"
        csv_name = f"{rec.item_id}.csv"
        write_wav(out / wav_name, rec.audio, encoding=encoding)
        write_eeg_csv(out / csv_name, rec.eeg)
        entries.append({"audio_path": wav_name, "eeg_path": csv_name,
                        "subject_id": rec.subject_id,
                        "class_label": rec.class_label})
    return write_manifest(out / "manifest.csv", entries)


# --- trained model persistence -------------------------------------------

def save_cca(model, bin_path, json_path):
    arrays = [model.mean_x_, model.mean_y_, model.proj_x_, model.proj_y_,
              model.correlations_]
    blob = b"".join(a.astype("<f8").tobytes() for a in arrays)
    atomic_write_bytes(bin_path, blob)
    write_json(json_path, {
        "n_components": int(model.n_components),
        "reg": model.reg,
        "eigen_floor": model.eigen_floor,
        "shapes": [list(a.shape) for a in arrays],
    })


def load_cca(bin_path, json_path):
    from .linalg import LinearCCA

    meta = read_json(json_path)
    raw = np.fromfile(bin_path, dtype="<f8")
    shapes = [tuple(s) for s in meta["shapes"]]
    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(raw[offset:offset + size].reshape(shape).copy())
        offset += size
    require(offset == raw.size, f"{bin_path}: blob size mismatch")
    model = LinearCCA(n_components=meta["n_components"], reg=meta["reg"],
                      eigen_floor=meta["eigen_floor"])
    (model.mean_x_, model.mean_y_, model.proj_x_, model.proj_y_,
     model.correlations_) = arrays
    return model


def save_model(model, out_dir, fold=None, run=None):
    """Persist a fitted DccaEmbedder as a directory of blobs + manifest."""
    from dataclasses import asdict

    out = Path(out_dir)
    if fold is not None:
        out = out / f"fold{fold}_run{run}"
    out.mkdir(parents=True, exist_ok=True)
    model.audio_net_.save_params(out / "audio_params.bin", out / "audio_params.json")
    model.eeg_net_.save_params(out / "eeg_params.bin", out / "eeg_params.json")
    save_cca(model.cca_, out / "cca.bin", out / "cca.json")
    write_json(out / "model.json", {
        "config": asdict(model.config),
        "fold": fold,
        "run": run,
        "train_history": model.train_history_,
        "heldout_history": model.heldout_history_,
        "heldout_initial": model.heldout_initial_,
    })
    return out


def load_model(model_dir):
    from .nn import build_branch
    from .pipeline import (AUDIO_BRANCH_TOKENS, EEG_BRANCH_TOKENS,
                           EEG_CHANNELS, DccaEmbedder, TrainConfig)

    model_dir = Path(model_dir)
    meta = read_json(model_dir / "model.json")
    config = TrainConfig(**meta["config"])
    model = DccaEmbedder(config=config)
    dtype = np.float32 if config.dtype == "float32" else np.float64
    seeds = np.random.SeedSequence(config.seed).generate_state(3)
    model.audio_net_ = build_branch(AUDIO_BRANCH_TOKENS, in_channels=1,
                                    seed=int(seeds[0]), dtype=dtype)
    model.eeg_net_ = build_branch(EEG_BRANCH_TOKENS, in_channels=EEG_CHANNELS,
                                  seed=int(seeds[1]), dtype=dtype)
    model.audio_net_.load_params(model_dir / "audio_params.bin",
                                 model_dir / "audio_params.json")
    model.eeg_net_.load_params(model_dir / "eeg_params.bin",
                               model_dir / "eeg_params.json")
    model.cca_ = load_cca(model_dir / "cca.bin", model_dir / "cca.json")
    model.train_history_ = meta["train_history"]
    model.heldout_history_ = meta["heldout_history"]
    model.heldout_initial_ = meta["heldout_initial"]
    return model
