"""Command-line surface: synth, preprocess, train, embed, retrieve, eval.

Every command reads an optional experiment config plus flags, produces
deterministic outputs and writes a machine-readable run log (seed, config
hash, metrics).  Exit codes: 0 ok, 1 usage, 2 runtime failure.
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, pipeline, retrieval, synth
from .config import ExperimentConfig, config_hash, load_config, save_config
from .validation import NumericError, ValidationError


def _load_experiment(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = ExperimentConfig(seed=args.seed, preprocess=cfg.preprocess,
                               train=cfg.train, retrieval=cfg.retrieval,
                               synth=cfg.synth)
    return cfg


def _write_runlog(out_dir, command, cfg, metrics, outputs):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "runlog.json"
    dataio.write_json(path, {
        "command": command,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "metrics": metrics,
        "outputs": outputs,
    })
    return path


def cmd_synth(args):
    cfg = _load_experiment(args)
    spec = cfg.synth
    if args.items is not None:
        spec = replace(spec, n_items=args.items)
    if args.duration is not None:
        spec = replace(spec, duration=args.duration)
    if args.noise_sigma is not None:
        spec = replace(spec, noise_sigma=args.noise_sigma)
    recordings, _ = synth.generate(spec)
    manifest = dataio.save_dataset(recordings, args.out)
    save_config(cfg, Path(args.out) / "config.ini")
    _write_runlog(args.out, "synth", cfg,
                  {"n_items": spec.n_items, "duration": spec.duration,
                   "noise_sigma": spec.noise_sigma},
                  {"manifest": str(manifest)})
    print(f"wrote {spec.n_items} paired items to {args.out}")
    return 0


def cmd_preprocess(args):
    cfg = _load_experiment(args)
    recordings = dataio.load_recordings(args.manifest)
    processed = [pipeline.preprocess_recording(r, cfg.preprocess)
                 for r in recordings]
    manifest = dataio.save_dataset(processed, args.out, encoding="float32")
    _write_runlog(args.out, "preprocess", cfg,
                  {"n_items": len(processed)}, {"manifest": str(manifest)})
    print(f"preprocessed {len(processed)} recordings into {args.out}")
    return 0


def cmd_train(args):
    cfg = _load_experiment(args)
    recordings = dataio.load_recordings(args.manifest)
    started = time.time()
    result = pipeline.run_protocol(recordings, config=cfg.train,
                                   preprocess_config=cfg.preprocess,
                                   preprocess=not args.no_preprocess,
                                   save_dir=args.out)
    gains = [r.heldout_gain for r in result.runs]
    final_losses = [r.train_history[-1] for r in result.runs]
    metrics = {
        "runs": len(result.runs),
        "folds": [list(f) for f in result.folds],
        "heldout_gains": gains,
        "runs_improved": int(sum(g > 0 for g in gains)),
        "final_train_loss": final_losses,
        "wall_seconds": time.time() - started,
    }
    _write_runlog(args.out, "train", cfg, metrics,
                  {"models": [r.model_path for r in result.runs]})
    print(f"trained {len(result.runs)} models; held-out total correlation "
          f"improved in {metrics['runs_improved']}/{len(result.runs)} runs")
    return 0


def cmd_embed(args):
    cfg = _load_experiment(args)
    model = dataio.load_model(args.model)
    out_rows = []
    ids = []
    for wav in args.audio:
        sig = dataio.read_wav(wav)
        emb = pipeline.embed_song(model, sig)
        out_rows.append(emb)
        ids.append(Path(wav).stem)
    table = retrieval.FeatureTable(ids=ids, class_labels=["0"] * len(ids),
                                   vectors=np.asarray(out_rows))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_feature_table(out / "embeddings.csv", table)
    _write_runlog(out, "embed", cfg, {"n_songs": len(ids)},
                  {"embeddings": str(out / "embeddings.csv")})
    print(f"embedded {len(ids)} songs -> {out / 'embeddings.csv'}")
    return 0


def cmd_retrieve(args):
    cfg = _load_experiment(args)
    view_a = dataio.read_feature_table(args.view_a)
    view_b = dataio.read_feature_table(args.view_b)
    model = retrieval.RetrievalModel(config=cfg.retrieval).fit(view_a, view_b)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    canon_a = retrieval.FeatureTable(view_a.ids, view_a.class_labels,
                                     model.canonical(view_a.vectors, "a"))
    canon_b = retrieval.FeatureTable(view_b.ids, view_b.class_labels,
                                     model.canonical(view_b.vectors, "b"))
    dataio.write_feature_table(out / "canonical_a.csv", canon_a)
    dataio.write_feature_table(out / "canonical_b.csv", canon_b)
    metrics = {"final_loss": model.loss_history_[-1],
               "canonical_k": int(model.cca_.n_components)}
    _write_runlog(out, "retrieve", cfg, metrics,
                  {"canonical_a": str(out / "canonical_a.csv"),
                   "canonical_b": str(out / "canonical_b.csv")})
    print(f"trained retrieval model; canonical projections in {out}")
    return 0


def cmd_eval(args):
    cfg = _load_experiment(args)
    view_a = dataio.read_feature_table(args.view_a)
    view_b = dataio.read_feature_table(args.view_b)
    model = retrieval.RetrievalModel(config=cfg.retrieval).fit(view_a, view_b)
    report = retrieval.mrr_report(model, view_a, view_b, seed=cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_json(out / "mrr_report.json", report)
    _write_runlog(out, "eval", cfg, report,
                  {"report": str(out / "mrr_report.json")})
    print("instance MRR a->b {:.4f} b->a {:.4f} | class MRR a->b {:.4f} "
          "b->a {:.4f}".format(report["instance_mrr_a_to_b"],
                               report["instance_mrr_b_to_a"],
                               report["class_mrr_a_to_b"],
                               report["class_mrr_b_to_a"]))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="audioeeg",
        description="Audio-EEG correlated embeddings and cross-modal retrieval")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config (.ini)")
        p.add_argument("--seed", type=int, help="override the master seed")

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--items", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="filter + denoise a dataset")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="run the folds x runs training protocol")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-preprocess", action="store_true",
                   help="feed signals to the branches as-is")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="song-level embeddings from a trained model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("audio", nargs="+", help="22050 Hz mono WAV files")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("retrieve", help="train the cross-modal retrieval model")
    common(p)
    p.add_argument("--view-a", required=True, dest="view_a")
    p.add_argument("--view-b", required=True, dest="view_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="instance/class MRR report for two views")
    common(p)
    p.add_argument("--view-a", required=True, dest="view_a")
    p.add_argument("--view-b", required=True, dest="view_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValidationError, NumericError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
