"""Command-line interface.

Exit codes: 0 success, 1 configuration/input validation error, 2 runtime
error. Log verbosity is controlled by the PCGKIT_LOG environment variable
(DEBUG, INFO, WARNING, ERROR; default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, PRESETS, load_pipeline_config
from .pipeline import (format_report, stage_cv, stage_embed_import,
                       stage_featurize, stage_ingest, stage_knn_fit,
                       stage_knn_predict, stage_preprocess, stage_segment,
                       stage_synth)
from .synth import SynthConfig

log = logging.getLogger(__name__)


def _print_stats(stats: dict) -> None:
    for key in sorted(stats):
        print(f"{key} {stats[key]}")


def _common_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON pipeline config file")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="named parameter preset")
    parser.add_argument("--out", help="run output directory")
    parser.add_argument("--sample-rate", type=int, help="target sample rate (Hz)")
    parser.add_argument("--seed", type=int, help="root random seed")


def _overrides_from(args: argparse.Namespace) -> dict:
    overrides: dict = {}

    def set_path(section: str | None, key: str, value) -> None:
        if value is None:
            return
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value

    set_path(None, "sample_rate", getattr(args, "sample_rate", None))
    set_path(None, "seed", getattr(args, "seed", None))
    set_path("data", "out_dir", getattr(args, "out", None))
    set_path("data", "manifest", getattr(args, "manifest", None))
    set_path("data", "embeddings", getattr(args, "embeddings", None))
    set_path("segment", "method", getattr(args, "method", None))
    set_path("segment", "seconds", getattr(args, "seconds", None))
    set_path("segment", "n_cycles", getattr(args, "cycles", None))
    set_path("bandpass", "low_cut", getattr(args, "low_cut", None))
    set_path("bandpass", "high_cut", getattr(args, "high_cut", None))
    set_path("bandpass", "order", getattr(args, "order", None))
    set_path("augment", "probability_each", getattr(args, "augment_prob", None))
    set_path("knn", "k", getattr(args, "k", None))
    set_path("knn", "threshold", getattr(args, "threshold", None))
    set_path("cv", "n_folds", getattr(args, "folds", None))
    set_path("cv", "aggregate", getattr(args, "aggregate", None))
    if getattr(args, "no_augment", False):
        overrides.setdefault("augment", {})["enabled"] = False
    return overrides


def _load_cfg(args: argparse.Namespace):
    return load_pipeline_config(getattr(args, "config", None),
                                getattr(args, "preset", None),
                                _overrides_from(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcgkit",
        description="Phonocardiogram preprocessing, segmentation, and "
                    "murmur-classification evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a manifest and print statistics")
    _common_config_args(p)
    p.add_argument("--manifest", help="manifest CSV path")
    p.add_argument("--include-unknown", action="store_true",
                   help="keep Unknown-labeled recordings in the statistics")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="chunk recordings into uniform blocks")
    _common_config_args(p)
    p.add_argument("--manifest", help="manifest CSV path")
    p.add_argument("--method", choices=["fixed", "cycle"])
    p.add_argument("--seconds", type=float, help="target chunk duration")
    p.add_argument("--cycles", type=int, help="cycles per chunk (cycle method)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("preprocess", help="bandpass filter and normalize")
    _common_config_args(p)
    p.add_argument("--manifest", help="process whole recordings from a manifest")
    p.add_argument("--chunks", help="process a chunk dataset (chunks.csv)")
    p.add_argument("--low-cut", type=float)
    p.add_argument("--high-cut", type=float)
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("featurize", help="pooled mel features per chunk")
    _common_config_args(p)
    p.add_argument("--chunks", required=True, help="chunk index CSV")
    p.add_argument("--mode", choices=["fixed", "cycle"],
                   help="mel parameter set; defaults to the config's values")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("embed-import", help="validate and import embeddings")
    _common_config_args(p)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_embed_import)

    p = sub.add_parser("knn", help="k-NN classifier commands")
    knn_sub = p.add_subparsers(dest="knn_command", required=True)
    pf = knn_sub.add_parser("fit", help="fit and persist a k-NN model")
    _common_config_args(pf)
    pf.add_argument("--embeddings", required=True)
    pf.add_argument("--labels", required=True, help="labels CSV (id,label)")
    pf.add_argument("--k", type=int)
    pf.add_argument("--threshold", type=float)
    pf.set_defaults(func=cmd_knn_fit)
    pp = knn_sub.add_parser("predict", help="score query embeddings")
    _common_config_args(pp)
    pp.add_argument("--model", required=True)
    pp.add_argument("--queries", required=True)
    pp.set_defaults(func=cmd_knn_predict)

    p = sub.add_parser("cv", help="cross-validated evaluation")
    cv_sub = p.add_subparsers(dest="cv_command", required=True)
    pr = cv_sub.add_parser("run", help="run the pipeline under patient-wise CV")
    _common_config_args(pr)
    pr.add_argument("--manifest")
    pr.add_argument("--embeddings", help="external embedding CSV")
    pr.add_argument("--method", choices=["fixed", "cycle"])
    pr.add_argument("--seconds", type=float)
    pr.add_argument("--cycles", type=int)
    pr.add_argument("--low-cut", type=float)
    pr.add_argument("--high-cut", type=float)
    pr.add_argument("--order", type=int)
    pr.add_argument("--k", type=int)
    pr.add_argument("--threshold", type=float)
    pr.add_argument("--folds", type=int)
    pr.add_argument("--aggregate",
                    choices=["per-chunk", "per-recording-mean-score"])
    pr.add_argument("--augment-prob", type=float)
    pr.add_argument("--no-augment", action="store_true",
                    help="disable augmentation entirely")
    pr.set_defaults(func=cmd_cv_run)

    p = sub.add_parser("synth", help="synthetic dataset generation")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)
    pg = synth_sub.add_parser("generate", help="write a synthetic dataset")
    _common_config_args(pg)
    pg.add_argument("--patients", type=int, required=True)
    pg.add_argument("--recordings-per-patient", type=int, default=1)
    pg.add_argument("--positive-frac", type=float, default=0.2)
    pg.add_argument("--coverage", type=float, default=1.0,
                    help="fraction of cycles carrying annotations")
    pg.add_argument("--snr", type=float, default=20.0,
                    help="murmur SNR over the noise floor (dB)")
    pg.add_argument("--noise-floor", type=float, default=-50.0)
    pg.add_argument("--duration", type=float, default=30.0)
    pg.add_argument("--bpm", type=float, default=75.0)
    pg.add_argument("--jitter", type=float, default=0.05)
    pg.set_defaults(func=cmd_synth_generate)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def cmd_ingest(args) -> int:
    cfg = _load_cfg(args)
    _print_stats(stage_ingest(cfg, exclude_unknown=not args.include_unknown))
    return 0


def cmd_segment(args) -> int:
    cfg = _load_cfg(args)
    _print_stats(stage_segment(cfg))
    return 0


def cmd_preprocess(args) -> int:
    cfg = _load_cfg(args)
    if args.chunks and args.manifest:
        raise ConfigError("pass either --chunks or --manifest, not both")
    chunks = Path(args.chunks) if args.chunks else None
    if chunks is not None and not chunks.exists():
        raise ConfigError(f"chunk index not found: {chunks}")
    _print_stats(stage_preprocess(cfg, chunks))
    return 0


def cmd_featurize(args) -> int:
    cfg = _load_cfg(args)
    chunks = Path(args.chunks)
    if not chunks.exists():
        raise ConfigError(f"chunk index not found: {chunks}")
    _print_stats(stage_featurize(cfg, chunks, args.mode))
    return 0


def cmd_embed_import(args) -> int:
    cfg = _load_cfg(args)
    src = Path(args.embeddings)
    if not src.exists():
        raise ConfigError(f"embedding file not found: {src}")
    _print_stats(stage_embed_import(cfg, src))
    return 0


def cmd_knn_fit(args) -> int:
    cfg = _load_cfg(args)
    emb, labels = Path(args.embeddings), Path(args.labels)
    for path in (emb, labels):
        if not path.exists():
            raise ConfigError(f"input not found: {path}")
    _print_stats(stage_knn_fit(cfg, emb, labels))
    return 0


def cmd_knn_predict(args) -> int:
    cfg = _load_cfg(args)
    model, queries = Path(args.model), Path(args.queries)
    for path in (model, queries):
        if not path.exists():
            raise ConfigError(f"input not found: {path}")
    _print_stats(stage_knn_predict(cfg, model, queries))
    return 0


def cmd_cv_run(args) -> int:
    cfg = _load_cfg(args)
    result = stage_cv(cfg)
    print(format_report(Path(cfg.data.out_dir)))
    if result.auroc_folds_skipped:
        log.warning("AUROC missing in %d fold(s)", result.auroc_folds_skipped)
    return 0


def cmd_synth_generate(args) -> int:
    cfg = _load_cfg(args)
    template = SynthConfig(
        sample_rate=args.sample_rate or 4000,
        duration=args.duration,
        heart_rate_bpm=args.bpm,
        heart_rate_jitter=args.jitter,
        murmur_snr_db=args.snr,
        annotation_coverage=args.coverage,
        noise_floor_db=args.noise_floor,
        seed=args.seed if args.seed is not None else 0,
    )
    _print_stats(stage_synth(cfg, args.patients, args.recordings_per_patient,
                             args.positive_frac, template))
    return 0


def cmd_report(args) -> int:
    print(format_report(Path(args.run_dir)))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("PCGKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("stage failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
