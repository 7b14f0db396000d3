"""Pipeline stages behind the CLI: ingest, segment, preprocess, featurize,
embedding import, k-NN fit/predict, cross-validated evaluation, report.

Every stage writes its artifacts plus a JSON run-record (config hash, root
seed, input digests) into the run directory. Writes go through a temp file
and rename, and no timestamps are recorded, so rerunning a stage with
unchanged inputs reproduces byte-identical outputs.

Stage artifacts form a "chunk dataset" convention: an index CSV
(chunk_id,recording_id,patient_id,method,start_s,end_s,padded) next to a
``chunks/`` directory holding one WAV per chunk, plus a ``labels.csv``
(id,label) when the manifest provides labels.
"""

from __future__ import annotations

import csv
import hashlib
import io as _stdio
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import io as pcgio
from .augment import AugmentConfig, augment_chunk, augment_spectrogram, chunk_rng
from .classifier import (KnnConfig, KnnModel, knn_fit, knn_predict)
from .config import PipelineConfig
from .evaluation import (Aggregate, CvResult, EvalItem, make_folds,
                         permute_patient_labels, run_cv)
from .features import FeatureConfig, mel_spectrogram, pool_features
from .preprocess import (BandpassSpec, design_bandpass, filter_zero_phase,
                         minmax_normalize)
from .segment import Chunk, SegmentConfig, SegmentMethod, chunk_cycles, chunk_fixed
from .synth import SynthConfig, generate_dataset

log = logging.getLogger(__name__)

CHUNK_INDEX_COLUMNS = ("chunk_id", "recording_id", "patient_id", "method",
                       "start_s", "end_s", "padded")


# ---------------------------------------------------------------------------
# small infrastructure


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_run_record(out_dir: Path, command: str, cfg: PipelineConfig,
                     inputs: dict[str, Path], outputs: list[str]) -> Path:
    record = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "inputs": {name: sha256_file(Path(p)) for name, p in sorted(inputs.items())},
        "outputs": sorted(outputs),
    }
    path = out_dir / f"run_record_{command.replace(' ', '_')}.json"
    atomic_write_text(path, json.dumps(record, sort_keys=True, indent=2) + "\n")
    return path


def _resolve(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _manifest_path(cfg: PipelineConfig) -> Path:
    if not cfg.data.manifest:
        raise ValueError("data.manifest: no manifest configured")
    path = Path(cfg.data.manifest)
    if not path.exists():
        raise ValueError(f"data.manifest: file not found: {path}")
    return path


def _load_recording(meta: pcgio.RecordingMeta, base: Path,
                    target_sr: int) -> pcgio.Waveform:
    w = pcgio.load_wav(_resolve(base, meta.wav_path))
    if w.sample_rate != target_sr:
        w = pcgio.resample(w, target_sr)
    return w


def _segment_config(cfg: PipelineConfig) -> SegmentConfig:
    method = SegmentMethod(cfg.segment.method)
    return SegmentConfig(method=method, seconds=cfg.segment.seconds,
                         sample_rate=cfg.sample_rate,
                         n_cycles=cfg.segment.n_cycles)


def _feature_config(cfg: PipelineConfig) -> FeatureConfig:
    return FeatureConfig(sample_rate=cfg.sample_rate,
                         n_mels=cfg.features.n_mels,
                         fft_size=cfg.features.fft_size,
                         hop_length=cfg.features.hop_length,
                         log_floor_db=cfg.features.log_floor_db)


def _augment_config(cfg: PipelineConfig) -> AugmentConfig:
    return AugmentConfig(probability_each=cfg.augment.probability_each,
                         max_mute_fraction=cfg.augment.max_mute_fraction,
                         max_semitones=cfg.augment.max_semitones,
                         max_mask_area_fraction=cfg.augment.max_mask_area_fraction,
                         seed=cfg.seed)


def _chunk_recording(meta: pcgio.RecordingMeta, base: Path, cfg: PipelineConfig,
                     seg_cfg: SegmentConfig) -> list[Chunk] | None:
    """Chunk one recording; None means skipped (cycle mode, no seg track)."""
    if seg_cfg.method is SegmentMethod.CYCLE:
        if not meta.seg_path or not _resolve(base, meta.seg_path).exists():
            return None
        track = pcgio.load_segmentation(_resolve(base, meta.seg_path))
        onsets = pcgio.extract_s1_onsets(track)
        w = _load_recording(meta, base, cfg.sample_rate)
        return chunk_cycles(w, onsets, seg_cfg, meta.recording_id, meta.patient_id)
    w = _load_recording(meta, base, cfg.sample_rate)
    return chunk_fixed(w, seg_cfg, meta.recording_id, meta.patient_id)


# ---------------------------------------------------------------------------
# ingest


def _complete_cycles(track: pcgio.SegmentationTrack) -> tuple[int, float]:
    """Count labeled complete S1-to-S1 cycles and their summed duration.

    A cycle counts when two successive S1 intervals are joined by a
    contiguous run of annotated (non-zero-state) intervals.
    """
    ivs = track.intervals
    s1_positions = [i for i, iv in enumerate(ivs) if iv.state == 1]
    count = 0
    span = 0.0
    for a, b in zip(s1_positions, s1_positions[1:]):
        contiguous = all(
            ivs[k].state != 0 and abs(ivs[k].offset - ivs[k + 1].onset) < 1e-9
            for k in range(a, b))
        if contiguous:
            count += 1
            span += ivs[b].onset - ivs[a].onset
    return count, span


def stage_ingest(cfg: PipelineConfig, exclude_unknown: bool = True) -> dict:
    """Validate the manifest and compute dataset statistics."""
    manifest = _manifest_path(cfg)
    base = manifest.parent
    all_rows = pcgio.load_manifest(manifest, exclude_unknown=False)
    usable = [r for r in all_rows if r.label is not pcgio.Label.UNKNOWN] \
        if exclude_unknown else all_rows
    stats = {
        "recordings_total": len(all_rows),
        "excluded_unknown": sum(r.label is pcgio.Label.UNKNOWN for r in all_rows),
        "recordings_usable": len(usable),
        "label_present": sum(r.label is pcgio.Label.PRESENT for r in usable),
        "label_absent": sum(r.label is pcgio.Label.ABSENT for r in usable),
        "patients": len({r.patient_id for r in usable}),
    }
    with_seg = [r for r in usable
                if r.seg_path and _resolve(base, r.seg_path).exists()]
    if with_seg:
        total_cycles = 0
        annotated_samples = 0
        total_samples = 0
        for meta in usable:
            wav_path = _resolve(base, meta.wav_path)
            if not wav_path.exists():
                continue
            w = pcgio.load_wav(wav_path)
            total_samples += len(w.samples)
            if meta in with_seg:
                track = pcgio.load_segmentation(_resolve(base, meta.seg_path))
                count, span = _complete_cycles(track)
                total_cycles += count
                annotated_samples += int(round(span * w.sample_rate))
        stats["s1_cycles_labeled"] = total_cycles
        stats["cycles_per_recording"] = (total_cycles / len(usable)
                                         if usable else 0.0)
        stats["usable_sample_fraction"] = (annotated_samples / total_samples
                                           if total_samples else 0.0)
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "ingest.json",
                      json.dumps(stats, sort_keys=True, indent=2) + "\n")
    write_run_record(out_dir, "ingest", cfg, {"manifest": manifest},
                     ["ingest.json"])
    return stats


# ---------------------------------------------------------------------------
# segment


def stage_segment(cfg: PipelineConfig) -> dict:
    """Chunk every usable recording; write chunk WAVs, index, labels."""
    manifest = _manifest_path(cfg)
    base = manifest.parent
    metas = pcgio.load_manifest(manifest)
    seg_cfg = _segment_config(cfg)
    out_dir = Path(cfg.data.out_dir)
    chunk_dir = out_dir / "chunks"
    chunk_dir.mkdir(parents=True, exist_ok=True)

    index_rows = []
    label_rows = []
    skipped = 0
    n_chunks = 0
    for meta in metas:
        chunks = _chunk_recording(meta, base, cfg, seg_cfg)
        if chunks is None:
            log.warning("%s: no segmentation track; skipped in cycle mode",
                        meta.recording_id)
            skipped += 1
            continue
        for chunk in chunks:
            pcgio.save_wav(chunk_dir / f"{chunk.chunk_id}.wav",
                           pcgio.Waveform(chunk.samples, cfg.sample_rate))
            index_rows.append([chunk.chunk_id, chunk.recording_id,
                               chunk.patient_id, chunk.method.value,
                               f"{chunk.source_span[0]:.6f}",
                               f"{chunk.source_span[1]:.6f}",
                               str(int(chunk.padded))])
            label_rows.append([chunk.chunk_id,
                               str(int(meta.label is pcgio.Label.PRESENT))])
            n_chunks += 1

    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CHUNK_INDEX_COLUMNS)
    writer.writerows(index_rows)
    atomic_write_text(out_dir / "chunks.csv", buf.getvalue())
    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "label"])
    writer.writerows(label_rows)
    atomic_write_text(out_dir / "labels.csv", buf.getvalue())
    write_run_record(out_dir, "segment", cfg, {"manifest": manifest},
                     ["chunks.csv", "labels.csv", "chunks/"])
    return {"recordings": len(metas), "chunks": n_chunks,
            "skipped_missing_seg": skipped}


def load_chunk_index(index_csv: Path) -> list[dict]:
    with open(index_csv, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CHUNK_INDEX_COLUMNS:
            raise ValueError(f"{index_csv}: bad chunk index header {header!r}")
        return [dict(zip(CHUNK_INDEX_COLUMNS, row)) for row in reader]


def load_labels_csv(path: Path) -> dict[str, int]:
    labels: dict[str, int] = {}
    tokens = {"0": 0, "1": 1, "Absent": 0, "Present": 1}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["id", "label"]:
            raise ValueError(f"{path}: bad labels header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{path} line {line_no}: expected 2 columns")
            if row[1] not in tokens:
                raise ValueError(f"{path} line {line_no}: bad label {row[1]!r}")
            if row[0] in labels:
                raise ValueError(f"{path} line {line_no}: duplicate id {row[0]!r}")
            labels[row[0]] = tokens[row[1]]
    return labels


# ---------------------------------------------------------------------------
# preprocess


def stage_preprocess(cfg: PipelineConfig, chunks_csv: Path | None = None) -> dict:
    """Bandpass-filter and min-max normalize either a chunk dataset or the
    manifest's whole recordings."""
    coeffs = design_bandpass(BandpassSpec(cfg.sample_rate, cfg.bandpass.low_cut,
                                          cfg.bandpass.high_cut,
                                          cfg.bandpass.order))
    out_dir = Path(cfg.data.out_dir)
    processed = 0
    if chunks_csv is not None:
        rows = load_chunk_index(chunks_csv)
        src_dir = chunks_csv.parent / "chunks"
        dst_dir = out_dir / "chunks"
        dst_dir.mkdir(parents=True, exist_ok=True)
        for row in rows:
            w = pcgio.load_wav(src_dir / f"{row['chunk_id']}.wav")
            w = minmax_normalize(filter_zero_phase(coeffs, w))
            pcgio.save_wav(dst_dir / f"{row['chunk_id']}.wav", w)
            processed += 1
        buf = _stdio.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CHUNK_INDEX_COLUMNS)
        writer.writerows([[row[c] for c in CHUNK_INDEX_COLUMNS] for row in rows])
        atomic_write_text(out_dir / "chunks.csv", buf.getvalue())
        labels_src = chunks_csv.parent / "labels.csv"
        if labels_src.exists():
            atomic_write_text(out_dir / "labels.csv", labels_src.read_text())
        write_run_record(out_dir, "preprocess", cfg, {"chunks": chunks_csv},
                         ["chunks.csv", "chunks/"])
    else:
        manifest = _manifest_path(cfg)
        base = manifest.parent
        metas = pcgio.load_manifest(manifest)
        wav_dir = out_dir / "wav"
        wav_dir.mkdir(parents=True, exist_ok=True)
        new_metas = []
        for meta in metas:
            w = _load_recording(meta, base, cfg.sample_rate)
            w = minmax_normalize(filter_zero_phase(coeffs, w))
            pcgio.save_wav(wav_dir / f"{meta.recording_id}.wav", w)
            seg = meta.seg_path
            if seg and not Path(seg).is_absolute():
                seg = str(_resolve(base, seg))
            new_metas.append(pcgio.RecordingMeta(
                meta.recording_id, meta.patient_id,
                f"wav/{meta.recording_id}.wav", seg, meta.label,
                meta.age_group, meta.sex))
            processed += 1
        pcgio.save_manifest(out_dir / "manifest.csv", new_metas)
        write_run_record(out_dir, "preprocess", cfg, {"manifest": manifest},
                         ["manifest.csv", "wav/"])
    return {"processed": processed}


# ---------------------------------------------------------------------------
# featurize


def stage_featurize(cfg: PipelineConfig, chunks_csv: Path,
                    mode: str | None = None) -> dict:
    """Pooled mel features for every chunk, written in the embedding format."""
    rows = load_chunk_index(chunks_csv)
    src_dir = chunks_csv.parent / "chunks"
    if mode is None:
        feat_cfg = _feature_config(cfg)
    elif mode == "fixed":
        feat_cfg = FeatureConfig.fixed_mode(cfg.sample_rate)
    elif mode == "cycle":
        feat_cfg = FeatureConfig.cycle_mode(cfg.sample_rate)
    else:
        raise ValueError(f"unknown featurize mode {mode!r}")
    embeddings = []
    for row in rows:
        w = pcgio.load_wav(src_dir / f"{row['chunk_id']}.wav")
        spect = mel_spectrogram(w, feat_cfg)
        embeddings.append(pcgio.Embedding(
            row["chunk_id"], pool_features(spect, row["chunk_id"]).vector))
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pcgio.save_embeddings(out_dir / "features.csv", embeddings)
    write_run_record(out_dir, "featurize", cfg, {"chunks": chunks_csv},
                     ["features.csv"])
    return {"features": len(embeddings),
            "dimension": len(embeddings[0].vector) if embeddings else 0}


def stage_embed_import(cfg: PipelineConfig, embeddings_csv: Path) -> dict:
    """Validate an external embedding file and copy it into the run dir."""
    embeddings = pcgio.load_embeddings(embeddings_csv)
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pcgio.save_embeddings(out_dir / "embeddings.csv", embeddings)
    write_run_record(out_dir, "embed-import", cfg,
                     {"embeddings": embeddings_csv}, ["embeddings.csv"])
    return {"embeddings": len(embeddings),
            "dimension": len(embeddings[0].vector) if embeddings else 0}


# ---------------------------------------------------------------------------
# k-NN model persistence


def save_knn_model(path: Path, model: KnnModel, cfg: KnnConfig) -> None:
    buf = _stdio.StringIO()
    buf.write(f"#pcgkit-knn k={cfg.k} threshold={cfg.threshold!r} "
              f"metric={cfg.metric.value} weighting={cfg.weighting.value}\n")
    writer = csv.writer(buf)
    writer.writerow(["id", "label"] + [f"v{i}" for i in range(model.dim)])
    for i in range(len(model)):
        writer.writerow([model.ids[i], int(model.labels[i])]
                        + [repr(float(v)) for v in model.vectors[i]])
    atomic_write_text(path, buf.getvalue())


def load_knn_model(path: Path) -> tuple[KnnModel, KnnConfig]:
    with open(path, newline="") as fh:
        header_line = fh.readline().strip()
        if not header_line.startswith("#pcgkit-knn "):
            raise ValueError(f"{path}: not a pcgkit k-NN model file")
        fields = dict(part.split("=", 1) for part in header_line.split()[1:])
        cfg = KnnConfig(k=int(fields["k"]), threshold=float(fields["threshold"]))
        reader = csv.reader(fh)
        columns = next(reader)
        dim = len(columns) - 2
        ids, labels, vectors = [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]))
            vectors.append([float(v) for v in row[2:]])
    vec = np.asarray(vectors)
    if vec.shape != (len(ids), dim):
        raise ValueError(f"{path}: inconsistent vector dimensions")
    return KnnModel(vec, np.asarray(labels), tuple(ids)), cfg


def stage_knn_fit(cfg: PipelineConfig, embeddings_csv: Path,
                  labels_csv: Path) -> dict:
    embeddings = pcgio.load_embeddings(embeddings_csv)
    labels = load_labels_csv(labels_csv)
    knn_cfg = KnnConfig(k=cfg.knn.k, threshold=cfg.knn.threshold)
    model = knn_fit(embeddings, labels, knn_cfg)
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_knn_model(out_dir / "model.csv", model, knn_cfg)
    write_run_record(out_dir, "knn fit", cfg,
                     {"embeddings": embeddings_csv, "labels": labels_csv},
                     ["model.csv"])
    return {"points": len(model), "dimension": model.dim}


def stage_knn_predict(cfg: PipelineConfig, model_csv: Path,
                      queries_csv: Path) -> dict:
    model, knn_cfg = load_knn_model(model_csv)
    queries = pcgio.load_embeddings(queries_csv)
    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "score", "label"])
    for q in queries:
        pred = knn_predict(model, q.vector, knn_cfg, q.id)
        writer.writerow([pred.id, repr(pred.score), pred.label])
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "predictions.csv", buf.getvalue())
    write_run_record(out_dir, "knn predict", cfg,
                     {"model": model_csv, "queries": queries_csv},
                     ["predictions.csv"])
    return {"predictions": len(queries)}


# ---------------------------------------------------------------------------
# cross-validated evaluation


def build_eval_items(cfg: PipelineConfig) -> tuple[list[EvalItem],
                                                   np.ndarray | None, dict]:
    """Run the in-memory chain (load, resample, chunk, filter, normalize,
    featurize or embed) and return evaluation items.

    Returns (items, train_vectors, stats). train_vectors holds augmented
    training-side features aligned with items when augmentation is enabled
    and features are computed locally; it is None otherwise (validation
    items always use clean vectors).
    """
    manifest = _manifest_path(cfg)
    base = manifest.parent
    metas = pcgio.load_manifest(manifest)
    seg_cfg = _segment_config(cfg)
    feat_cfg = _feature_config(cfg)
    aug_cfg = _augment_config(cfg)
    coeffs = design_bandpass(BandpassSpec(cfg.sample_rate, cfg.bandpass.low_cut,
                                          cfg.bandpass.high_cut,
                                          cfg.bandpass.order))

    external = None
    if cfg.data.embeddings:
        external = {e.id: e.vector
                    for e in pcgio.load_embeddings(Path(cfg.data.embeddings))}

    items: list[EvalItem] = []
    train_vectors: list[np.ndarray] = []
    skipped = 0
    for meta in metas:
        chunks = _chunk_recording(meta, base, cfg, seg_cfg)
        if chunks is None:
            skipped += 1
            continue
        label = int(meta.label is pcgio.Label.PRESENT)
        for chunk in chunks:
            prepared = minmax_normalize(filter_zero_phase(
                coeffs, pcgio.Waveform(chunk.samples, cfg.sample_rate)))
            clean_chunk = Chunk(chunk.recording_id, chunk.patient_id,
                                chunk.index, prepared.samples, chunk.method,
                                chunk.source_span, chunk.padded)
            if external is not None:
                key = chunk.chunk_id if chunk.chunk_id in external \
                    else meta.recording_id
                if key not in external:
                    raise ValueError(f"no embedding for chunk "
                                     f"{chunk.chunk_id!r} or recording "
                                     f"{meta.recording_id!r}")
                vector = external[key]
                items.append(EvalItem(chunk.chunk_id, meta.recording_id,
                                      meta.patient_id, vector, label))
                continue
            spect = mel_spectrogram(
                pcgio.Waveform(clean_chunk.samples, cfg.sample_rate), feat_cfg)
            vector = pool_features(spect, chunk.chunk_id).vector
            items.append(EvalItem(chunk.chunk_id, meta.recording_id,
                                  meta.patient_id, vector, label))
            if cfg.augment.enabled:
                rng = chunk_rng(cfg.seed, chunk.chunk_id)
                aug = augment_chunk(clean_chunk, aug_cfg, rng)
                aug_spect = augment_spectrogram(
                    mel_spectrogram(pcgio.Waveform(aug.samples, cfg.sample_rate),
                                    feat_cfg), aug_cfg, rng)
                train_vectors.append(pool_features(aug_spect).vector)
    stats = {"items": len(items), "skipped_missing_seg": skipped}
    tv = np.asarray(train_vectors) if (cfg.augment.enabled and external is None
                                       and train_vectors) else None
    return items, tv, stats


def patient_labels(items: list[EvalItem]) -> list[tuple[str, int]]:
    """Patient-level labels: positive if any of the patient's items is."""
    by_patient: dict[str, int] = {}
    for it in items:
        by_patient[it.patient_id] = max(by_patient.get(it.patient_id, 0), it.label)
    return sorted(by_patient.items())


def evaluate_items(items: list[EvalItem], cfg: PipelineConfig,
                   train_vectors: np.ndarray | None = None,
                   shuffle_seed: int | None = None) -> CvResult:
    """Fold generation plus run_cv; optionally under permuted patient labels."""
    eval_items = items
    if shuffle_seed is not None:
        eval_items = permute_patient_labels(items, shuffle_seed)
    folds = make_folds(patient_labels(eval_items), cfg.cv.n_folds, cfg.seed)
    return run_cv(eval_items, KnnConfig(k=cfg.knn.k, threshold=cfg.knn.threshold),
                  folds, Aggregate(cfg.cv.aggregate), train_vectors)


def stage_cv(cfg: PipelineConfig) -> CvResult:
    """End-to-end cross-validated evaluation; writes JSON and CSV reports."""
    items, train_vectors, stats = build_eval_items(cfg)
    if not items:
        raise ValueError("no evaluation items were produced; check the "
                         "manifest and segmentation settings")
    result = evaluate_items(items, cfg, train_vectors)
    out_dir = Path(cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "dataset": stats,
        "result": result.to_dict(),
    }
    atomic_write_text(out_dir / "report.json",
                      json.dumps(report, sort_keys=True, indent=2) + "\n")

    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["fold", "precision", "recall", "auroc", "mcc", "f2",
                     "tp", "fp", "fn", "tn"])
    for i, rep in enumerate(result.reports):
        writer.writerow([i, repr(rep.precision), repr(rep.recall),
                         "" if rep.auroc is None else repr(rep.auroc),
                         repr(rep.mcc), repr(rep.f2), rep.counts.tp,
                         rep.counts.fp, rep.counts.fn, rep.counts.tn])
    atomic_write_text(out_dir / "report.csv", buf.getvalue())

    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["cell", "mean", "std"])
    for cell in ("tp", "fp", "fn", "tn"):
        values = [getattr(r.counts, cell) for r in result.reports]
        writer.writerow([cell, repr(float(np.mean(values))),
                         repr(float(np.std(values, ddof=1))
                              if len(values) > 1 else 0.0)])
    atomic_write_text(out_dir / "confusion.csv", buf.getvalue())

    inputs = {"manifest": _manifest_path(cfg)}
    if cfg.data.embeddings:
        inputs["embeddings"] = Path(cfg.data.embeddings)
    write_run_record(out_dir, "cv run", cfg, inputs,
                     ["report.json", "report.csv", "confusion.csv"])
    return result


def stage_synth(cfg: PipelineConfig, n_patients: int, recordings_per_patient: int,
                positive_fraction: float, template: SynthConfig) -> dict:
    out_dir = Path(cfg.data.out_dir)
    manifest, metas = generate_dataset(out_dir, n_patients,
                                       recordings_per_patient,
                                       positive_fraction, template)
    write_run_record(out_dir, "synth generate", cfg, {"manifest": manifest},
                     ["manifest.csv", "wav/", "seg/"])
    return {"manifest": str(manifest), "recordings": len(metas),
            "patients": n_patients}


def format_report(run_dir: Path) -> str:
    """Human-readable summary of a run directory's report.json."""
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise ValueError(f"no report.json in {run_dir}")
    report = json.loads(report_path.read_text())
    result = report["result"]
    lines = [
        f"config hash : {report['config_hash']}",
        f"seed        : {report['seed']}",
        f"aggregate   : {result['aggregate']}",
        f"folds       : {result['n_folds']} "
        f"(AUROC skipped in {result['auroc_folds_skipped']})",
        "",
        f"{'metric':<10} {'mean':>8} {'std':>8}",
    ]
    for name in ("precision", "recall", "auroc", "mcc", "f2"):
        mean = result["mean"][name]
        std = result["std"][name]
        mean_s = "nan" if mean is None or (isinstance(mean, float)
                                           and math.isnan(mean)) else f"{mean:.4f}"
        std_s = "nan" if std is None or (isinstance(std, float)
                                         and math.isnan(std)) else f"{std:.4f}"
        lines.append(f"{name:<10} {mean_s:>8} {std_s:>8}")
    return "\n".join(lines)
