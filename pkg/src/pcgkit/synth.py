"""Synthetic phonocardiogram generator with ground-truth annotations.

Recordings are built from a jittered beat grid: each cycle gets an S1 burst
(Gaussian-enveloped 30-45 Hz tone) at its onset and an S2 burst (50-70 Hz)
at 35% of the cycle. Murmur-positive recordings add 100-400 Hz band-limited
noise across each systole at a configurable SNR over the broadband noise
floor. The emitted segmentation track annotates a configurable fraction of
cycles: within every block of `annotation_block_cycles` cycles a contiguous
prefix is annotated and the rest left unannotated, reproducing the
missing-annotation gaps real datasets show.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .io import (Interval, Label, RecordingMeta, SegmentationTrack, Waveform,
                 save_manifest, save_segmentation, save_wav)
from .preprocess import BandpassSpec, design_bandpass, filter_zero_phase

S1_AMPLITUDE = 0.35
S2_AMPLITUDE = 0.25
S1_SIGMA_S = 0.0125          # Gaussian envelope sigma
S2_SIGMA_S = 0.010
S1_HALF_WIDTH_S = 0.025      # annotated S1 interval is center +/- this
S2_DURATION_S = 0.040
SYSTOLE_FRACTION = 0.35      # S2 placed at this fraction of the cycle
S1_FREQ_RANGE = (30.0, 45.0)
S2_FREQ_RANGE = (50.0, 70.0)
MURMUR_BAND = (100.0, 400.0)

# per-recording parameter spread used by generate_dataset
BPM_SPREAD = (0.75, 1.40)    # multiplies the template heart rate
SNR_JITTER_DB = 4.0
NOISE_FLOOR_JITTER_DB = 5.0


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: int = 4000
    duration: float = 30.0
    heart_rate_bpm: float = 75.0
    heart_rate_jitter: float = 0.05
    murmur: bool = False
    murmur_snr_db: float = 20.0
    annotation_coverage: float = 1.0
    noise_floor_db: float = -50.0
    seed: int = 0
    annotation_block_cycles: int = 8

    def __post_init__(self):
        if not 30.0 <= self.heart_rate_bpm <= 220.0:
            raise ValueError("heart_rate_bpm must lie in [30, 220]")
        if not 0.0 <= self.annotation_coverage <= 1.0:
            raise ValueError("annotation_coverage must lie in [0, 1]")
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError("duration and sample_rate must be positive")
        if self.annotation_block_cycles < 1:
            raise ValueError("annotation_block_cycles must be at least 1")


def _add_burst(x: np.ndarray, sr: int, center_s: float, sigma_s: float,
               freq_hz: float, amplitude: float) -> None:
    # write only into the +/-4 sigma support window
    lo = max(0, int((center_s - 4 * sigma_s) * sr))
    hi = min(len(x), int((center_s + 4 * sigma_s) * sr) + 1)
    if hi <= lo:
        return
    t = np.arange(lo, hi) / sr - center_s
    x[lo:hi] += amplitude * np.exp(-0.5 * (t / sigma_s) ** 2) \
        * np.sin(2.0 * np.pi * freq_hz * t)


def _annotated_cycles(n_cycles: int, coverage: float, block: int) -> np.ndarray:
    """Prefix-per-block coverage with an exact cumulative-rounding budget."""
    annotated = np.zeros(n_cycles, dtype=bool)
    for start in range(0, n_cycles, block):
        end = min(start + block, n_cycles)
        quota = round(coverage * end) - round(coverage * start)
        quota = max(0, min(quota, end - start))
        annotated[start:start + quota] = True
    return annotated


def generate_recording(cfg: SynthConfig) -> tuple[Waveform, SegmentationTrack, int]:
    """Synthesize one recording; returns (waveform, annotations, label).

    The label is 1 for murmur recordings. Every annotated cycle carries its
    four states (S1, systole, S2, diastole); unannotated cycles carry none.
    """
    rng = np.random.default_rng(cfg.seed)
    sr = cfg.sample_rate
    period = 60.0 / cfg.heart_rate_bpm

    beats = [0.0]
    while True:
        step = period * (1.0 + rng.uniform(-cfg.heart_rate_jitter,
                                           cfg.heart_rate_jitter))
        if beats[-1] + step > cfg.duration:
            break
        beats.append(beats[-1] + step)
    n_cycles = len(beats) - 1

    n = int(round(cfg.duration * sr))
    noise_rms = 10.0 ** (cfg.noise_floor_db / 20.0)
    x = rng.normal(0.0, noise_rms, n)

    systoles: list[tuple[float, float]] = []
    for i in range(n_cycles):
        b0, b1 = beats[i], beats[i + 1]
        _add_burst(x, sr, b0 + S1_HALF_WIDTH_S, S1_SIGMA_S,
                   rng.uniform(*S1_FREQ_RANGE), S1_AMPLITUDE)
        s2_start = b0 + SYSTOLE_FRACTION * (b1 - b0)
        _add_burst(x, sr, s2_start + S2_DURATION_S / 2, S2_SIGMA_S,
                   rng.uniform(*S2_FREQ_RANGE), S2_AMPLITUDE)
        systoles.append((b0 + 2 * S1_HALF_WIDTH_S, s2_start))

    if cfg.murmur and systoles:
        raw = rng.normal(0.0, 1.0, n)
        band = filter_zero_phase(
            design_bandpass(BandpassSpec(sr, *MURMUR_BAND, order=4)),
            Waveform(raw, sr)).samples
        band *= (noise_rms * 10.0 ** (cfg.murmur_snr_db / 20.0)
                 / np.sqrt(np.mean(band ** 2)))
        envelope = np.zeros(n)
        for lo_s, hi_s in systoles:
            lo, hi = int(lo_s * sr), min(int(hi_s * sr), n)
            if hi <= lo:
                continue
            ramp = np.sin(np.pi * np.arange(hi - lo) / (hi - lo)) ** 2
            envelope[lo:hi] = np.maximum(envelope[lo:hi], ramp)
        x += band * envelope

    annotated = _annotated_cycles(n_cycles, cfg.annotation_coverage,
                                  cfg.annotation_block_cycles)
    intervals: list[Interval] = []
    for i in range(n_cycles):
        if not annotated[i]:
            continue
        b0, b1 = beats[i], beats[i + 1]
        s1_end = b0 + 2 * S1_HALF_WIDTH_S
        s2_start = b0 + SYSTOLE_FRACTION * (b1 - b0)
        s2_end = s2_start + S2_DURATION_S
        intervals.append(Interval(b0, s1_end, 1))
        intervals.append(Interval(s1_end, s2_start, 2))
        intervals.append(Interval(s2_start, s2_end, 3))
        intervals.append(Interval(s2_end, b1, 4))
    return Waveform(x, sr), SegmentationTrack(tuple(intervals)), int(cfg.murmur)


def generate_dataset(out_dir: str | Path, n_patients: int,
                     recordings_per_patient: int, positive_fraction: float,
                     template: SynthConfig) -> tuple[Path, list[RecordingMeta]]:
    """Write a manifest plus WAV/TSV files for a synthetic patient cohort.

    round(n_patients * positive_fraction) patients are murmur-positive, and
    all recordings of a patient share its label. Heart rate, murmur SNR and
    noise floor vary per recording around the template values. Recording
    seeds derive from (template.seed, patient index, recording index), so a
    given template reproduces the same dataset byte for byte; manifest paths
    are relative to out_dir.
    """
    if n_patients < 2:
        raise ValueError("need at least 2 patients")
    if not 0.0 < positive_fraction < 1.0:
        raise ValueError("positive_fraction must lie in (0, 1)")
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    (out_dir / "seg").mkdir(parents=True, exist_ok=True)

    assign_rng = np.random.default_rng(np.random.SeedSequence((template.seed, 0x5EED)))
    n_positive = round(n_patients * positive_fraction)
    positive = set(assign_rng.permutation(n_patients)[:n_positive].tolist())

    metas: list[RecordingMeta] = []
    for p in range(n_patients):
        pid = f"p{p:04d}"
        murmur = p in positive
        for r in range(recordings_per_patient):
            rid = f"{pid}_r{r:02d}"
            seed_seq = np.random.SeedSequence((template.seed, p, r))
            param_rng = np.random.default_rng(seed_seq)
            bpm = float(param_rng.uniform(template.heart_rate_bpm * BPM_SPREAD[0],
                                          template.heart_rate_bpm * BPM_SPREAD[1]))
            cfg = replace(
                template,
                heart_rate_bpm=min(220.0, max(30.0, bpm)),
                murmur=murmur,
                murmur_snr_db=template.murmur_snr_db
                + float(param_rng.uniform(-SNR_JITTER_DB, SNR_JITTER_DB)),
                noise_floor_db=template.noise_floor_db
                + float(param_rng.uniform(-NOISE_FLOOR_JITTER_DB,
                                          NOISE_FLOOR_JITTER_DB)),
                seed=int(seed_seq.generate_state(1)[0]),
            )
            waveform, track, _label = generate_recording(cfg)
            save_wav(out_dir / "wav" / f"{rid}.wav", waveform)
            save_segmentation(out_dir / "seg" / f"{rid}.tsv", track)
            metas.append(RecordingMeta(
                recording_id=rid, patient_id=pid,
                wav_path=f"wav/{rid}.wav", seg_path=f"seg/{rid}.tsv",
                label=Label.PRESENT if murmur else Label.ABSENT,
            ))
    manifest_path = out_dir / "manifest.csv"
    save_manifest(manifest_path, metas)
    return manifest_path, metas
