"""Chunking of recordings into uniform-length blocks.

Two methods are provided: fixed-duration windowing with a 65% remainder
rule, and heart-cycle normalization that groups N consecutive S1-to-S1
cycles and time-stretches each group to a common sample count. Cycle
grouping performs no gap-plausibility validation: a missing annotation
silently yields one artificially long cycle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .io import Waveform
from .tsm import stretch_samples

log = logging.getLogger(__name__)

#: a single heart cycle longer than this triggers an advisory log line
LONG_CYCLE_WARN_S = 2.0


class SegmentMethod(Enum):
    FIXED = "fixed"
    CYCLE = "cycle"


@dataclass(frozen=True)
class SegmentConfig:
    method: SegmentMethod
    seconds: float
    sample_rate: int
    n_cycles: int | None = None

    def __post_init__(self):
        if self.seconds * self.sample_rate < 1:
            raise ValueError("seconds * sample_rate must be at least 1")
        if self.method is SegmentMethod.CYCLE:
            if self.n_cycles is None or self.n_cycles < 1:
                raise ValueError("cycle method requires n_cycles >= 1")

    @property
    def chunk_len(self) -> int:
        return int(round(self.seconds * self.sample_rate))


@dataclass(frozen=True)
class StretchSpec:
    target_duration: float
    cycle_duration: float
    target_sr: float
    original_sr: float

    def __post_init__(self):
        for name in ("target_duration", "cycle_duration", "target_sr", "original_sr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Chunk:
    recording_id: str
    patient_id: str
    index: int
    samples: np.ndarray
    method: SegmentMethod
    source_span: tuple[float, float]
    padded: bool = False

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("chunk index must be nonnegative")
        if not self.source_span[0] < self.source_span[1]:
            raise ValueError("source_span start must precede end")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("chunk contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def chunk_id(self) -> str:
        return f"{self.recording_id}__{self.method.value}{self.index:04d}"


def compute_stretch_factor(s: StretchSpec) -> float:
    """Duration-ratio diagnostic for cycle normalization.

    Returns (target_duration / cycle_duration) * (target_sr / original_sr).
    The chunker's binding contract is the exact output sample count; this
    factor reports by how much a cycle group's duration is being modified.
    """
    return (s.target_duration / s.cycle_duration) * (s.target_sr / s.original_sr)


def chunk_fixed(w: Waveform, cfg: SegmentConfig,
                recording_id: str = "", patient_id: str = "") -> list[Chunk]:
    """Split into consecutive non-overlapping blocks of round(seconds * sr).

    A trailing remainder is kept iff it holds strictly more than 65% of a
    full block's samples, in which case it is padded to full length with
    its own median value; otherwise it is discarded.
    """
    if cfg.method is not SegmentMethod.FIXED:
        raise ValueError("chunk_fixed requires a Fixed-method config")
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != config rate "
                         f"{cfg.sample_rate}")
    length = cfg.chunk_len
    x = w.samples
    n_full = len(x) // length
    chunks = []
    for i in range(n_full):
        chunks.append(Chunk(
            recording_id=recording_id, patient_id=patient_id, index=i,
            samples=x[i * length:(i + 1) * length].copy(),
            method=SegmentMethod.FIXED,
            source_span=(i * length / w.sample_rate,
                         (i + 1) * length / w.sample_rate),
        ))
    remainder = len(x) - n_full * length
    # "more than 65%" is strict; compare in integers (0.65 == 13/20)
    if 20 * remainder > 13 * length:
        tail = x[n_full * length:]
        padded = np.concatenate([tail, np.full(length - remainder, np.median(tail))])
        chunks.append(Chunk(
            recording_id=recording_id, patient_id=patient_id, index=n_full,
            samples=padded, method=SegmentMethod.FIXED,
            source_span=(n_full * length / w.sample_rate, len(x) / w.sample_rate),
            padded=True,
        ))
    return chunks


def stretch_to_length(w: Waveform, target_len: int) -> Waveform:
    """Phase-vocoder stretch to exactly target_len samples, same sample rate."""
    return Waveform(stretch_samples(w.samples, target_len), w.sample_rate)


def chunk_cycles(w: Waveform, s1_onsets: Sequence[float], cfg: SegmentConfig,
                 recording_id: str = "", patient_id: str = "") -> list[Chunk]:
    """Group consecutive S1 onsets into n_cycles-cycle chunks and stretch
    each group to round(seconds * sample_rate) samples.

    Trailing cycles that do not fill a complete group are discarded. Gaps
    in the annotations are NOT detected; onsets separated by missing
    annotations produce overlong cycles that are stretched like any other.
    """
    if cfg.method is not SegmentMethod.CYCLE:
        raise ValueError("chunk_cycles requires a Cycle-method config")
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != config rate "
                         f"{cfg.sample_rate}")
    onsets = list(s1_onsets)
    if any(b <= a for a, b in zip(onsets, onsets[1:])):
        raise ValueError("s1_onsets must be strictly increasing")

    n = cfg.n_cycles
    long_gaps = sum(1 for a, b in zip(onsets, onsets[1:]) if b - a > LONG_CYCLE_WARN_S)
    if long_gaps:
        log.warning("%s: %d inter-onset gap(s) exceed %.1f s (likely missing "
                    "annotations); they are used as-is", recording_id or "<recording>",
                    long_gaps, LONG_CYCLE_WARN_S)

    length = cfg.chunk_len
    n_groups = max(0, (len(onsets) - 1)) // n
    chunks = []
    for g in range(n_groups):
        t0, t1 = onsets[g * n], onsets[(g + 1) * n]
        i0 = int(round(t0 * w.sample_rate))
        i1 = min(int(round(t1 * w.sample_rate)), len(w.samples))
        seg = w.samples[i0:i1]
        chunks.append(Chunk(
            recording_id=recording_id, patient_id=patient_id, index=g,
            samples=stretch_samples(seg, length),
            method=SegmentMethod.CYCLE,
            source_span=(t0, t1),
        ))
    return chunks
