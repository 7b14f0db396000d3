"""Dataset I/O: recording manifests, WAV audio, heart-cycle segmentation
tracks, embedding tables, and band-limited resampling.

File formats
------------
Manifest CSV   header ``recording_id,patient_id,wav_path,seg_path,label,age_group,sex``;
               label is one of Present / Absent / Unknown; seg_path may be empty.
Segmentation   one interval per line: ``onset<TAB>offset<TAB>state`` with state in
               0..4 (0 unannotated, 1 S1, 2 systole, 3 S2, 4 diastole).
Embedding CSV  header ``id,v0,...,v{D-1}``; D constant within a file.
WAV            RIFF mono, 16-bit PCM or 32-bit float.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.io import wavfile


class Label(Enum):
    PRESENT = "Present"
    ABSENT = "Absent"
    UNKNOWN = "Unknown"


class AgeGroup(Enum):
    NEONATE = "Neonate"
    INFANT = "Infant"
    CHILD = "Child"
    ADOLESCENT = "Adolescent"
    UNLABELED = "Unlabeled"


class Sex(Enum):
    FEMALE = "Female"
    MALE = "Male"


MANIFEST_COLUMNS = ("recording_id", "patient_id", "wav_path", "seg_path",
                    "label", "age_group", "sex")

#: segmentation states
STATE_UNANNOTATED, STATE_S1, STATE_SYSTOLE, STATE_S2, STATE_DIASTOLE = range(5)


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: str
    patient_id: str
    wav_path: str
    seg_path: str | None
    label: Label
    age_group: AgeGroup | None = None
    sex: Sex | None = None


@dataclass(frozen=True)
class Waveform:
    """Mono audio buffer. Samples are float64, sample_rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if samples.size == 0:
            raise ValueError("waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


class Interval(NamedTuple):
    onset: float
    offset: float
    state: int


@dataclass(frozen=True)
class SegmentationTrack:
    """Ordered, non-overlapping annotated state intervals."""

    intervals: tuple[Interval, ...]

    def __post_init__(self):
        prev_offset = None
        for iv in self.intervals:
            if not (iv.onset < iv.offset):
                raise ValueError(f"interval onset must precede offset: {iv}")
            if iv.state not in (0, 1, 2, 3, 4):
                raise ValueError(f"state outside 0..4: {iv}")
            if prev_offset is not None and iv.onset < prev_offset:
                raise ValueError(f"overlapping interval at onset {iv.onset}")
            prev_offset = iv.offset

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class Embedding:
    id: str
    vector: np.ndarray

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=np.float64)
        if vector.ndim != 1 or vector.size == 0:
            raise ValueError("embedding vector must be a nonempty 1-D array")
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"embedding {self.id!r} contains non-finite values")
        object.__setattr__(self, "vector", vector)


# ---------------------------------------------------------------------------
# manifests


def _parse_optional(cell: str, enum_cls, column: str, line_no: int):
    if cell == "":
        return None
    try:
        return enum_cls(cell)
    except ValueError:
        raise ValueError(f"manifest line {line_no}: unknown {column} token {cell!r}")


def load_manifest(path: str | Path, exclude_unknown: bool = True) -> list[RecordingMeta]:
    """Parse a manifest CSV.

    Unknown-labeled rows are dropped by default; they are excluded from all
    downstream processing. Duplicate recording ids and malformed rows raise
    ValueError.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty manifest (missing header)")
        if tuple(header) != MANIFEST_COLUMNS:
            raise ValueError(f"{path}: bad manifest header {header!r}")
        rows: list[RecordingMeta] = []
        seen: set[str] = set()
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_COLUMNS):
                raise ValueError(f"{path} line {line_no}: expected "
                                 f"{len(MANIFEST_COLUMNS)} columns, got {len(row)}")
            rid, pid, wav_path, seg_path, label_s, age_s, sex_s = row
            if rid in seen:
                raise ValueError(f"{path} line {line_no}: duplicate recording_id {rid!r}")
            seen.add(rid)
            if not pid:
                raise ValueError(f"{path} line {line_no}: empty patient_id")
            try:
                label = Label(label_s)
            except ValueError:
                raise ValueError(f"{path} line {line_no}: unknown label token {label_s!r}")
            rows.append(RecordingMeta(
                recording_id=rid,
                patient_id=pid,
                wav_path=wav_path,
                seg_path=seg_path or None,
                label=label,
                age_group=_parse_optional(age_s, AgeGroup, "age_group", line_no),
                sex=_parse_optional(sex_s, Sex, "sex", line_no),
            ))
    if exclude_unknown:
        rows = [r for r in rows if r.label is not Label.UNKNOWN]
    return rows


def save_manifest(path: str | Path, rows: Sequence[RecordingMeta]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow([
                r.recording_id, r.patient_id, r.wav_path, r.seg_path or "",
                r.label.value,
                r.age_group.value if r.age_group else "",
                r.sex.value if r.sex else "",
            ])


# ---------------------------------------------------------------------------
# WAV audio


def load_wav(path: str | Path) -> Waveform:
    """Read a mono PCM16 or FLOAT32 WAV file.

    Integer PCM is scaled by 1/32768 so full-scale positive maps to
    32767/32768. Multi-channel files and other encodings are rejected.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:  # scipy raises bare ValueError on truncation
        raise ValueError(f"{path}: failed to read WAV ({exc})")
    if data.ndim != 1:
        raise ValueError(f"{path}: multi-channel WAV not supported "
                         f"({data.shape[1]} channels)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV encoding {data.dtype}; "
                         "expected PCM16 or FLOAT32")
    if samples.size == 0:
        raise ValueError(f"{path}: WAV contains no samples")
    return Waveform(samples, int(rate))


def save_wav(path: str | Path, w: Waveform, encoding: str = "float32") -> None:
    if encoding == "float32":
        data = w.samples.astype(np.float32)
    elif encoding == "pcm16":
        scaled = np.round(w.samples * 32768.0)
        data = np.clip(scaled, -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")
    wavfile.write(Path(path), w.sample_rate, data)


# ---------------------------------------------------------------------------
# segmentation tracks


def load_segmentation(path: str | Path) -> SegmentationTrack:
    """Parse a segmentation TSV; intervals are returned sorted by onset."""
    path = Path(path)
    intervals: list[Interval] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ValueError(f"{path} line {line_no}: expected 3 fields, "
                                 f"got {len(fields)}")
            try:
                onset, offset = float(fields[0]), float(fields[1])
                state = int(fields[2])
            except ValueError:
                raise ValueError(f"{path} line {line_no}: non-numeric field in {line!r}")
            intervals.append(Interval(onset, offset, state))
    intervals.sort(key=lambda iv: iv.onset)
    return SegmentationTrack(tuple(intervals))


def save_segmentation(path: str | Path, track: SegmentationTrack) -> None:
    with open(path, "w") as fh:
        for iv in track.intervals:
            fh.write(f"{iv.onset:.6f}\t{iv.offset:.6f}\t{iv.state}\n")


def extract_s1_onsets(track: SegmentationTrack) -> list[float]:
    """Onset times of every S1 interval, strictly increasing."""
    return [iv.onset for iv in track.intervals if iv.state == STATE_S1]


# ---------------------------------------------------------------------------
# resampling


def resample_samples(x: np.ndarray, ratio: float, n_out: int | None = None,
                     zeros: int = 32) -> np.ndarray:
    """Band-limited windowed-sinc resampling by an arbitrary rate ratio.

    Output sample m is interpolated at input position m/ratio with a
    Hann-windowed sinc kernel (`zeros` zero crossings per side at the
    anti-aliasing cutoff min(1, ratio)).
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n_out is None:
        n_out = int(round(n * ratio))
    if n_out <= 0:
        raise ValueError("resampling produced an empty signal")
    if ratio == 1.0 and n_out == n:
        return x.copy()
    cutoff = min(1.0, ratio)
    half = zeros / cutoff
    taps = int(math.ceil(2 * half)) + 1
    out = np.empty(n_out)
    block = max(1, (1 << 22) // taps)  # bound the (block, taps) work matrix
    for start in range(0, n_out, block):
        m = np.arange(start, min(start + block, n_out))
        t = m / ratio
        j0 = np.ceil(t - half).astype(np.int64)
        idx = j0[:, None] + np.arange(taps)[None, :]
        dt = idx - t[:, None]
        kern = cutoff * np.sinc(cutoff * dt)
        kern *= 0.5 + 0.5 * np.cos(np.pi * np.clip(dt / half, -1.0, 1.0))
        valid = (idx >= 0) & (idx < n)
        vals = np.where(valid, x[np.clip(idx, 0, n - 1)], 0.0)
        out[m] = np.sum(vals * kern * valid, axis=1)
    return out


def resample(w: Waveform, target_sr: int) -> Waveform:
    """Resample to target_sr; output length is round(len * target_sr / sr)."""
    if target_sr <= 0:
        raise ValueError("target sample rate must be positive")
    if target_sr == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    n = len(w.samples)
    # exact round-half-up of n * target / source, in integer arithmetic
    n_out = (2 * n * target_sr + w.sample_rate) // (2 * w.sample_rate)
    y = resample_samples(w.samples, target_sr / w.sample_rate, n_out=n_out)
    return Waveform(y, target_sr)


# ---------------------------------------------------------------------------
# embeddings


def load_embeddings(path: str | Path) -> list[Embedding]:
    """Read an embedding CSV; all rows must share one dimension."""
    path = Path(path)
    embeddings: list[Embedding] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        dim = len(header) - 1
        if header[0] != "id" or dim < 1 or \
                header[1:] != [f"v{i}" for i in range(dim)]:
            raise ValueError(f"{path}: bad embedding header {header[:4]!r}...")
        seen: set[str] = set()
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ValueError(f"{path} line {line_no}: expected {dim} values, "
                                 f"got {len(row) - 1}")
            eid = row[0]
            if eid in seen:
                raise ValueError(f"{path} line {line_no}: duplicate id {eid!r}")
            seen.add(eid)
            vector = np.array([float(v) for v in row[1:]])
            if not np.all(np.isfinite(vector)):
                raise ValueError(f"{path} line {line_no}: non-finite value in {eid!r}")
            embeddings.append(Embedding(eid, vector))
    return embeddings


def save_embeddings(path: str | Path, embeddings: Sequence[Embedding]) -> None:
    if not embeddings:
        with open(path, "w", newline="") as fh:
            pass
        return
    dim = len(embeddings[0].vector)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"v{i}" for i in range(dim)])
        for e in embeddings:
            if len(e.vector) != dim:
                raise ValueError(f"embedding {e.id!r} has dimension "
                                 f"{len(e.vector)}, expected {dim}")
            writer.writerow([e.id] + [repr(float(v)) for v in e.vector])
