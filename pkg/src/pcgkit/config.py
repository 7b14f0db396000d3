"""Structured pipeline configuration with per-mode presets.

A run is described by one config: data paths, target sample rate, bandpass
settings, the chunking method, augmentation, mel front-end parameters, the
k-NN classifier, and cross-validation settings. Presets map to the two
windowing modes of each model family:

    cnn-fixed    8.0 s windows,   mel 352/512/352,  4 kHz, k=5
    cnn-cycle    10-cycle chunks, mel 128/1152/288, 4 kHz, k=7
    beats-fixed  7.0 s windows,   16 kHz, k=5 (embeddings imported)
    beats-cycle  12-cycle chunks, 16 kHz, k=7 (embeddings imported)

All randomness derives from the single root `seed`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field path."""


@dataclass
class DataSection:
    manifest: str | None = None
    embeddings: str | None = None
    out_dir: str = "run"


@dataclass
class BandpassSection:
    low_cut: float = 25.0
    high_cut: float = 500.0
    order: int = 5


@dataclass
class SegmentSection:
    method: str = "fixed"        # fixed | cycle
    seconds: float = 8.0
    n_cycles: int = 10


@dataclass
class AugmentSection:
    enabled: bool = True
    probability_each: float = 0.6
    max_mute_fraction: float = 0.25
    max_semitones: float = 1.0
    max_mask_area_fraction: float = 0.25


@dataclass
class FeatureSection:
    n_mels: int = 352
    fft_size: int = 512
    hop_length: int = 352
    log_floor_db: float = -80.0


@dataclass
class KnnSection:
    k: int = 5
    threshold: float = 0.5


@dataclass
class CvSection:
    n_folds: int = 10
    aggregate: str = "per-chunk"  # per-chunk | per-recording-mean-score


@dataclass
class PipelineConfig:
    preset: str | None = None
    sample_rate: int = 4000
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    bandpass: BandpassSection = field(default_factory=BandpassSection)
    segment: SegmentSection = field(default_factory=SegmentSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    knn: KnnSection = field(default_factory=KnnSection)
    cv: CvSection = field(default_factory=CvSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Digest of every effective parameter.

        The data section is excluded: paths select inputs (tracked by
        content digest in run records) and the output location, neither of
        which affects computed results.
        """
        effective = {k: v for k, v in self.to_dict().items() if k != "data"}
        return hashlib.sha256(
            json.dumps(effective, sort_keys=True).encode()).hexdigest()

    def validate(self) -> None:
        errors = []
        if self.sample_rate < 1:
            errors.append("sample_rate: must be positive")
        if self.segment.method not in ("fixed", "cycle"):
            errors.append(f"segment.method: unknown method {self.segment.method!r}")
        if self.segment.seconds <= 0:
            errors.append("segment.seconds: must be positive")
        if self.segment.method == "cycle" and self.segment.n_cycles < 1:
            errors.append("segment.n_cycles: must be at least 1 for cycle method")
        if not 0 < self.bandpass.low_cut < self.bandpass.high_cut:
            errors.append("bandpass.low_cut: need 0 < low_cut < high_cut")
        if self.bandpass.high_cut >= self.sample_rate / 2:
            errors.append("bandpass.high_cut: reaches Nyquist for sample_rate "
                          f"{self.sample_rate}")
        if self.bandpass.order < 1:
            errors.append("bandpass.order: must be at least 1")
        if not 0.0 <= self.augment.probability_each <= 1.0:
            errors.append("augment.probability_each: must lie in [0, 1]")
        chunk_len = round(self.segment.seconds * self.sample_rate)
        if self.augment.enabled and chunk_len < 2048:
            errors.append("augment.enabled: chunks of "
                          f"{chunk_len} samples are too short for pitch "
                          "shifting (need >= 2048); disable augmentation or "
                          "enlarge segment.seconds")
        if self.features.hop_length > self.features.fft_size:
            errors.append("features.hop_length: must not exceed features.fft_size")
        if min(self.features.n_mels, self.features.fft_size,
               self.features.hop_length) < 1:
            errors.append("features.n_mels: feature sizes must be positive")
        if self.knn.k < 1:
            errors.append("knn.k: must be at least 1")
        if not 0.0 <= self.knn.threshold <= 1.0:
            errors.append("knn.threshold: must lie in [0, 1]")
        if self.cv.n_folds < 2:
            errors.append("cv.n_folds: must be at least 2")
        if self.cv.aggregate not in ("per-chunk", "per-recording-mean-score"):
            errors.append(f"cv.aggregate: unknown mode {self.cv.aggregate!r}")
        if errors:
            raise ConfigError("; ".join(errors))


PRESETS: dict[str, dict] = {
    "cnn-fixed": {
        "sample_rate": 4000,
        "segment": {"method": "fixed", "seconds": 8.0},
        "features": {"n_mels": 352, "fft_size": 512, "hop_length": 352},
        "knn": {"k": 5},
    },
    "cnn-cycle": {
        "sample_rate": 4000,
        "segment": {"method": "cycle", "seconds": 8.0, "n_cycles": 10},
        "features": {"n_mels": 128, "fft_size": 1152, "hop_length": 288},
        "knn": {"k": 7},
    },
    "beats-fixed": {
        "sample_rate": 16000,
        "segment": {"method": "fixed", "seconds": 7.0},
        "features": {"n_mels": 352, "fft_size": 512, "hop_length": 352},
        "knn": {"k": 5},
    },
    "beats-cycle": {
        "sample_rate": 16000,
        "segment": {"method": "cycle", "seconds": 7.0, "n_cycles": 12},
        "features": {"n_mels": 128, "fft_size": 1152, "hop_length": 288},
        "knn": {"k": 7},
    },
}

_SECTIONS = {
    "data": DataSection, "bandpass": BandpassSection, "segment": SegmentSection,
    "augment": AugmentSection, "features": FeatureSection, "knn": KnnSection,
    "cv": CvSection,
}
_SCALARS = ("preset", "sample_rate", "seed")


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in update.items():
        here = f"{path}.{key}" if path else key
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value, here)
        else:
            out[key] = value
    return out


def _build(merged: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    for key, value in merged.items():
        if key in _SCALARS:
            setattr(cfg, key, value)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table of settings")
            section = getattr(cfg, key)
            known = {f.name for f in dataclasses.fields(section)}
            for sub, sub_value in value.items():
                if sub not in known:
                    raise ConfigError(f"{key}.{sub}: unknown setting")
                setattr(section, sub, sub_value)
        else:
            raise ConfigError(f"{key}: unknown setting")
    return cfg


def load_pipeline_config(path: str | Path | None = None,
                         preset: str | None = None,
                         overrides: dict | None = None) -> PipelineConfig:
    """Resolve defaults <- preset <- config file <- overrides, then validate.

    The config file (JSON) may itself name a "preset"; an explicit `preset`
    argument takes precedence over the file's.
    """
    file_dict: dict = {}
    if path is not None:
        try:
            file_dict = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})")
        if not isinstance(file_dict, dict):
            raise ConfigError(f"config file {path}: top level must be an object")
    preset_name = preset or file_dict.get("preset")
    merged: dict = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset_name!r} "
                              f"(available: {', '.join(sorted(PRESETS))})")
        merged = _merge(merged, PRESETS[preset_name])
    merged = _merge(merged, file_dict)
    if overrides:
        merged = _merge(merged, overrides)
    merged["preset"] = preset_name
    cfg = _build(merged)
    cfg.validate()
    return cfg
