"""STFT and mel-spectrogram front end, plus pooled feature vectors.

Conventions: non-centered Hann frames (frame count is exactly
floor((L - fft_size) / hop_length) + 1), Slaney-style mel scale with
area-normalized triangular filters, power spectrogram in dB referenced to
the per-spectrogram maximum and floored at log_floor_db.

The fixed-window preset pairs 352 mel bands with a 512-point FFT; that is
more bands than spectral bins, so some filters have empty support. These
rows are permitted and counted, not rejected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .io import Waveform

log = logging.getLogger(__name__)

_MEL_BREAK_HZ = 1000.0
_MEL_BREAK = 15.0           # mels at 1 kHz (linear slope 3/200 below)
_MEL_LOG_STEP = np.log(6.4) / 27.0


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int
    n_mels: int
    fft_size: int
    hop_length: int
    fmin: float = 0.0
    fmax: float | None = None  # None means sample_rate / 2
    log_floor_db: float = -80.0

    def __post_init__(self):
        if min(self.n_mels, self.fft_size, self.hop_length) < 1:
            raise ValueError("n_mels, fft_size, hop_length must be positive")
        if self.hop_length > self.fft_size:
            raise ValueError("hop_length must not exceed fft_size")
        if not (0 <= self.fmin < self.effective_fmax <= self.sample_rate / 2):
            raise ValueError("need 0 <= fmin < fmax <= sample_rate / 2")

    @property
    def effective_fmax(self) -> float:
        return self.sample_rate / 2 if self.fmax is None else self.fmax

    @classmethod
    def fixed_mode(cls, sample_rate: int) -> "FeatureConfig":
        return cls(sample_rate=sample_rate, n_mels=352, fft_size=512, hop_length=352)

    @classmethod
    def cycle_mode(cls, sample_rate: int) -> "FeatureConfig":
        return cls(sample_rate=sample_rate, n_mels=128, fft_size=1152, hop_length=288)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (n_mels, n_frames), dB
    config: FeatureConfig

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureVector:
    id: str
    vector: np.ndarray


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(n_samples: int, fft_size: int, hop_length: int) -> int:
    return (n_samples - fft_size) // hop_length + 1


def stft_magnitude(w: Waveform, fft_size: int, hop_length: int) -> np.ndarray:
    """Magnitude STFT with non-centered Hann frames, shape (fft/2+1, frames)."""
    x = w.samples
    if len(x) < fft_size:
        raise ValueError(f"input shorter than fft_size: {len(x)} < {fft_size}")
    window = _hann_periodic(fft_size)
    n_frames = frame_count(len(x), fft_size, hop_length)
    idx = np.arange(fft_size)[None, :] + hop_length * np.arange(n_frames)[:, None]
    return np.abs(np.fft.rfft(x[idx] * window[None, :], axis=1)).T


def hz_to_mel(freq_hz) -> np.ndarray:
    f = np.asarray(freq_hz, dtype=np.float64)
    linear = f * 3.0 / 200.0
    with np.errstate(divide="ignore"):
        logpart = _MEL_BREAK + np.log(np.maximum(f, 1e-300) / _MEL_BREAK_HZ) / _MEL_LOG_STEP
    return np.where(f < _MEL_BREAK_HZ, linear, logpart)


def mel_to_hz(mels) -> np.ndarray:
    m = np.asarray(mels, dtype=np.float64)
    linear = m * 200.0 / 3.0
    logpart = _MEL_BREAK_HZ * np.exp(_MEL_LOG_STEP * (m - _MEL_BREAK))
    return np.where(m < _MEL_BREAK, linear, logpart)


@lru_cache(maxsize=32)
def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Area-normalized triangular mel filters, shape (n_mels, fft/2+1).

    The returned array is cached per config and marked read-only.
    """
    n_bins = cfg.fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * cfg.sample_rate / cfg.fft_size
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.effective_fmax),
                          cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    fdiff = np.diff(hz_pts)
    ramps = hz_pts[:, None] - bin_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1][:, None]
    upper = ramps[2:] / fdiff[1:][:, None]
    fb = np.maximum(0.0, np.minimum(lower, upper))
    fb *= (2.0 / (hz_pts[2:] - hz_pts[:-2]))[:, None]
    empty = int(np.sum(fb.sum(axis=1) == 0))
    if empty:
        log.warning("mel filterbank (%d bands, fft %d, sr %d): %d band(s) have "
                    "no spectral support", cfg.n_mels, cfg.fft_size,
                    cfg.sample_rate, empty)
    fb.setflags(write=False)
    return fb


def empty_filter_count(fb: np.ndarray) -> int:
    return int(np.sum(fb.sum(axis=1) == 0))


def mel_spectrogram(w: Waveform, cfg: FeatureConfig) -> MelSpectrogram:
    """dB mel spectrogram of the power STFT, max-referenced to 0 dB."""
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != config rate "
                         f"{cfg.sample_rate}")
    mag = stft_magnitude(w, cfg.fft_size, cfg.hop_length)
    power = mel_filterbank(cfg) @ (mag ** 2)
    ref = float(power.max())
    if ref <= 0.0:
        values = np.full(power.shape, cfg.log_floor_db)
    else:
        values = 10.0 * np.log10(np.maximum(power, ref * 1e-30) / ref)
        values = np.maximum(values, cfg.log_floor_db)
    return MelSpectrogram(values, cfg)


def pool_features(m: MelSpectrogram, feature_id: str = "") -> FeatureVector:
    """Per-band temporal mean and standard deviation, concatenated (2*n_mels)."""
    if m.n_frames < 2:
        raise ValueError("pooling requires at least 2 frames")
    vector = np.concatenate([m.values.mean(axis=1), m.values.std(axis=1)])
    return FeatureVector(feature_id, vector)
