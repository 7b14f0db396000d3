"""Stochastic training-time augmentation.

Waveform chunks get random muting and pitch shifting; spectrograms get a
combined time/frequency mask. Each method is gated independently with the
configured probability. All randomness flows through an explicit numpy
Generator; per-chunk generators are derived by hashing (seed, chunk_id) so
processing order cannot change results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .features import MelSpectrogram
from .io import resample_samples
from .segment import Chunk
from .tsm import stretch_samples

#: pitch shifting needs enough samples for the phase vocoder's default window
MIN_PITCH_SHIFT_LEN = 2048


@dataclass(frozen=True)
class AugmentConfig:
    probability_each: float = 0.6
    max_mute_fraction: float = 0.25
    max_semitones: float = 1.0
    max_mask_area_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name in ("probability_each", "max_mute_fraction", "max_mask_area_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_semitones < 0:
            raise ValueError("max_semitones must be nonnegative")


def chunk_rng(seed: int, chunk_id: str) -> np.random.Generator:
    """Deterministic per-chunk generator derived from (seed, chunk_id)."""
    digest = hashlib.sha256(chunk_id.encode("utf-8")).digest()
    return np.random.default_rng(
        np.random.SeedSequence((seed, int.from_bytes(digest[:16], "big"))))


def mute_random(chunk: Chunk, rng: np.random.Generator,
                max_mute_fraction: float = 0.25) -> Chunk:
    """Replace one contiguous segment (up to max_mute_fraction of the chunk)
    with the chunk's median value."""
    n = len(chunk.samples)
    max_len = int(max_mute_fraction * n)
    if max_len < 1:
        return replace(chunk, samples=chunk.samples.copy())
    mute_len = int(rng.integers(1, max_len + 1))
    start = int(rng.integers(0, n - mute_len + 1))
    out = chunk.samples.copy()
    out[start:start + mute_len] = np.median(chunk.samples)
    return replace(chunk, samples=out)


def pitch_shift(chunk: Chunk, rng: np.random.Generator,
                max_semitones: float = 1.0) -> Chunk:
    """Shift pitch by a uniform random offset in [-max, +max] semitones.

    Implemented as resampling by 2^(-s/12) followed by a time stretch back
    to the original length, so chunk length (and therefore S1/S2 grid
    positions) is preserved exactly.
    """
    n = len(chunk.samples)
    if n < MIN_PITCH_SHIFT_LEN:
        raise ValueError(f"chunk too short for pitch shifting: {n} < "
                         f"{MIN_PITCH_SHIFT_LEN}")
    semitones = float(rng.uniform(-max_semitones, max_semitones))
    factor = 2.0 ** (semitones / 12.0)
    if factor == 1.0:
        return replace(chunk, samples=chunk.samples.copy())
    shrunk = resample_samples(chunk.samples, 1.0 / factor)
    return replace(chunk, samples=stretch_samples(shrunk, n))


def spec_mask(m: MelSpectrogram, rng: np.random.Generator,
              max_mask_area_fraction: float = 0.25) -> MelSpectrogram:
    """Apply one time-band and one frequency-band mask, filled with the
    spectrogram minimum.

    Each mask's width is drawn from half the area budget, so the union of
    both masks never exceeds max_mask_area_fraction of all cells.
    """
    n_mels, n_frames = m.values.shape
    t_max = int(0.5 * max_mask_area_fraction * n_frames)
    f_max = int(0.5 * max_mask_area_fraction * n_mels)
    w_t = int(rng.integers(0, t_max + 1))
    t0 = int(rng.integers(0, n_frames - w_t + 1))
    w_f = int(rng.integers(0, f_max + 1))
    f0 = int(rng.integers(0, n_mels - w_f + 1))
    out = m.values.copy()
    fill = m.values.min()
    out[:, t0:t0 + w_t] = fill
    out[f0:f0 + w_f, :] = fill
    return MelSpectrogram(out, m.config)


def augment_chunk(chunk: Chunk, cfg: AugmentConfig,
                  rng: np.random.Generator) -> Chunk:
    """Waveform-stage augmentation: mute then pitch shift, each applied
    independently with probability cfg.probability_each."""
    do_mute = rng.random() < cfg.probability_each
    do_pitch = rng.random() < cfg.probability_each
    out = chunk
    if do_mute:
        out = mute_random(out, rng, cfg.max_mute_fraction)
    if do_pitch:
        out = pitch_shift(out, rng, cfg.max_semitones)
    return out


def augment_spectrogram(m: MelSpectrogram, cfg: AugmentConfig,
                        rng: np.random.Generator) -> MelSpectrogram:
    """Spectrogram-stage augmentation under the same per-method gate."""
    if rng.random() < cfg.probability_each:
        return spec_mask(m, rng, cfg.max_mask_area_fraction)
    return m
