import numpy as np
import pytest

from pcgkit.io import Waveform


def make_tone(freq_hz: float, sample_rate: int = 4000, n: int = 8000,
              amplitude: float = 1.0) -> Waveform:
    t = np.arange(n) / sample_rate
    return Waveform(amplitude * np.sin(2.0 * np.pi * freq_hz * t), sample_rate)


def dominant_frequency(x: np.ndarray, sample_rate: int) -> float:
    """FFT-peak oracle: frequency of the largest magnitude bin."""
    windowed = np.asarray(x) * np.hanning(len(x))
    spectrum = np.abs(np.fft.rfft(windowed))
    return float(np.argmax(spectrum) * sample_rate / len(x))


@pytest.fixture
def tone():
    return make_tone
