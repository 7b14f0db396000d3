import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcgkit.io import Waveform
from pcgkit.preprocess import (BandpassSpec, design_bandpass, filter_zero_phase,
                               minmax_normalize)


def response_db(coeffs, freq_hz, sample_rate):
    """Independent oracle: evaluate |H| per section at z = e^{j2pi f/fs}."""
    z = np.exp(2j * np.pi * freq_hz / sample_rate)
    h = 1.0 + 0j
    for b0, b1, b2, a1, a2 in coeffs.sections:
        h *= (b0 + b1 / z + b2 / z ** 2) / (1.0 + a1 / z + a2 / z ** 2)
    return 20.0 * np.log10(abs(h))


DEFAULT = BandpassSpec(sample_rate=4000)


def test_design_section_count_and_passband():
    coeffs = design_bandpass(DEFAULT)
    assert len(coeffs.sections) == 5
    assert coeffs.is_stable()
    center = np.sqrt(25.0 * 500.0)  # geometric mean ~112 Hz
    assert abs(response_db(coeffs, center, 4000)) <= 1.0


def test_design_stopband_attenuation():
    coeffs = design_bandpass(DEFAULT)
    assert response_db(coeffs, 10.0, 4000) <= -40.0
    assert response_db(coeffs, 1500.0, 4000) <= -40.0


def test_design_monotone_attenuation_below_passband():
    coeffs = design_bandpass(DEFAULT)
    h5 = response_db(coeffs, 5.0, 4000)
    h15 = response_db(coeffs, 15.0, 4000)
    h25 = response_db(coeffs, 25.0, 4000)
    assert h5 < h15 < h25


def test_design_rejects_bad_specs():
    with pytest.raises(ValueError, match="Nyquist"):
        BandpassSpec(sample_rate=4000, high_cut=2500.0)
    with pytest.raises(ValueError, match="order"):
        BandpassSpec(sample_rate=4000, order=0)
    with pytest.raises(ValueError, match="low_cut"):
        BandpassSpec(sample_rate=4000, low_cut=600.0, high_cut=500.0)


@pytest.mark.parametrize("sample_rate", [4000, 8000, 16000])
def test_design_stable_across_sample_rates(sample_rate):
    coeffs = design_bandpass(BandpassSpec(sample_rate=sample_rate))
    assert np.all(coeffs.pole_magnitudes() < 1.0)


def test_filter_zeros_stay_zero():
    coeffs = design_bandpass(DEFAULT)
    out = filter_zero_phase(coeffs, Waveform(np.zeros(2000), 4000))
    assert np.all(out.samples == 0.0)
    assert len(out) == 2000


def test_filter_inband_amplitude_preserved():
    coeffs = design_bandpass(DEFAULT)
    sr = 4000
    t = np.arange(4 * sr) / sr
    w = Waveform(np.sin(2 * np.pi * 100.0 * t), sr)
    out = filter_zero_phase(coeffs, w)
    edge = sr // 4  # discard 0.25 s
    middle = out.samples[edge:-edge]
    assert abs(np.max(np.abs(middle)) - 1.0) < 0.05


def test_filter_outofband_suppressed():
    coeffs = design_bandpass(DEFAULT)
    sr = 4000
    t = np.arange(4 * sr) / sr
    out = filter_zero_phase(coeffs, Waveform(np.sin(2 * np.pi * 5.0 * t), sr))
    edge = sr // 4
    middle = out.samples[edge:-edge]
    assert np.sqrt(np.mean(middle ** 2)) <= 0.01


def test_filter_zero_phase_no_lag():
    coeffs = design_bandpass(DEFAULT)
    sr = 4000
    t = np.arange(2 * sr) / sr
    # transient in-band burst, so the correlation peak is unambiguous
    x = np.exp(-0.5 * ((t - 1.0) / 0.02) ** 2) * np.sin(2 * np.pi * 100.0 * t)
    y = filter_zero_phase(coeffs, Waveform(x, sr)).samples
    # cross-correlation peak lag between in-band input and output is 0
    lags = np.arange(-50, 51)
    corr = [np.dot(x[200:-200], np.roll(y, lag)[200:-200]) for lag in lags]
    assert lags[int(np.argmax(corr))] == 0


def test_filter_rejects_short_input():
    coeffs = design_bandpass(DEFAULT)
    with pytest.raises(ValueError, match="too short"):
        filter_zero_phase(coeffs, Waveform(np.ones(30), 4000))


def test_minmax_basic():
    out = minmax_normalize(Waveform(np.array([-1.0, 0.0, 1.0]), 100))
    assert np.allclose(out.samples, [0.0, 0.5, 1.0])


def test_minmax_constant_maps_to_half():
    out = minmax_normalize(Waveform(np.array([0.3, 0.3]), 100))
    assert np.all(out.samples == 0.5)


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200))
@settings(max_examples=100)
def test_minmax_range_property(values):
    values = np.asarray(values)
    if np.max(values) == np.min(values):
        return
    out = minmax_normalize(Waveform(values, 100))
    assert np.min(out.samples) == 0.0
    assert np.max(out.samples) == 1.0


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=100))
@settings(max_examples=60)
def test_minmax_idempotent(values):
    values = np.asarray(values)
    if np.max(values) == np.min(values):
        return
    once = minmax_normalize(Waveform(values, 100))
    twice = minmax_normalize(once)
    assert np.max(np.abs(twice.samples - once.samples)) <= 1e-12
