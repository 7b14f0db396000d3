import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile

from pcgkit.io import (Embedding, Interval, Label, SegmentationTrack, Waveform,
                       extract_s1_onsets, load_embeddings, load_manifest,
                       load_segmentation, load_wav, resample, save_embeddings,
                       save_manifest, save_segmentation, save_wav)
from pcgkit.synth import SynthConfig, generate_recording

from conftest import dominant_frequency

MANIFEST_HEADER = "recording_id,patient_id,wav_path,seg_path,label,age_group,sex"


def write_manifest(path, rows):
    path.write_text(MANIFEST_HEADER + "\n" + "".join(r + "\n" for r in rows))
    return path


# ---------------------------------------------------------------------------
# manifests


def test_manifest_header_only(tmp_path):
    path = write_manifest(tmp_path / "m.csv", [])
    assert load_manifest(path) == []


def test_manifest_exclude_unknown_filtering(tmp_path):
    rows = [
        "r1,p1,a.wav,,Present,Child,Female",
        "r2,p1,b.wav,,Unknown,,",
        "r3,p2,c.wav,s.tsv,Absent,Infant,Male",
    ]
    path = write_manifest(tmp_path / "m.csv", rows)
    kept = load_manifest(path, exclude_unknown=False)
    assert len(kept) == 3
    filtered = load_manifest(path, exclude_unknown=True)
    assert [r.recording_id for r in filtered] == ["r1", "r3"]
    assert filtered[0].seg_path is None
    assert filtered[1].seg_path == "s.tsv"


def test_manifest_physionet_scale_counts(tmp_path):
    # dataset statistics from the source data: 3163 recordings, 156 Unknown,
    # 616 Present, 2391 Absent
    rows = []
    for i in range(3163):
        if i < 616:
            label = "Present"
        elif i < 616 + 2391:
            label = "Absent"
        else:
            label = "Unknown"
        rows.append(f"r{i},p{i % 816},w{i}.wav,,{label},,")
    path = write_manifest(tmp_path / "m.csv", rows)
    all_rows = load_manifest(path, exclude_unknown=False)
    usable = load_manifest(path, exclude_unknown=True)
    assert len(all_rows) == 3163
    assert len(usable) == 3007
    assert sum(r.label is Label.PRESENT for r in usable) == 616
    assert sum(r.label is Label.ABSENT for r in usable) == 2391
    assert len({r.patient_id for r in usable}) == 816


def test_manifest_duplicate_recording_id(tmp_path):
    path = write_manifest(tmp_path / "m.csv", [
        "r1,p1,a.wav,,Present,,", "r1,p2,b.wav,,Absent,,"])
    with pytest.raises(ValueError, match="duplicate recording_id"):
        load_manifest(path)


def test_manifest_bad_label_and_column_count(tmp_path):
    path = write_manifest(tmp_path / "m.csv", ["r1,p1,a.wav,,Maybe,,"])
    with pytest.raises(ValueError, match="unknown label"):
        load_manifest(path)
    path = write_manifest(tmp_path / "m2.csv", ["r1,p1,a.wav,Present"])
    with pytest.raises(ValueError, match="columns"):
        load_manifest(path)
    path = write_manifest(tmp_path / "m3.csv", ["r1,,a.wav,,Present,,"])
    with pytest.raises(ValueError, match="patient_id"):
        load_manifest(path)


def test_manifest_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(ValueError, match="header"):
        load_manifest(path)


@given(st.lists(st.sampled_from(["Present", "Absent", "Unknown"]), max_size=40))
@settings(max_examples=30, deadline=None)
def test_manifest_exclusion_invariant(tmp_path_factory, labels):
    tmp = tmp_path_factory.mktemp("m")
    rows = [f"r{i},p{i},w.wav,,{lab},," for i, lab in enumerate(labels)]
    path = write_manifest(tmp / "m.csv", rows)
    kept = load_manifest(path, exclude_unknown=True)
    everything = load_manifest(path, exclude_unknown=False)
    n_unknown = sum(1 for lab in labels if lab == "Unknown")
    assert len(kept) + n_unknown == len(everything)


def test_manifest_roundtrip(tmp_path):
    path = write_manifest(tmp_path / "m.csv", [
        "r1,p1,a.wav,s.tsv,Present,Neonate,Female",
        "r2,p2,b.wav,,Absent,,",
    ])
    rows = load_manifest(path)
    out = tmp_path / "copy.csv"
    save_manifest(out, rows)
    assert load_manifest(out) == rows


# ---------------------------------------------------------------------------
# WAV


def test_wav_silence(tmp_path):
    path = tmp_path / "z.wav"
    save_wav(path, Waveform(np.zeros(4000), 4000))
    w = load_wav(path)
    assert w.sample_rate == 4000
    assert len(w) == 4000
    assert np.all(w.samples == 0.0)


def test_wav_pcm16_scaling(tmp_path):
    path = tmp_path / "full.wav"
    wavfile.write(path, 4000, np.array([32767, -32768, 0], dtype=np.int16))
    w = load_wav(path)
    assert w.samples[0] == pytest.approx(32767 / 32768, abs=0)
    assert w.samples[1] == -1.0
    assert w.samples[2] == 0.0


def test_wav_float_roundtrip_amplitudes(tmp_path):
    rng = np.random.default_rng(0)
    original = Waveform(rng.uniform(-1, 1, 5000), 8000)
    path = tmp_path / "f.wav"
    save_wav(path, original, encoding="float32")
    loaded = load_wav(path)
    assert loaded.sample_rate == 8000
    assert len(loaded) == 5000
    assert np.max(np.abs(loaded.samples - original.samples)) < 1e-6


def test_wav_generator_roundtrip(tmp_path):
    w, _, _ = generate_recording(SynthConfig(duration=3.0, seed=5))
    path = tmp_path / "gen.wav"
    save_wav(path, w)
    loaded = load_wav(path)
    assert len(loaded) == len(w)
    assert loaded.sample_rate == w.sample_rate


def test_wav_rejects_multichannel_and_bad_dtype(tmp_path):
    stereo = tmp_path / "st.wav"
    wavfile.write(stereo, 4000, np.zeros((100, 2), dtype=np.int16))
    with pytest.raises(ValueError, match="multi-channel"):
        load_wav(stereo)
    int32 = tmp_path / "i32.wav"
    wavfile.write(int32, 4000, np.zeros(100, dtype=np.int32))
    with pytest.raises(ValueError, match="unsupported"):
        load_wav(int32)


def test_wav_truncated(tmp_path):
    path = tmp_path / "t.wav"
    save_wav(path, Waveform(np.zeros(1000), 4000))
    data = path.read_bytes()
    path.write_bytes(data[:20])
    with pytest.raises(ValueError):
        load_wav(path)


# ---------------------------------------------------------------------------
# segmentation


def test_segmentation_parse(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("0.00\t0.10\t1\n0.10\t0.30\t2\n0.30\t0.40\t3\n")
    track = load_segmentation(path)
    assert len(track) == 3
    assert track.intervals[0] == Interval(0.0, 0.1, 1)


def test_segmentation_empty(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("")
    assert len(load_segmentation(path)) == 0


def test_segmentation_sorts_by_onset(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("0.30\t0.40\t3\n0.00\t0.10\t1\n0.10\t0.30\t2\n")
    track = load_segmentation(path)
    onsets = [iv.onset for iv in track.intervals]
    assert onsets == sorted(onsets)
    assert [iv.state for iv in track.intervals] == [1, 2, 3]


def test_segmentation_errors(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("0.0\tx\t1\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_segmentation(path)
    path.write_text("0.0\t0.1\t7\n")
    with pytest.raises(ValueError, match="state"):
        load_segmentation(path)
    path.write_text("0.0\t0.2\t1\n0.1\t0.3\t2\n")
    with pytest.raises(ValueError, match="overlapping"):
        load_segmentation(path)
    path.write_text("0.0\t0.1\n")
    with pytest.raises(ValueError, match="3 fields"):
        load_segmentation(path)


def test_segmentation_roundtrip(tmp_path):
    track = SegmentationTrack((Interval(0.0, 0.1, 1), Interval(0.1, 0.35, 2)))
    path = tmp_path / "s.tsv"
    save_segmentation(path, track)
    loaded = load_segmentation(path)
    assert loaded == track


def test_extract_s1_onsets():
    track = SegmentationTrack((
        Interval(0.0, 0.1, 1), Interval(0.1, 0.3, 2), Interval(0.3, 0.4, 3),
        Interval(0.4, 0.8, 4), Interval(0.8, 0.9, 1)))
    assert extract_s1_onsets(track) == [0.0, 0.8]


def test_extract_s1_onsets_empty():
    track = SegmentationTrack((Interval(0.0, 0.1, 2), Interval(0.2, 0.3, 4)))
    assert extract_s1_onsets(track) == []


def test_extract_s1_onsets_from_generator():
    cfg = SynthConfig(duration=10.0, heart_rate_bpm=60.0,
                      heart_rate_jitter=0.0, annotation_coverage=1.0, seed=3)
    _, track, _ = generate_recording(cfg)
    onsets = extract_s1_onsets(track)
    assert len(onsets) == 10
    assert np.allclose(np.diff(onsets), 1.0)


@given(st.lists(st.tuples(st.floats(0, 100), st.integers(0, 4)),
                min_size=0, max_size=30, unique_by=lambda t: t[0]))
def test_extract_s1_strictly_increasing(pairs):
    pairs = sorted(pairs)
    intervals = []
    for (onset, state), (nxt, _) in zip(pairs, pairs[1:]):
        intervals.append(Interval(onset, nxt, state))
    track = SegmentationTrack(tuple(intervals))
    onsets = extract_s1_onsets(track)
    assert onsets == sorted(onsets)
    assert all(a < b for a, b in zip(onsets, onsets[1:]))
    interval_onsets = {iv.onset for iv in track.intervals}
    assert set(onsets) <= interval_onsets


# ---------------------------------------------------------------------------
# resampling


def test_resample_identity(tone):
    w = tone(100.0)
    out = resample(w, 4000)
    assert len(out) == len(w)
    assert np.max(np.abs(out.samples - w.samples)) < 1e-9


def test_resample_length_arithmetic(tone):
    w = tone(100.0, sample_rate=4000, n=4000)
    out = resample(w, 16000)
    assert len(out) == 16000
    assert out.sample_rate == 16000


def test_resample_preserves_tone_frequency(tone):
    w = tone(100.0, sample_rate=4000, n=4000)
    up = resample(w, 16000)
    bin_width = 16000 / len(up)
    assert abs(dominant_frequency(up.samples, 16000) - 100.0) <= bin_width
    down = resample(up, 4000)
    bin_width = 4000 / len(down)
    assert abs(dominant_frequency(down.samples, 4000) - 100.0) <= bin_width


@given(n=st.integers(1, 5000), sr=st.integers(1, 48000),
       target=st.integers(1, 48000))
@settings(max_examples=60, deadline=None)
def test_resample_length_formula(n, sr, target):
    # independent oracle: round-half-up of the exact rational length
    expected = int(Fraction(n * target, sr) + Fraction(1, 2))
    if expected == 0:
        return
    w = Waveform(np.zeros(n), sr)
    assert len(resample(w, target)) == expected


# ---------------------------------------------------------------------------
# embeddings


def test_embeddings_load_768(tmp_path):
    rng = np.random.default_rng(1)
    embs = [Embedding(f"e{i}", rng.normal(size=768)) for i in range(2)]
    path = tmp_path / "e.csv"
    save_embeddings(path, embs)
    loaded = load_embeddings(path)
    assert len(loaded) == 2
    assert all(len(e.vector) == 768 for e in loaded)
    assert np.allclose(loaded[0].vector, embs[0].vector)


def test_embeddings_empty_file(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("")
    assert load_embeddings(path) == []
    save_embeddings(path, [])
    assert load_embeddings(path) == []


def test_embeddings_dimension_mismatch(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("id,v0,v1,v2\n" "a,1.0,2.0,3.0\n" "b,1.0,2.0\n")
    with pytest.raises(ValueError, match="expected 3 values"):
        load_embeddings(path)


def test_embeddings_duplicate_and_nonfinite(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("id,v0\na,1.0\na,2.0\n")
    with pytest.raises(ValueError, match="duplicate id"):
        load_embeddings(path)
    path.write_text("id,v0\na,nan\n")
    with pytest.raises(ValueError, match="non-finite"):
        load_embeddings(path)


def test_embeddings_bad_header(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("name,x0\na,1.0\n")
    with pytest.raises(ValueError, match="header"):
        load_embeddings(path)
