"""Phonocardiogram preprocessing, segmentation, and murmur-classification
evaluation toolkit."""

from .augment import AugmentConfig, augment_chunk, mute_random, pitch_shift, spec_mask
from .classifier import KnnConfig, KnnModel, knn_fit, knn_predict, knn_score
from .evaluation import (Aggregate, ConfusionMatrix, EvalItem, MetricsReport,
                         auroc, compute_metrics, confusion_matrix, make_folds,
                         run_cv)
from .features import (FeatureConfig, FeatureVector, MelSpectrogram,
                       mel_filterbank, mel_spectrogram, pool_features,
                       stft_magnitude)
from .io import (Embedding, Label, RecordingMeta, SegmentationTrack, Waveform,
                 extract_s1_onsets, load_embeddings, load_manifest,
                 load_segmentation, load_wav, resample, save_wav)
from .preprocess import (BandpassSpec, FilterCoefficients, design_bandpass,
                         filter_zero_phase, frequency_response, minmax_normalize)
from .segment import (Chunk, SegmentConfig, SegmentMethod, StretchSpec,
                      chunk_cycles, chunk_fixed, compute_stretch_factor,
                      stretch_to_length)
from .synth import SynthConfig, generate_dataset, generate_recording

__version__ = "0.1.0"
