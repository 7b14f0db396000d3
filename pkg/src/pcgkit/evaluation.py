"""Metrics and the patient-wise stratified grouped cross-validation harness.

AUROC uses the Mann-Whitney rank formulation (ties count one half), F2
weights recall four times as heavily as precision, and MCC follows the
standard four-count definition with a zero convention for degenerate
denominators. Folds are assigned per patient, so no patient's recordings
can ever span the train/validation boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .classifier import KnnConfig, KnnModel, knn_score_batch

log = logging.getLogger(__name__)

METRIC_NAMES = ("precision", "recall", "auroc", "mcc", "f2")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    auroc: float | None
    mcc: float
    f2: float
    counts: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall,
            "auroc": self.auroc, "mcc": self.mcc, "f2": self.f2,
            "tp": self.counts.tp, "fp": self.counts.fp,
            "fn": self.counts.fn, "tn": self.counts.tn,
        }


@dataclass
class FoldAssignment:
    by_patient: dict[str, int]
    n_folds: int
    seed: int

    def patients_in(self, fold: int) -> set[str]:
        return {p for p, f in self.by_patient.items() if f == fold}


class Aggregate(Enum):
    PER_CHUNK = "per-chunk"
    PER_RECORDING_MEAN_SCORE = "per-recording-mean-score"


@dataclass
class EvalItem:
    """One classifiable unit: a chunk's (or recording's) vector plus identity."""
    id: str
    recording_id: str
    patient_id: str
    vector: np.ndarray
    label: int


@dataclass
class CvResult:
    reports: list[MetricsReport]
    mean: dict[str, float]
    std: dict[str, float]
    folds: FoldAssignment
    aggregate: Aggregate
    auroc_folds_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate.value,
            "n_folds": self.folds.n_folds,
            "fold_seed": self.folds.seed,
            "auroc_folds_skipped": self.auroc_folds_skipped,
            "per_fold": [r.to_dict() for r in self.reports],
            "mean": self.mean,
            "std": self.std,
        }


def confusion_matrix(predictions: Sequence[int],
                     labels: Sequence[int]) -> ConfusionMatrix:
    """2x2 counts with positive = murmur present."""
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if len(labels) == 0:
        raise ValueError("cannot build a confusion matrix from empty input")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        if p not in (0, 1) or y not in (0, 1):
            raise ValueError("predictions and labels must be 0 or 1")
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outscores a random negative; ties 0.5.

    Computed from average ranks, which equals exhaustive pair counting and
    the trapezoidal area under the ROC curve.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC requires at least one positive and one "
                         "negative label")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def f_beta(precision: float, recall: float, beta: float = 2.0) -> float:
    denom = beta * beta * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denom


def compute_metrics(cm: ConfusionMatrix,
                    scores: Sequence[float] | None = None,
                    labels: Sequence[int] | None = None) -> MetricsReport:
    """Precision, recall, F2, MCC from counts; AUROC from scores if given.

    Zero-denominator conventions: precision and recall fall back to 0, and
    MCC to 0 when any of its four factors is 0.
    """
    tp, fp, fn, tn = cm.tp, cm.fp, cm.fn, cm.tn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f2 = f_beta(precision, recall, beta=2.0)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom > 0 else 0.0
    auc = auroc(scores, labels) if scores is not None else None
    return MetricsReport(precision, recall, auc, mcc, f2, cm)


def make_folds(patients: Sequence[tuple[str, int]], n_folds: int = 10,
               seed: int = 0) -> FoldAssignment:
    """Deterministic stratified fold assignment, one fold per patient.

    Patients are shuffled within each class by the seed and dealt
    round-robin with a fold pointer that continues across classes, keeping
    per-fold class counts within one of perfect stratification and overall
    fold sizes balanced.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    seen: dict[str, int] = {}
    for pid, label in patients:
        if label not in (0, 1):
            raise ValueError(f"patient {pid!r}: label must be 0 or 1")
        if pid in seen:
            raise ValueError(f"duplicate patient id {pid!r}")
        seen[pid] = label
    if len(seen) < n_folds:
        raise ValueError(f"need at least {n_folds} patients, got {len(seen)}")
    rng = np.random.default_rng(seed)
    by_patient: dict[str, int] = {}
    pointer = 0
    for cls in (0, 1):
        members = sorted(p for p, l in seen.items() if l == cls)
        if not members:
            raise ValueError(f"no patients with label {cls}; cannot stratify")
        for idx in rng.permutation(len(members)):
            by_patient[members[idx]] = pointer % n_folds
            pointer += 1
    return FoldAssignment(by_patient, n_folds, seed)


def permute_patient_labels(items: Sequence[EvalItem], seed: int) -> list[EvalItem]:
    """Shuffle labels across patients (all items of a patient move together).

    Null-hypothesis helper: destroys any feature/label association while
    preserving the per-patient grouping structure.
    """
    patients = sorted({it.patient_id for it in items})
    labels = [next(it.label for it in items if it.patient_id == p) for p in patients]
    rng = np.random.default_rng(seed)
    shuffled = [labels[i] for i in rng.permutation(len(labels))]
    new_label = dict(zip(patients, shuffled))
    return [replace_label(it, new_label[it.patient_id]) for it in items]


def replace_label(item: EvalItem, label: int) -> EvalItem:
    return EvalItem(item.id, item.recording_id, item.patient_id, item.vector, label)


def _aggregate_per_recording(val_items: list[EvalItem],
                             scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rec_ids = sorted({it.recording_id for it in val_items})
    rec_scores, rec_labels = [], []
    for rid in rec_ids:
        idx = [i for i, it in enumerate(val_items) if it.recording_id == rid]
        rec_scores.append(float(np.mean(scores[idx])))
        rec_labels.append(val_items[idx[0]].label)
    return np.asarray(rec_scores), np.asarray(rec_labels)


def run_cv(items: Sequence[EvalItem], knn_cfg: KnnConfig, folds: FoldAssignment,
           aggregate: Aggregate = Aggregate.PER_CHUNK,
           train_vectors: np.ndarray | None = None) -> CvResult:
    """Fit on out-of-fold patients, score in-fold items, report per fold.

    train_vectors, when given, replaces item vectors on the training side
    only (e.g. augmented features); validation always uses item.vector.
    Folds whose validation labels are single-class get no AUROC; they are
    excluded from the AUROC mean with a warning. Aggregates are mean and
    sample (n-1) standard deviation across folds.
    """
    items = list(items)
    missing = {it.patient_id for it in items} - set(folds.by_patient)
    if missing:
        raise ValueError(f"patients without a fold assignment: {sorted(missing)[:5]}")
    if train_vectors is not None and len(train_vectors) != len(items):
        raise ValueError("train_vectors must align one-to-one with items")

    reports: list[MetricsReport] = []
    skipped_auroc = 0
    for fold in range(folds.n_folds):
        train_idx = [i for i, it in enumerate(items)
                     if folds.by_patient[it.patient_id] != fold]
        val_idx = [i for i, it in enumerate(items)
                   if folds.by_patient[it.patient_id] == fold]
        if not val_idx:
            log.warning("fold %d has no validation items; skipped", fold)
            continue
        train_pats = {items[i].patient_id for i in train_idx}
        val_pats = {items[i].patient_id for i in val_idx}
        if train_pats & val_pats:
            raise RuntimeError(f"patient leakage in fold {fold}: "
                               f"{sorted(train_pats & val_pats)[:3]}")

        if train_vectors is not None:
            tr_vecs = np.asarray([train_vectors[i] for i in train_idx])
        else:
            tr_vecs = np.asarray([items[i].vector for i in train_idx])
        tr_labels = np.asarray([items[i].label for i in train_idx])
        model = KnnModel(tr_vecs, tr_labels,
                         tuple(items[i].id for i in train_idx))
        val_items = [items[i] for i in val_idx]
        scores = knn_score_batch(model, np.asarray([it.vector for it in val_items]),
                                 knn_cfg)
        if aggregate is Aggregate.PER_RECORDING_MEAN_SCORE:
            scores, labels = _aggregate_per_recording(val_items, scores)
        else:
            labels = np.asarray([it.label for it in val_items])
        preds = (scores >= knn_cfg.threshold).astype(int)
        cm = confusion_matrix(preds.tolist(), labels.tolist())
        if len(set(labels.tolist())) < 2:
            log.warning("fold %d: single-class validation labels; AUROC "
                        "recorded as missing", fold)
            skipped_auroc += 1
            reports.append(compute_metrics(cm))
        else:
            reports.append(compute_metrics(cm, scores, labels))

    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not values:
            mean[name] = math.nan
            std[name] = math.nan
            continue
        mean[name] = float(np.mean(values))
        std[name] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return CvResult(reports, mean, std, folds, aggregate, skipped_auroc)
