"""Evaluation suite for coarse-subject predictions.

Per-class and support-weighted precision/recall/F1 (weighted means
``p = sum(c_i * p_i) / n`` over classes retained by the minimum-class-size
filter; r and f analogously), class-imbalance entropy normalized by ``ln k``,
confusion matrices, precision-recall curves over descending confidence,
confidence-threshold automation analysis, and stratified k-fold
cross-validation.
"""

from __future__ import annotations

import csv
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .classifier import Hyperparams, predict, train_variant
from .corpus import ArticleRecord, PredictionRecord
from .errors import (
    AllClassesFiltered,
    LengthMismatch,
    MissingScore,
    TooFewPerClass,
    UnknownDe,
)
from .features import MethodVariant

DEFAULT_MIN_CLASS_SIZE = 200


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[t][p] = number of records with true class t predicted as p."""

    classes: tuple[int, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, subject: int) -> int:
        return self.classes.index(subject)


@dataclass(frozen=True)
class ClassMetrics:
    subject: int
    support: int
    precision: float
    recall: float
    f1: float
    share: float  # support / total evaluated records


class WeightedMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float


class EntropyReport(NamedTuple):
    entropy: float
    normalized: float
    k_effective: int


@dataclass(frozen=True)
class ThresholdReport:
    threshold: float
    n_automated: int
    automation_rate: float
    precision_automated: float


@dataclass(frozen=True, eq=False)
class EvalReport:
    method: str
    n_records: int
    min_class_size: int
    per_class: tuple[ClassMetrics, ...]  # retained classes only
    weighted: WeightedMetrics
    entropy: float
    normalized_entropy: float
    k_effective: int
    confusion: ConfusionMatrix  # unfiltered


def confusion(truth: Sequence[int], pred: Sequence[int]) -> ConfusionMatrix:
    """Count matrix over the union of observed subjects (rows = true)."""
    if len(truth) != len(pred) or len(truth) == 0:
        raise LengthMismatch(
            f"need equal, non-empty truth/pred; got {len(truth)} and {len(pred)}"
        )
    classes = tuple(sorted(set(truth) | set(pred)))
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(counts, ([index[t] for t in truth], [index[p] for p in pred]), 1)
    return ConfusionMatrix(classes=classes, counts=counts)


def class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    """Per-class precision/recall/F1 with the 0-when-undefined convention."""
    diag = np.diag(cm.counts).astype(np.float64)
    row_sums = cm.counts.sum(axis=1).astype(np.float64)  # support of true class
    col_sums = cm.counts.sum(axis=0).astype(np.float64)  # times predicted
    total = cm.total
    out = []
    for i, subject in enumerate(cm.classes):
        p = float(diag[i] / col_sums[i]) if col_sums[i] > 0 else 0.0
        r = float(diag[i] / row_sums[i]) if row_sums[i] > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        out.append(
            ClassMetrics(
                subject=subject,
                support=int(row_sums[i]),
                precision=p,
                recall=r,
                f1=f,
                share=float(row_sums[i] / total),
            )
        )
    return out


def weighted_metrics(
    per_class: Sequence[ClassMetrics], min_class_size: int = DEFAULT_MIN_CLASS_SIZE
) -> WeightedMetrics:
    """Support-weighted averages over classes meeting the size filter.

    The weighted F1 averages per-class f values (not the harmonic mean of the
    weighted precision and recall).
    """
    retained = [m for m in per_class if m.support >= min_class_size]
    if not retained:
        raise AllClassesFiltered(f"no class has support >= {min_class_size}")
    n = sum(m.support for m in retained)
    return WeightedMetrics(
        precision=float(sum(m.support * m.precision for m in retained) / n),
        recall=float(sum(m.support * m.recall for m in retained) / n),
        f1=float(sum(m.support * m.f1 for m in retained) / n),
    )


def normalized_entropy(
    supports: Sequence[int], min_class_size: int = DEFAULT_MIN_CLASS_SIZE
) -> EntropyReport:
    """Class-share entropy (natural log) over retained supports, and H/ln(k)."""
    retained = [s for s in supports if s >= min_class_size]
    if not retained:
        raise AllClassesFiltered(f"no class has support >= {min_class_size}")
    total = sum(retained)
    shares = [s / total for s in retained if s > 0]
    entropy = -sum(p * math.log(p) for p in shares)
    k = len(retained)
    normalized = entropy / math.log(k) if k > 1 else 0.0
    return EntropyReport(entropy=entropy, normalized=normalized, k_effective=k)


def _require_scores(preds: Sequence[PredictionRecord]) -> None:
    for p in preds:
        if p.score is None:
            raise MissingScore(f"prediction for de {p.de:08d} has no score")


def _require_known(preds: Sequence[PredictionRecord], truth: Mapping[int, int]) -> None:
    for p in preds:
        if p.de not in truth:
            raise UnknownDe(f"prediction references unknown de {p.de:08d}")


def pr_curve(
    preds: Sequence[PredictionRecord], truth: Mapping[int, int]
) -> list[tuple[float, float]]:
    """(recall, precision) per distinct score, sweeping confidence downward.

    Recall here is coverage: the fraction of predictions at or above the
    current score. Precision is correctness within that prefix.
    """
    if not preds:
        return []
    _require_scores(preds)
    _require_known(preds, truth)
    ordered = sorted(preds, key=lambda p: -p.score)
    n = len(ordered)
    points: list[tuple[float, float]] = []
    correct = 0
    for i, p in enumerate(ordered):
        correct += int(truth[p.de] == p.coarse)
        is_last_of_score = i + 1 == n or ordered[i + 1].score != p.score
        if is_last_of_score:
            points.append(((i + 1) / n, correct / (i + 1)))
    return points


def threshold_analysis(
    preds: Sequence[PredictionRecord], truth: Mapping[int, int], threshold: float
) -> ThresholdReport:
    """Fraction automatable at score > threshold and its precision.

    Precision over an empty automated set is 1.0 by convention.
    """
    _require_scores(preds)
    _require_known(preds, truth)
    automated = [p for p in preds if p.score > threshold]
    n_automated = len(automated)
    correct = sum(int(truth[p.de] == p.coarse) for p in automated)
    return ThresholdReport(
        threshold=threshold,
        n_automated=n_automated,
        automation_rate=n_automated / len(preds) if preds else 0.0,
        precision_automated=correct / n_automated if n_automated else 1.0,
    )


def evaluate_predictions(
    preds: Sequence[PredictionRecord],
    truth: Mapping[int, int],
    min_class_size: int = DEFAULT_MIN_CLASS_SIZE,
    method: str | None = None,
) -> EvalReport:
    """Full report for one method's predictions against gold subjects.

    The confusion matrix keeps every observed class; the size filter applies
    to the per-class table and the aggregated metrics only.
    """
    _require_known(preds, truth)
    cm = confusion([truth[p.de] for p in preds], [p.coarse for p in preds])
    per_class = class_metrics(cm)
    weighted = weighted_metrics(per_class, min_class_size)
    ent = normalized_entropy([m.support for m in per_class], min_class_size)
    retained = tuple(m for m in per_class if m.support >= min_class_size)
    methods = {p.method for p in preds}
    return EvalReport(
        method=method if method is not None else "+".join(sorted(methods)),
        n_records=len(preds),
        min_class_size=min_class_size,
        per_class=retained,
        weighted=weighted,
        entropy=ent.entropy,
        normalized_entropy=ent.normalized,
        k_effective=ent.k_effective,
        confusion=cm,
    )


# --- cross-validation -------------------------------------------------------


class CvResult(NamedTuple):
    mean_f: float
    std_f: float
    per_fold: tuple[float, ...]


def kfold_cv(
    records: Sequence[ArticleRecord],
    k: int,
    variant: MethodVariant,
    hyperparams: Hyperparams = Hyperparams(),
    seed: int = 0,
    *,
    min_class_size: int = 1,
    strip_formulas: bool = False,
) -> CvResult:
    """Stratified, seeded k-fold cross-validation of the weighted F1.

    Each fold trains the full pipeline (vocabulary included) on the other
    k-1 folds. Returns the mean and population standard deviation.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    by_subject: dict[int, list[ArticleRecord]] = defaultdict(list)
    for rec in sorted(records, key=lambda r: r.de):
        by_subject[rec.primary_subject].append(rec)
    for subject, members in sorted(by_subject.items()):
        if len(members) < k:
            raise TooFewPerClass(
                f"subject {subject} has {len(members)} members, need >= {k} for {k} folds"
            )
    rng = random.Random(seed)
    folds: list[list[ArticleRecord]] = [[] for _ in range(k)]
    for subject in sorted(by_subject):
        members = by_subject[subject][:]
        rng.shuffle(members)
        for i, rec in enumerate(members):
            folds[i % k].append(rec)

    per_fold: list[float] = []
    for i in range(k):
        held_out = folds[i]
        train_set = [rec for j in range(k) if j != i for rec in folds[j]]
        model = train_variant(train_set, variant, hyperparams, strip_formulas=strip_formulas)
        preds = [predict(model, rec) for rec in held_out]
        truth = {rec.de: rec.primary_subject for rec in held_out}
        report = evaluate_predictions(preds, truth, min_class_size)
        per_fold.append(report.weighted.f1)
    arr = np.array(per_fold)
    return CvResult(mean_f=float(arr.mean()), std_f=float(arr.std()), per_fold=tuple(per_fold))


# --- report export ----------------------------------------------------------


def write_report(report: EvalReport, path: str | Path) -> None:
    """One structured text file: summary block plus the per-class table."""
    lines = [
        f"method: {report.method}",
        f"records: {report.n_records}",
        f"min_class_size: {report.min_class_size}",
        f"k_effective: {report.k_effective}",
        f"entropy: {report.entropy:.6f}",
        f"normalized_entropy: {report.normalized_entropy:.6f}",
        f"weighted_precision: {report.weighted.precision:.6f}",
        f"weighted_recall: {report.weighted.recall:.6f}",
        f"weighted_f1: {report.weighted.f1:.6f}",
        "",
        "subject,support,P_i,p,r,f",
    ]
    for m in report.per_class:
        lines.append(
            f"{m.subject:02d},{m.support},{m.share:.6f},{m.precision:.6f},{m.recall:.6f},{m.f1:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true"] + [f"{c:02d}" for c in cm.classes])
        for i, subject in enumerate(cm.classes):
            writer.writerow([f"{subject:02d}"] + [int(v) for v in cm.counts[i]])


def write_pr_curve_csv(points: Sequence[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["recall", "precision"])
        for recall, precision in points:
            writer.writerow([f"{recall:.6f}", f"{precision:.6f}"])


def write_threshold_csv(reports: Sequence[ThresholdReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "n_automated", "automation_rate", "precision_automated"])
        for r in reports:
            writer.writerow(
                [f"{r.threshold:.2f}", r.n_automated, f"{r.automation_rate:.6f}", f"{r.precision_automated:.6f}"]
            )


def write_comparison_csv(rows: Sequence[tuple[str, WeightedMetrics]], path: str | Path) -> None:
    """Method-by-method summary shaped like a results table: method,p,r,f."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "p", "r", "f"])
        for method, w in rows:
            writer.writerow([method, f"{w.precision:.6f}", f"{w.recall:.6f}", f"{w.f1:.6f}"])
