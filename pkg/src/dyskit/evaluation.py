"""Repeated random-split evaluation with per-class accuracy."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple

import numpy as np

from dyskit.corpus import Dataset
from dyskit.errors import ClassTooSmall, LengthMismatch, MissingClass
from dyskit.knn import DEFAULT_K, KnnModel, knn_classify, knn_train
from dyskit.labels import ClassLabel
from dyskit.svm import SvmModel, SvmTrainConfig, svm_fit


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def split_dataset(dataset: Dataset, config: SplitConfig = SplitConfig()) -> tuple[Dataset, Dataset]:
    """Shuffle by ``config.seed`` and cut at ``round(train_fraction * size)``.

    When stratified, each class is shuffled and cut on its own, in
    ``ClassLabel`` order, from a single generator.
    """
    rng = np.random.default_rng(config.seed)
    if config.stratified:
        groups = [dataset.class_indices(label) for label in ClassLabel]
    else:
        groups = [list(range(len(dataset)))]
    train, test = [], []
    for label, idx in zip(ClassLabel, groups):
        n_train = _round_half_up(config.train_fraction * len(idx))
        if n_train == 0 or n_train == len(idx):
            what = label.value if config.stratified else "dataset"
            raise ClassTooSmall(
                f"{what} has {len(idx)} items; a {config.train_fraction:g} split leaves "
                f"{n_train} for training and {len(idx) - n_train} for testing"
            )
        perm = [idx[i] for i in rng.permutation(len(idx))]
        train += perm[:n_train]
        test += perm[n_train:]
    return dataset.subset(sorted(train)), dataset.subset(sorted(test))


class Confusion(NamedTuple):
    """One-vs-rest counts with the named class as positive."""

    tp: int
    fn: int
    fp: int
    tn: int


@dataclass(frozen=True)
class ClassScores:
    accuracy: dict[ClassLabel, float]
    confusion: dict[ClassLabel, Confusion]


def per_class_accuracy(predictions, truth) -> ClassScores:
    predictions = [ClassLabel(p) for p in predictions]
    truth = [ClassLabel(t) for t in truth]
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truth)} truth labels")
    if not truth:
        raise MissingClass("no test items")
    accuracy, confusion = {}, {}
    for label in ClassLabel:
        tp = sum(p is label and t is label for p, t in zip(predictions, truth))
        fn = sum(p is not label and t is label for p, t in zip(predictions, truth))
        fp = sum(p is label and t is not label for p, t in zip(predictions, truth))
        tn = len(truth) - tp - fn - fp
        if tp + fn == 0:
            raise MissingClass(f"no {label.value} items in the truth labels")
        accuracy[label] = 100.0 * tp / (tp + fn)
        confusion[label] = Confusion(tp, fn, fp, tn)
    return ClassScores(accuracy, confusion)


# classifier specs -----------------------------------------------------------

@dataclass(frozen=True)
class KnnSpec:
    k: int = DEFAULT_K

    id = "knn"

    @property
    def name(self) -> str:
        return f"k-NN (k={self.k})"

    def train(self, dataset: Dataset) -> KnnModel:
        return knn_train(dataset.X, dataset.labels, k=self.k, aggregation=dataset.aggregation,
                         frontend=dataset.frontend)

    def predict(self, model: KnnModel, x) -> tuple[ClassLabel, float]:
        label, votes = knn_classify(model, x, self.k)
        return label, votes[label] / self.k


@dataclass(frozen=True)
class SvmSpec:
    config: SvmTrainConfig = field(default_factory=SvmTrainConfig)

    id = "svm"

    @property
    def name(self) -> str:
        return f"SVM ({self.config.kernel.describe()}, C={self.config.C:g})"

    def train(self, dataset: Dataset) -> SvmModel:
        return svm_fit(dataset.X, dataset.labels, self.config, aggregation=dataset.aggregation,
                       frontend=dataset.frontend)

    def predict(self, model: SvmModel, x) -> tuple[ClassLabel, float]:
        value = model.decision(x)
        return (model.positive_label if value >= 0 else model.negative_label), value


# reports --------------------------------------------------------------------

class Prediction(NamedTuple):
    source_id: str
    truth: ClassLabel
    predicted: ClassLabel
    score: float


@dataclass(frozen=True)
class TrialResult:
    index: int
    seed: int
    scores: ClassScores
    predictions: tuple[Prediction, ...]
    train_counts: dict[ClassLabel, int]
    test_counts: dict[ClassLabel, int]
    converged: bool = True


@dataclass(frozen=True)
class EvalReport:
    classifier_id: str
    classifier_name: str
    trials: tuple[TrialResult, ...]
    split: SplitConfig
    averages: dict[ClassLabel, float] = field(init=False)

    def __post_init__(self):
        avg = {label: float(np.mean([t.scores.accuracy[label] for t in self.trials])) for label in ClassLabel}
        object.__setattr__(self, "averages", avg)


def run_trials(dataset: Dataset, classifier, n_trials: int = 3, base_seed: int = 0,
               train_fraction: float = 0.8, stratified: bool = True) -> EvalReport:
    """Train and test on ``n_trials`` random splits seeded ``base_seed + t``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trials = []
    for t in range(n_trials):
        split = SplitConfig(train_fraction, base_seed + t, stratified)
        train, test = split_dataset(dataset, split)
        model = classifier.train(train)
        preds = []
        for item in test:
            label, score = classifier.predict(model, item.features)
            preds.append(Prediction(item.source_id, item.label, label, float(score)))
        scores = per_class_accuracy([p.predicted for p in preds], [p.truth for p in preds])
        trials.append(TrialResult(
            index=t,
            seed=split.seed,
            scores=scores,
            predictions=tuple(preds),
            train_counts={c: len(train.class_indices(c)) for c in ClassLabel},
            test_counts={c: len(test.class_indices(c)) for c in ClassLabel},
            converged=getattr(model, "converged", True),
        ))
    return EvalReport(classifier.id, classifier.name, tuple(trials),
                      SplitConfig(train_fraction, base_seed, stratified))


def format_percent(value: float) -> str:
    """Two decimals, halves rounded up."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_table(reports) -> str:
    """Sets as rows, classifier x class as columns, with an average row."""
    reports = list(reports)
    if not reports:
        return ""
    n_trials = len(reports[0].trials)
    if any(len(r.trials) != n_trials for r in reports):
        raise ValueError("reports must share the number of trials")
    classes = list(ClassLabel)
    cell = 10
    group = cell * len(classes)
    row_head = 28
    lines = []

    first = reports[0].trials[0]
    total = {c: first.train_counts[c] + first.test_counts[c] for c in classes}
    lines.append(f"{'Speech data':<{row_head}}{'Samples':>{cell}}{'Training':>{cell}}{'Testing':>{cell}}")
    for c in classes:
        lines.append(f"{c.value.capitalize() + ' speech':<{row_head}}{total[c]:>{cell}}"
                     f"{first.train_counts[c]:>{cell}}{first.test_counts[c]:>{cell}}")
    lines.append("")

    lines.append(f"{'Data set':<{row_head}}" + "".join(f" | {r.classifier_name:^{group}}" for r in reports))
    lines.append(" " * row_head + "".join(
        " | " + "".join(f"{c.value.capitalize():>{cell}}" for c in classes) for _ in reports))
    lines.append("-" * len(lines[-1]))
    for t in range(n_trials):
        cells = "".join(
            " | " + "".join(f"{format_percent(r.trials[t].scores.accuracy[c]):>{cell}}" for c in classes)
            for r in reports
        )
        lines.append(f"{'Set ' + str(t + 1):<{row_head}}{cells}")
    cells = "".join(
        " | " + "".join(f"{format_percent(r.averages[c]):>{cell}}" for c in classes) for r in reports
    )
    lines.append(f"{'Average Classification (%)':<{row_head}}{cells}")
    for r in reports:
        unconverged = [t.index + 1 for t in r.trials if not t.converged]
        if unconverged:
            lines.append(f"note: {r.classifier_name} did not converge on set(s) {unconverged}")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def report_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "classifier", "class", "accuracy", "tp", "fn", "fp", "tn"])
    for r in reports:
        for t in r.trials:
            for c in ClassLabel:
                writer.writerow([t.index + 1, r.classifier_id, c.value, format_percent(t.scores.accuracy[c]),
                                 *t.scores.confusion[c]])
        for c in ClassLabel:
            writer.writerow(["average", r.classifier_id, c.value, format_percent(r.averages[c]), "", "", "", ""])
    return buf.getvalue()
