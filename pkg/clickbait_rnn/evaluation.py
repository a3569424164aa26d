#
#  evaluation.py
#
#  Copyright (c) 2024 The clickbait-rnn Authors
#
#  This file is part of clickbait-rnn.
#
#  clickbait-rnn is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  clickbait-rnn is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with clickbait-rnn. If not, see <http://www.gnu.org/licenses/>.
"""Compute classification metrics and run stratified cross-validation.

Confusion-based metrics come from scikit-learn with the convention that a
ratio with a zero denominator is 0. ROC-AUC is the Mann-Whitney statistic
computed from average ranks, which counts tied (positive, negative) pairs as
one half.

Cross-validation trains one model per (configuration, fold) pair on the
other folds and scores the held-out one. Metrics are averaged over folds;
metrics of the predictions pooled from every fold are available as well.
"""
import csv
import io
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import Callable, Final, Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import rankdata
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from clickbait_rnn.classifier import ModelConfig, predict_proba, train
from clickbait_rnn.errors import ConfigError, DataError, NumericError
from clickbait_rnn.labels import CellKind, FeatureMode
from clickbait_rnn.text import EmbeddingTable, HeadlineExample, build_vocab

_LOGGER: Final = getLogger(__name__)
"""Logging object."""

METRIC_NAMES: Final = ("accuracy", "precision", "recall", "f1", "roc_auc")
"""Metric names in report order."""

METRIC_TITLES: Final = ("Accuracy", "Precision", "Recall", "F1-Score", "ROC-AUC")
"""Column titles of rendered tables."""

GridEntry = tuple[CellKind, FeatureMode]
"""An (architecture, feature mode) pair."""

FULL_GRID: Final[tuple[GridEntry, ...]] = tuple(
    (arch, features)
    for arch in (CellKind.RNN, CellKind.GRU, CellKind.LSTM)
    for features in (FeatureMode.CE, FeatureMode.WE, FeatureMode.CE_WE)
)
"""Every configuration, in table order."""

REFERENCE_RESULTS: Final[dict[GridEntry, tuple[float, float, float, float, float]]] = {
    (CellKind.RNN, FeatureMode.CE): (0.9629, 0.9513, 0.9757, 0.9633, 0.9929),
    (CellKind.RNN, FeatureMode.WE): (0.9650, 0.9722, 0.9573, 0.9647, 0.9935),
    (CellKind.RNN, FeatureMode.CE_WE): (0.9666, 0.9530, 0.9787, 0.9655, 0.9938),
    (CellKind.GRU, FeatureMode.CE): (0.9661, 0.9833, 0.9482, 0.9634, 0.9945),
    (CellKind.GRU, FeatureMode.WE): (0.9769, 0.9761, 0.9778, 0.9770, 0.9965),
    (CellKind.GRU, FeatureMode.CE_WE): (0.9774, 0.9662, 0.9893, 0.9776, 0.9979),
    (CellKind.LSTM, FeatureMode.CE): (0.9673, 0.9849, 0.9492, 0.9667, 0.9950),
    (CellKind.LSTM, FeatureMode.WE): (0.9787, 0.9759, 0.9815, 0.9787, 0.9970),
    (CellKind.LSTM, FeatureMode.CE_WE): (0.9819, 0.9839, 0.9799, 0.9819, 0.9980),
}
"""Reference 10-fold results on the 15,000 headline corpus, in :data:`METRIC_NAMES` order."""

BASELINE_RESULTS: Final[dict[str, tuple[float, float, float, float, float]]] = {
    "Feature-based SVM": (0.93, 0.95, 0.90, 0.93, 0.97),
    "Feature-based Decision Tree": (0.90, 0.91, 0.89, 0.90, 0.90),
    "Feature-based Random Forest": (0.92, 0.94, 0.91, 0.92, 0.97),
}
"""Results of models using structural, lexical and lexicon features on the same corpus."""


def model_name(arch: CellKind, features: FeatureMode) -> str:
    """Table name of a configuration, e.g. ``BiLSTM (CE+WE)``."""
    return f"{arch.display_name} ({features.display_name})"


@dataclass(frozen=True)
class MetricsReport:
    """Metrics of one evaluation.

    ``roc_auc`` is None when the labels hold a single class. In averaged
    reports the confusion counts are totals over the averaged reports.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: Optional[float]
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def size(self) -> int:
        """Number of evaluated examples."""
        return self.tp + self.fp + self.tn + self.fn

    def values(self) -> tuple[float, ...]:
        """Metric values in :data:`METRIC_NAMES` order; NaN for an undefined ROC-AUC."""
        auc = self.roc_auc if self.roc_auc is not None else float("nan")
        return self.accuracy, self.precision, self.recall, self.f1, auc


def _check_inputs(probs: ArrayLike, labels: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 1 or p.shape != y.shape:
        raise DataError(f"probabilities of shape {p.shape} and labels of shape {y.shape} do not match")
    if p.size == 0:
        raise DataError("cannot evaluate zero predictions")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return p, y


def confusion_metrics(probs: ArrayLike, labels: ArrayLike, threshold: float = 0.5) -> MetricsReport:
    """Threshold probabilities and compute the confusion-based metrics.

    A probability at least ``threshold`` predicts clickbait.

    Args:
      probs: [N] probabilities.
      labels: [N] gold labels in {0, 1}.
      threshold: decision threshold.

    Returns:
      a report without ROC-AUC.
    """
    p, y = _check_inputs(probs, labels)
    predicted = (p >= threshold).astype(np.int64)
    tn, fp, fn, tp = (int(v) for v in confusion_matrix(y, predicted, labels=[0, 1]).ravel())
    precision, recall, f1, _ = precision_recall_fscore_support(
        y, predicted, average="binary", pos_label=1, zero_division=0
    )
    return MetricsReport((tp + tn) / len(y), float(precision), float(recall), float(f1), None, tp, fp, tn, fn)


def roc_auc(probs: ArrayLike, labels: ArrayLike) -> float:
    """Area under the ROC curve.

    The fraction of (positive, negative) pairs where the positive example
    scores higher, ties counting one half:

    .. math::

       \\mathrm{AUC} = \\frac{\\sum_{i \\in P} r_i - |P|(|P| + 1)/2}{|P| \\cdot |N|}

    where :math:`r_i` are average ranks of the probabilities.

    Args:
      probs: [N] scores.
      labels: [N] gold labels in {0, 1}.

    Returns:
      the AUC in [0, 1].
    """
    p, y = _check_inputs(probs, labels)
    positives = int(y.sum())
    negatives = len(y) - positives
    if positives == 0 or negatives == 0:
        raise DataError("ROC-AUC is undefined when the labels hold a single class")
    ranks = rankdata(p, method="average")
    u = float(ranks[y == 1].sum()) - positives * (positives + 1) / 2.0
    return u / (positives * negatives)


def evaluate_predictions(probs: ArrayLike, labels: ArrayLike, threshold: float = 0.5) -> MetricsReport:
    """Compute every metric; ROC-AUC is None when the labels hold a single class."""
    report = confusion_metrics(probs, labels, threshold)
    y = np.asarray(labels)
    if 0 < int(y.sum()) < len(y):
        return replace(report, roc_auc=roc_auc(probs, labels))
    _LOGGER.warning("ROC-AUC is undefined for %d examples of a single class", len(y))
    return report


def mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Arithmetic mean of the metrics of reports; counts are summed."""
    if not reports:
        raise DataError("cannot average zero reports")
    aucs = [r.roc_auc for r in reports]
    return MetricsReport(
        float(np.mean([r.accuracy for r in reports])),
        float(np.mean([r.precision for r in reports])),
        float(np.mean([r.recall for r in reports])),
        float(np.mean([r.f1 for r in reports])),
        None if any(a is None for a in aucs) else float(np.mean([a for a in aucs if a is not None])),
        sum(r.tp for r in reports),
        sum(r.fp for r in reports),
        sum(r.tn for r in reports),
        sum(r.fn for r in reports),
    )


@dataclass(frozen=True)
class FoldPlan:
    """Partition of example indices into folds."""

    folds: tuple[NDArray[np.int64], ...]
    """Sorted held-out indices of every fold."""
    class_counts: tuple[tuple[int, int], ...]
    """(negatives, positives) of every fold."""

    @property
    def k(self) -> int:
        """Number of folds."""
        return len(self.folds)

    def test_indices(self, fold: int) -> NDArray[np.int64]:
        """Held-out indices of a fold."""
        return self.folds[fold]

    def train_indices(self, fold: int) -> NDArray[np.int64]:
        """Indices of every other fold, sorted."""
        return np.sort(np.concatenate([f for i, f in enumerate(self.folds) if i != fold]))


def stratified_kfold(labels: ArrayLike, k: int, seed: Optional[int] = None) -> FoldPlan:
    """Split indices into k folds preserving class proportions.

    Members of every class are shuffled with a generator seeded by ``seed``
    and dealt to the folds in turn. Dealing continues across classes, so
    fold sizes differ by at most one.

    Args:
      labels: [N] labels in {0, 1}.
      k: number of folds.
      seed: shuffling seed.

    Returns:
      the fold plan.
    """
    if k < 2:
        raise ConfigError(f"cross-validation needs at least 2 folds, got {k}")
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    members: list[list[int]] = [[] for _ in range(k)]
    position = 0
    for label in (0, 1):
        indices = np.flatnonzero(y == label)
        if len(indices) < k:
            raise DataError(f"class {label} has {len(indices)} examples, fewer than {k} folds")
        for index in rng.permutation(indices):
            members[position % k].append(int(index))
            position += 1
    folds = tuple(np.array(sorted(m), dtype=np.int64) for m in members)
    counts = tuple((int((y[f] == 0).sum()), int((y[f] == 1).sum())) for f in folds)
    return FoldPlan(folds, counts)


@dataclass(frozen=True)
class FoldTask:
    """Everything needed to train and score one fold; picklable for worker processes."""

    fold: int
    config: ModelConfig
    training: list[HeadlineExample]
    testing: list[HeadlineExample]
    word_table: Optional[EmbeddingTable] = None
    """Word vectors of any vocabulary covering the data; re-aligned to the training vocabulary."""


def run_fold(task: FoldTask) -> NDArray[np.float64]:
    """Train on the training part of a fold and score its held-out part.

    The vocabulary is built from the training part only.

    Returns:
      probabilities of the held-out examples, in order.
    """
    config = task.config
    vocab = build_vocab(task.training, config.min_count)
    table = None
    if config.features.uses_words and task.word_table is not None:
        table = task.word_table.reindex(vocab)
    result = train(task.training, config, table, vocab)
    return predict_proba(task.testing, result.params, vocab)


FoldRunner = Callable[[FoldTask], NDArray[np.float64]]
"""Function mapping a fold to the probabilities of its held-out examples."""


@dataclass
class ConfigResult:
    """Cross-validation outcome of one configuration."""

    arch: CellKind
    features: FeatureMode
    folds: list[MetricsReport] = field(default_factory=list)
    mean: Optional[MetricsReport] = None
    pooled: Optional[MetricsReport] = None
    error: Optional[Exception] = None
    """Error which aborted the configuration."""

    @property
    def name(self) -> str:
        return model_name(self.arch, self.features)


def parse_grid(text: str) -> list[GridEntry]:
    """Parse a grid description.

    Args:
      text: ``all`` or a comma separated list of ``arch:features`` items,
        e.g. ``lstm:ce+we,gru:we``.

    Returns:
      the configurations, in the given order.
    """
    if text.strip().lower() == "all":
        return list(FULL_GRID)
    grid: list[GridEntry] = []
    for item in text.split(","):
        arch, sep, features = item.strip().lower().partition(":")
        try:
            if not sep:
                raise ValueError("expected 'arch:features'")
            grid.append((CellKind(arch), FeatureMode(features)))
        except ValueError as e:
            raise ConfigError(f"invalid grid item {item.strip()!r}: {e}") from e
    return grid


def _with_context(error: Exception, context: str) -> Exception:
    if isinstance(error, (DataError, ConfigError, NumericError)):
        wrapped = type(error)(f"{context}: {error}")
        wrapped.__cause__ = error
        return wrapped
    return error


def crossval_run(
    data: Sequence[HeadlineExample],
    grid: Iterable[GridEntry],
    config: ModelConfig,
    k: int = 10,
    seed: Optional[int] = None,
    word_table: Optional[EmbeddingTable] = None,
    jobs: int = 1,
    pooled: bool = False,
    threshold: float = 0.5,
    runner: FoldRunner = run_fold,
) -> list[ConfigResult]:
    """Cross-validate every configuration of a grid.

    All configurations share one fold plan. Every (configuration, fold)
    pair trains with its own seed spawned from ``seed``, so results do not
    depend on ``jobs``. An error in a fold aborts its configuration only;
    the error is kept in the result.

    Args:
      data: labeled examples.
      grid: configurations to evaluate.
      config: base model configuration; ``arch``, ``features`` and ``seed``
        are replaced per run.
      k: number of folds.
      seed: seed of the fold plan and of the training runs; ``config.seed``
        if omitted.
      word_table: word vectors; required when a configuration uses words.
      jobs: number of worker processes.
      pooled: also compute metrics over the predictions of every fold.
      threshold: decision threshold.
      runner: trains and scores a fold.

    Returns:
      one result per configuration, in grid order.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("the configuration grid is empty")
    if word_table is None and any(features.uses_words for _, features in grid):
        raise ConfigError("word embeddings are required by the WE and CE+WE feature modes")
    if jobs < 1:
        raise ConfigError(f"jobs must be positive, got {jobs}")
    seed = seed if seed is not None else config.seed
    labels = np.array([int(e.label) for e in data], dtype=np.int64)
    plan = stratified_kfold(labels, k, seed)
    _LOGGER.info("Fold sizes: %s", ", ".join(f"{n + p} ({p} clickbait)" for n, p in plan.class_counts))
    run_seeds = np.random.SeedSequence(seed).spawn(len(grid) * k)

    tasks = []
    for c, (arch, features) in enumerate(grid):
        for fold in range(k):
            run_config = replace(
                config, arch=arch, features=features, seed=int(run_seeds[c * k + fold].generate_state(1)[0])
            )
            tasks.append(
                FoldTask(
                    fold,
                    run_config,
                    [data[i] for i in plan.train_indices(fold)],
                    [data[i] for i in plan.test_indices(fold)],
                    word_table if features.uses_words else None,
                )
            )

    outcomes: list[Union[NDArray[np.float64], Exception]]
    if jobs == 1:
        outcomes = []
        for task in tasks:
            _LOGGER.info("%s fold %d/%d", model_name(task.config.arch, task.config.features), task.fold + 1, k)
            try:
                outcomes.append(runner(task))
            except (DataError, ConfigError, NumericError) as e:
                outcomes.append(e)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures: list[Future[NDArray[np.float64]]] = [executor.submit(runner, task) for task in tasks]
            outcomes = []
            for future in futures:
                error = future.exception()
                if error is not None and not isinstance(error, (DataError, ConfigError, NumericError)):
                    raise error
                outcomes.append(error if isinstance(error, Exception) else future.result())

    results = []
    for c, (arch, features) in enumerate(grid):
        result = ConfigResult(arch, features)
        fold_probs = []
        for fold in range(k):
            outcome = outcomes[c * k + fold]
            if isinstance(outcome, Exception):
                result.error = _with_context(outcome, f"{result.name} fold {fold + 1}")
                _LOGGER.error("%s aborted: %s", result.name, result.error)
                break
            report = evaluate_predictions(outcome, labels[plan.test_indices(fold)], threshold)
            _LOGGER.info("%s fold %d/%d: accuracy=%.4f", result.name, fold + 1, k, report.accuracy)
            result.folds.append(report)
            fold_probs.append(outcome)
        if result.error is None:
            result.mean = mean_report(result.folds)
            if pooled:
                order = np.concatenate([plan.test_indices(f) for f in range(k)])
                result.pooled = evaluate_predictions(np.concatenate(fold_probs), labels[order], threshold)
        results.append(result)
    return results


def _align(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for row in [header, *rows]:
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _cells(values: Iterable[float]) -> list[str]:
    return ["n/a" if np.isnan(v) else f"{v:.4f}" for v in values]


def render_table(results: Sequence[ConfigResult], pooled: bool = False) -> str:
    """Render results as an aligned plain-text table.

    Rows follow table order: architectures RNN, GRU, LSTM, each with CE, WE
    and CE+WE features.

    Args:
      results: cross-validation results.
      pooled: show pooled metrics instead of fold averages.

    Returns:
      the table text.
    """
    order = {entry: i for i, entry in enumerate(FULL_GRID)}
    rows = []
    for result in sorted(results, key=lambda r: order[(r.arch, r.features)]):
        report = result.pooled if pooled else result.mean
        if report is None:
            rows.append([result.name, "failed"] + [""] * (len(METRIC_TITLES) - 1))
        else:
            rows.append([result.name, *_cells(report.values())])
    return _align(["Model", *METRIC_TITLES], rows)


def render_baseline_comparison(result: ConfigResult) -> str:
    """Render the mean metrics of a configuration beside the feature-based baselines and its reference row."""
    if result.mean is None:
        raise DataError(f"{result.name} has no results to compare")
    rows = [[name, *_cells(values)] for name, values in BASELINE_RESULTS.items()]
    reference = REFERENCE_RESULTS.get((result.arch, result.features))
    if reference is not None:
        rows.append([f"{result.name} reference", *_cells(reference)])
    rows.append([result.name, *_cells(result.mean.values())])
    return _align(["Model", *METRIC_TITLES], rows)


def render_csv(results: Sequence[ConfigResult]) -> str:
    """Render results as CSV.

    One row per fold, then a ``mean`` row and, when computed, a ``pooled``
    row per configuration. Values have six decimals, so identical results
    give identical text.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["arch", "features", "fold", *METRIC_NAMES])
    for result in results:
        rows: list[tuple[str, MetricsReport]] = [(str(i), r) for i, r in enumerate(result.folds, start=1)]
        if result.mean is not None:
            rows.append(("mean", result.mean))
        if result.pooled is not None:
            rows.append(("pooled", result.pooled))
        for fold, report in rows:
            values = ["" if np.isnan(v) else f"{v:.6f}" for v in report.values()]
            writer.writerow([result.arch.value, result.features.value, fold, *values])
    return buffer.getvalue()
