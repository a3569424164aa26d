#
#  test_metrics.py
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
"""Tests for classification metrics.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from clickbait_rnn.errors import DataError
from clickbait_rnn.evaluation import MetricsReport, confusion_metrics, evaluate_predictions, mean_report, roc_auc


def pair_counting_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    pos = probs[labels == 1][:, None]
    neg = probs[labels == 0][None, :]
    return float(((pos > neg).sum() + 0.5 * (pos == neg).sum()) / (pos.size * neg.size))


def test_forced_arithmetic() -> None:
    """Test TP=2, FP=1, FN=1, TN=6."""
    labels = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0]
    probs = [0.9, 0.7, 0.6, 0.2, 0.1, 0.1, 0.3, 0.4, 0.0, 0.45]
    report = confusion_metrics(probs, labels)
    assert (report.tp, report.fp, report.fn, report.tn) == (2, 1, 1, 6)
    assert report.size == 10
    assert report.accuracy == pytest.approx(0.8)
    assert report.precision == pytest.approx(2 / 3)
    assert report.recall == pytest.approx(2 / 3)
    assert report.f1 == pytest.approx(2 / 3)
    assert report.roc_auc is None


def test_perfect() -> None:
    """Test correct predictions score 1 everywhere."""
    report = evaluate_predictions([0.9, 0.1, 0.8, 0.2], [1, 0, 1, 0])
    assert report.values() == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_no_positive_predictions() -> None:
    """Test ratios with a zero denominator are 0."""
    report = confusion_metrics([0.1, 0.2, 0.3], [1, 0, 1])
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
    assert report.accuracy == pytest.approx(1 / 3)

    report = confusion_metrics([0.9, 0.2], [0, 0])
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)


def test_threshold_is_inclusive() -> None:
    """Test a probability equal to the threshold predicts clickbait."""
    assert confusion_metrics([0.5], [1]).tp == 1
    assert confusion_metrics([0.5], [1], threshold=0.6).fn == 1


def test_counts_reproduce_ratios() -> None:
    """Test the ratios follow from the reported confusion counts."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        labels = rng.integers(0, 2, size=40)
        report = confusion_metrics(rng.random(40), labels)
        tp, fp, tn, fn = report.tp, report.fp, report.tn, report.fn
        assert report.accuracy == (tp + tn) / 40
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        assert report.precision == pytest.approx(precision, abs=1e-15)
        assert report.recall == pytest.approx(recall, abs=1e-15)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        assert report.f1 == pytest.approx(f1, abs=1e-12)


@pytest.mark.parametrize(
    ("probs", "labels"),
    [([0.1, 0.2], [1]), ([], []), ([0.1, 0.2], [1, 2]), ([[0.1]], [[1]])],
)
def test_invalid_inputs(probs: list[float], labels: list[int]) -> None:
    """Test mismatched, empty or non-binary inputs are rejected."""
    with pytest.raises(DataError):
        confusion_metrics(probs, labels)


@pytest.mark.parametrize(
    ("probs", "labels", "expected"),
    [
        ([0.9, 0.8, 0.3], [1, 0, 1], 0.5),
        ([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0], 1.0),
        ([0.1, 0.2, 0.8], [1, 1, 0], 0.0),
        ([0.4, 0.4, 0.4, 0.4], [1, 0, 1, 0], 0.5),
    ],
)
def test_roc_auc(probs: list[float], labels: list[int], expected: float) -> None:
    """Test hand-counted ROC-AUC values."""
    assert roc_auc(probs, labels) == expected


def test_roc_auc_pair_counting() -> None:
    """Test ROC-AUC equals exhaustive pair counting, ties included."""
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        labels[:2] = (0, 1)
        probs = np.round(rng.random(n), int(rng.integers(1, 4)))
        assert roc_auc(probs, labels) == pair_counting_auc(probs, labels)


def test_roc_auc_monotone_invariance() -> None:
    """Test ROC-AUC only depends on the order of the scores."""
    rng = np.random.default_rng(2)
    probs = np.round(rng.random(100), 2) + 0.01
    labels = rng.integers(0, 2, size=100)
    assert roc_auc(np.log(probs), labels) == roc_auc(probs, labels)
    assert roc_auc(probs**3, labels) == roc_auc(probs, labels)


def test_roc_auc_single_class() -> None:
    """Test ROC-AUC is undefined for a single class."""
    with pytest.raises(DataError, match="single class"):
        roc_auc([0.1, 0.9], [1, 1])

    report = evaluate_predictions([0.1, 0.9], [0, 0])
    assert report.roc_auc is None
    assert np.isnan(report.values()[-1])


def test_mean_report() -> None:
    """Test metrics are averaged and counts summed."""
    a = MetricsReport(0.8, 0.5, 1.0, 2 / 3, 0.9, 1, 1, 3, 0)
    b = MetricsReport(0.6, 1.0, 0.5, 2 / 3, 0.7, 1, 0, 2, 2)
    mean = mean_report([a, b])
    assert_allclose(mean.values(), [0.7, 0.75, 0.75, 2 / 3, 0.8])
    assert (mean.tp, mean.fp, mean.tn, mean.fn) == (2, 1, 5, 2)

    undefined = MetricsReport(1.0, 0.0, 0.0, 0.0, None, 0, 0, 3, 0)
    assert mean_report([a, undefined]).roc_auc is None
    with pytest.raises(DataError):
        mean_report([])
