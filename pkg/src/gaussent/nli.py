"""Two-way NLI evaluation: thresholded similarity classification and its metrics.

An example scores as similarity(hypothesis || premise). Entailment collapses
against {neutral, contradiction}; a score strictly greater than the threshold
predicts entailment. The threshold grid is fixed at 0, 0.001, ..., 1.000 and
is shared by the accuracy search and the precision-recall sweep.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import similarity_pairs

SWEEP_STEPS = 1000

# Below this many discordant pairs the chi-square approximation is poor and
# the exact binomial test is used instead.
MCNEMAR_EXACT_CUTOFF = 25


def sweep_thresholds() -> np.ndarray:
    return np.arange(SWEEP_STEPS + 1) / SWEEP_STEPS


def positive_labels(examples) -> np.ndarray:
    """entailment -> True; neutral and contradiction -> False."""
    return np.array([ex.label == "entailment" for ex in examples], dtype=bool)


def score_examples(examples, model) -> np.ndarray:
    """similarity(hypothesis || premise) per example, hypothesis as the query."""
    texts: dict[str, int] = {}
    for ex in examples:
        texts.setdefault(ex.premise, len(texts))
        texts.setdefault(ex.hypothesis, len(texts))
    if not texts:
        return np.empty(0)
    embedded = []
    for text, _ in sorted(texts.items(), key=lambda kv: kv[1]):
        try:
            embedded.append(model.encode(text))
        except Exception as exc:
            idx = next(
                i for i, ex in enumerate(examples) if text in (ex.premise, ex.hypothesis)
            )
            raise ValueError(f"failed to encode sentence of example {idx}: {exc}") from exc
    means = np.stack([e.mean for e in embedded])
    variances = np.stack([e.variance for e in embedded])
    h_idx = np.array([texts[ex.hypothesis] for ex in examples], dtype=np.intp)
    p_idx = np.array([texts[ex.premise] for ex in examples], dtype=np.intp)
    return similarity_pairs(means[h_idx], variances[h_idx], means[p_idx], variances[p_idx])


def classify(scores, threshold: float) -> np.ndarray:
    """Strictly-greater comparison; a score equal to the threshold is non-entailment."""
    return np.asarray(scores) > threshold


def _accuracy_per_threshold(scores, labels) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    thresholds = sweep_thresholds()
    predicted = scores[None, :] > thresholds[:, None]
    return (predicted == labels[None, :]).mean(axis=1)


def best_threshold(dev_scores, dev_labels) -> float:
    """Accuracy-maximizing threshold over the fixed sweep; ties pick the smallest."""
    if len(dev_scores) == 0:
        raise ValueError("development set is empty")
    acc = _accuracy_per_threshold(dev_scores, dev_labels)
    return float(sweep_thresholds()[int(np.argmax(acc))])


def pr_curve(scores, labels):
    """(precision, recall) at every sweep threshold, ordered by ascending threshold.

    Precision is defined as 1 when nothing is predicted positive, and the
    threshold-0 end of the sweep anchors the curve at recall 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("auprc needs at least one positive label")
    thresholds = sweep_thresholds()
    sorted_all = np.sort(scores)
    sorted_pos = np.sort(scores[labels])
    # score > t  <=>  index past the right insertion point of t
    predicted = len(scores) - np.searchsorted(sorted_all, thresholds, side="right")
    true_pos = n_pos - np.searchsorted(sorted_pos, thresholds, side="right")
    precision = np.where(predicted > 0, true_pos / np.maximum(predicted, 1), 1.0)
    recall = true_pos / n_pos
    return precision, recall


def auprc(scores, labels) -> float:
    """Area under the precision-recall sweep by trapezoidal integration over recall.

    Points are sorted by ascending recall (ties ordered by descending
    precision, which matches descending threshold order along the sweep).
    """
    precision, recall = pr_curve(scores, labels)
    order = np.lexsort((-precision, recall))
    r = recall[order]
    p = precision[order]
    return float(np.trapezoid(p, r))


@dataclass
class McNemarResult:
    statistic: float
    p_value: float
    significant: bool
    b: int
    c: int
    exact: bool


def mcnemar(predictions_a, predictions_b, labels, alpha: float = 0.05) -> McNemarResult:
    """Paired comparison of two prediction vectors against shared labels.

    b counts examples A got right and B got wrong; c the reverse. With at
    least ``MCNEMAR_EXACT_CUTOFF`` discordant pairs the continuity-corrected
    statistic (|b-c|-1)^2/(b+c) refers to chi-square with 1 dof; below that
    the two-sided exact binomial test is used. No discordant pairs at all
    means the classifiers are indistinguishable: p = 1.
    """
    a = np.asarray(predictions_a, dtype=bool)
    bb = np.asarray(predictions_b, dtype=bool)
    y = np.asarray(labels, dtype=bool)
    if not (len(a) == len(bb) == len(y)) or len(a) == 0:
        raise ValueError("prediction and label vectors must have equal nonzero length")
    a_correct = a == y
    b_correct = bb == y
    b = int(np.sum(a_correct & ~b_correct))
    c = int(np.sum(~a_correct & b_correct))
    n = b + c
    if n == 0:
        return McNemarResult(0.0, 1.0, False, b, c, exact=True)
    statistic = (abs(b - c) - 1) ** 2 / n
    if n < MCNEMAR_EXACT_CUTOFF:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) * 0.5**n
        p_value = min(1.0, 2.0 * tail)
        exact = True
    else:
        # chi-square(1) survival function
        p_value = math.erfc(math.sqrt(statistic / 2.0))
        exact = False
    return McNemarResult(statistic, p_value, p_value < alpha, b, c, exact)


@dataclass
class EvalReport:
    accuracy: float
    auprc: float
    threshold: float
    predictions: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    def counts(self) -> dict:
        return {
            "examples": int(len(self.scores)),
            "positives": int(self.labels.sum()),
            "negatives": int(len(self.labels) - self.labels.sum()),
            "predicted_positive": int(self.predictions.sum()),
            "correct": int((self.predictions == self.labels).sum()),
        }

    def to_json(self) -> str:
        payload = {
            "accuracy": self.accuracy,
            "auprc": self.auprc,
            "threshold": self.threshold,
            "counts": self.counts(),
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def write_per_example_tsv(self, path) -> None:
        """index, score, label, prediction rows; the join key for paired tests."""
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index\tscore\tlabel\tprediction\n")
            for i, (s, y, p) in enumerate(zip(self.scores, self.labels, self.predictions)):
                fh.write(f"{i}\t{s:.17g}\t{int(y)}\t{int(p)}\n")


def evaluate(test_examples, dev_examples, model) -> EvalReport:
    """Full protocol: pick the threshold on dev by accuracy, report on test."""
    dev_scores = score_examples(dev_examples, model)
    dev_labels = positive_labels(dev_examples)
    threshold = best_threshold(dev_scores, dev_labels)
    scores = score_examples(test_examples, model)
    labels = positive_labels(test_examples)
    predictions = classify(scores, threshold)
    return EvalReport(
        accuracy=float((predictions == labels).mean()),
        auprc=auprc(scores, labels),
        threshold=threshold,
        predictions=predictions,
        scores=scores,
        labels=labels,
    )
