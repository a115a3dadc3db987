"""Entailment-direction prediction, the sentence-length baseline, and length-ratio histograms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .core import similarity
from .encoder import tokenize

DEFAULT_BIN_WIDTH = 0.1


@dataclass(frozen=True)
class DirectionResult:
    a_entails_b: bool
    tie: bool


def predict_direction(a: str, b: str, model) -> DirectionResult:
    """Decide which of two sentences entails the other.

    ``a`` is named entailing iff similarity(b || a) > similarity(a || b). An
    exact tie keeps the "a entails b" orientation but sets the tie flag so
    callers can score it as they choose (the accuracy metrics count it wrong).
    """
    emb_a = model.encode(a)
    emb_b = model.encode(b)
    sim_b_given_a = similarity(emb_b, emb_a)
    sim_a_given_b = similarity(emb_a, emb_b)
    if sim_b_given_a == sim_a_given_b:
        return DirectionResult(a_entails_b=True, tie=True)
    return DirectionResult(a_entails_b=sim_b_given_a > sim_a_given_b, tie=False)


def _entailment_pairs(pairs):
    """Validate labels and apply the bilateral exclusion; returns (kept, excluded)."""
    kept = []
    excluded = 0
    for ex in pairs:
        if ex.label != "entailment":
            raise ValueError("direction evaluation expects entailment-labeled pairs only")
        if ex.bilateral:
            excluded += 1
        else:
            kept.append(ex)
    return kept, excluded


@dataclass
class DirectionReport:
    accuracy: float
    evaluated: int
    ties: int
    excluded_bilateral: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "accuracy": self.accuracy,
                "evaluated": self.evaluated,
                "ties": self.ties,
                "excluded_bilateral": self.excluded_bilateral,
            },
            sort_keys=True,
            indent=2,
        )


def direction_report(pairs, model) -> DirectionReport:
    """Fraction of entailment pairs whose premise is named entailing; ties score wrong."""
    kept, excluded = _entailment_pairs(pairs)
    if not kept:
        raise ValueError("no pairs left after excluding bilateral entailments")
    correct = 0
    ties = 0
    for ex in kept:
        result = predict_direction(ex.premise, ex.hypothesis, model)
        if result.tie:
            ties += 1
        elif result.a_entails_b:
            correct += 1
    return DirectionReport(
        accuracy=correct / len(kept),
        evaluated=len(kept),
        ties=ties,
        excluded_bilateral=excluded,
    )


def direction_accuracy(pairs, model) -> float:
    return direction_report(pairs, model).accuracy


def length_baseline_report(pairs) -> DirectionReport:
    """Model-free baseline: the sentence with strictly more tokens is entailing.

    Equal token counts are ties and score wrong, mirroring the similarity
    metric's tie rule.
    """
    kept, excluded = _entailment_pairs(pairs)
    if not kept:
        raise ValueError("no pairs left after excluding bilateral entailments")
    correct = 0
    ties = 0
    for ex in kept:
        lp = len(tokenize(ex.premise))
        lh = len(tokenize(ex.hypothesis))
        if lp == lh:
            ties += 1
        elif lp > lh:
            correct += 1
    return DirectionReport(
        accuracy=correct / len(kept),
        evaluated=len(kept),
        ties=ties,
        excluded_bilateral=excluded,
    )


def length_baseline(pairs) -> float:
    return length_baseline_report(pairs).accuracy


def length_ratio_histogram(pairs, bin_width: float = DEFAULT_BIN_WIDTH):
    """Histogram of ln(premise length / hypothesis length) over token counts.

    Bins have fixed width and are centered on multiples of ``bin_width`` (so 0
    is a bin center). Returns a sorted list of (bin center, count) with only
    occupied bins; the counts sum to the number of pairs.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to histogram")
    counts: dict[int, int] = {}
    for ex in pairs:
        lp = len(tokenize(ex.premise))
        lh = len(tokenize(ex.hypothesis))
        if lp == 0 or lh == 0:
            raise ValueError(f"zero-length sentence in pair {ex.premise!r} / {ex.hypothesis!r}")
        ratio = math.log(lp / lh)
        idx = math.floor(ratio / bin_width + 0.5)
        counts[idx] = counts.get(idx, 0) + 1
    return [(idx * bin_width, counts[idx]) for idx in sorted(counts)]


def write_histogram_tsv(histogram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_center\tcount\n")
        for center, count in histogram:
            fh.write(f"{center:.10g}\t{count}\n")
