import math

import numpy as np
import pytest

from gaussent.core import GaussianEmbedding, similarity
from gaussent.data import NLIExample
from gaussent.direction import (
    direction_accuracy,
    direction_report,
    length_baseline,
    length_baseline_report,
    length_ratio_histogram,
    predict_direction,
    write_histogram_tsv,
)
from gaussent.encoder import new_bag_model, tokenize


class LengthVarianceModel:
    """Oracle model: constant mean, variance strictly increasing in token count."""

    def encode(self, text):
        n = len(tokenize(text))
        if n == 0:
            raise ValueError("empty sentence")
        return GaussianEmbedding(np.zeros(4), np.full(4, float(n)))


class TestPredictDirection:
    def test_identical_sentences_tie(self):
        model = new_bag_model(d_base=8, dim=4, vocab_buckets=64, seed=0)
        result = predict_direction("same text", "same text", model)
        assert result.tie
        assert result.a_entails_b

    def test_wider_variance_side_entails(self):
        # Matches the scalar asymmetry: equal means, first argument variance 2
        # vs 1 gives sim(b || a) > sim(a || b), so a is the entailing side.
        model = LengthVarianceModel()
        result = predict_direction("three word premise", "two words", model)
        assert not result.tie
        assert result.a_entails_b
        flipped = predict_direction("two words", "three word premise", model)
        assert not flipped.a_entails_b

    def test_matches_direct_core_calls(self):
        model = new_bag_model(d_base=8, dim=4, vocab_buckets=64, seed=5)
        pairs = [("alpha beta gamma delta", "alpha beta"), ("one two", "three four five")]
        for a, b in pairs:
            expected = similarity(model.encode(b), model.encode(a)) > similarity(
                model.encode(a), model.encode(b)
            )
            assert predict_direction(a, b, model).a_entails_b == expected

    def test_antisymmetric(self):
        model = new_bag_model(d_base=8, dim=4, vocab_buckets=64, seed=6)
        rng = np.random.default_rng(7)
        words = ["ant", "bee", "cat", "dog", "elk", "fox", "gnu", "hen"]
        for _ in range(25):
            a = " ".join(rng.choice(words, size=rng.integers(1, 6)))
            b = " ".join(rng.choice(words, size=rng.integers(1, 6)))
            fwd = predict_direction(a, b, model)
            rev = predict_direction(b, a, model)
            if not fwd.tie:
                assert fwd.a_entails_b != rev.a_entails_b


def entailment_pair(premise, hypothesis, bilateral=False):
    return NLIExample(premise, hypothesis, "entailment", bilateral=bilateral)


class TestDirectionAccuracy:
    def test_all_ties_score_zero(self):
        model = new_bag_model(d_base=8, dim=4, vocab_buckets=64, seed=1)
        pairs = [entailment_pair("echo echo", "echo echo")] * 3
        assert direction_accuracy(pairs, model) == 0.0

    def test_single_correct_pair(self):
        model = LengthVarianceModel()
        pairs = [entailment_pair("a much longer premise sentence", "short one")]
        assert direction_accuracy(pairs, model) == 1.0

    def test_length_variance_model_equals_length_baseline(self):
        rng = np.random.default_rng(8)
        words = ["red", "blue", "green", "gold", "pink", "gray"]
        pairs = []
        for _ in range(60):
            lp = int(rng.integers(1, 8))
            lh = int(rng.integers(1, 8))
            pairs.append(
                entailment_pair(
                    " ".join(rng.choice(words, size=lp)), " ".join(rng.choice(words, size=lh))
                )
            )
        assert direction_accuracy(pairs, LengthVarianceModel()) == length_baseline(pairs)

    def test_bilateral_excluded(self):
        model = LengthVarianceModel()
        pairs = [
            entailment_pair("long premise here now", "short"),
            entailment_pair("ignored pair entirely", "ignored", bilateral=True),
        ]
        report = direction_report(pairs, model)
        assert report.evaluated == 1
        assert report.excluded_bilateral == 1
        assert report.accuracy == 1.0

    def test_empty_after_exclusion(self):
        with pytest.raises(ValueError, match="bilateral"):
            direction_report([entailment_pair("a b", "c", bilateral=True)], LengthVarianceModel())

    def test_non_entailment_label_rejected(self):
        with pytest.raises(ValueError, match="entailment"):
            direction_report([NLIExample("p q", "r", "neutral")], LengthVarianceModel())

    def test_flipped_model_sums_below_one(self):
        class Flipped:
            def __init__(self, inner):
                self.inner = inner

            def encode(self, text):
                emb = self.inner.encode(text)
                return GaussianEmbedding(emb.mean, 1.0 / emb.variance)

        model = new_bag_model(d_base=8, dim=4, vocab_buckets=64, seed=9)
        rng = np.random.default_rng(10)
        words = ["aa", "bb", "cc", "dd", "ee"]
        pairs = [
            entailment_pair(
                " ".join(rng.choice(words, size=rng.integers(1, 6))),
                " ".join(rng.choice(words, size=rng.integers(1, 6))),
            )
            for _ in range(40)
        ]
        total = direction_accuracy(pairs, model) + direction_accuracy(pairs, Flipped(model))
        assert total <= 1.0 + 1e-12


class TestLengthBaseline:
    def test_premise_always_longer(self):
        pairs = [entailment_pair("one two three four", "one two")] * 5
        assert length_baseline(pairs) == 1.0

    def test_equal_lengths_score_zero(self):
        pairs = [entailment_pair("one two", "uno dos")] * 4
        report = length_baseline_report(pairs)
        assert report.accuracy == 0.0
        assert report.ties == 4

    def test_model_independent_and_repeatable(self):
        rng = np.random.default_rng(11)
        words = ["qq", "ww", "ee", "rr"]
        pairs = [
            entailment_pair(
                " ".join(rng.choice(words, size=rng.integers(1, 7))),
                " ".join(rng.choice(words, size=rng.integers(1, 7))),
            )
            for _ in range(30)
        ]
        assert length_baseline(pairs) == length_baseline(pairs)

    def test_tokenizer_rule_counts(self):
        # "don't-stop" splits into three tokens, beating the two-token premise.
        pairs = [entailment_pair("alpha beta", "don't-stop")]
        assert length_baseline(pairs) == 0.0


class TestLengthRatioHistogram:
    def test_equal_lengths_spike_at_zero(self):
        pairs = [entailment_pair("a b c", "d e f")] * 7
        histogram = length_ratio_histogram(pairs, 0.1)
        assert histogram == [(0.0, 7)]

    def test_double_length_spike_at_log_two(self):
        pairs = [entailment_pair("a b c d e f", "g h i")] * 3
        histogram = length_ratio_histogram(pairs, 0.1)
        assert len(histogram) == 1
        center, count = histogram[0]
        assert count == 3
        assert abs(center - math.log(2)) <= 0.05

    def test_total_count_conserved(self):
        rng = np.random.default_rng(12)
        words = ["xx", "yy", "zz"]
        pairs = [
            entailment_pair(
                " ".join(rng.choice(words, size=rng.integers(1, 9))),
                " ".join(rng.choice(words, size=rng.integers(1, 9))),
            )
            for _ in range(83)
        ]
        histogram = length_ratio_histogram(pairs, 0.1)
        assert sum(count for _, count in histogram) == 83

    def test_zero_length_sentence_rejected(self):
        with pytest.raises(ValueError, match="zero-length"):
            length_ratio_histogram([NLIExample("a b", "...", "entailment")], 0.1)

    def test_bad_bin_width(self):
        with pytest.raises(ValueError):
            length_ratio_histogram([entailment_pair("a b", "c")], 0.0)

    def test_tsv_output(self, tmp_path):
        pairs = [entailment_pair("a b c d", "e f")] * 2
        histogram = length_ratio_histogram(pairs, 0.1)
        out = tmp_path / "hist.tsv"
        write_histogram_tsv(histogram, out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "bin_center\tcount"
        assert len(lines) == 1 + len(histogram)
