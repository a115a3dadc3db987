import math

import numpy as np
import pytest

from gaussent.core import similarity
from gaussent.data import NLIExample, SyntheticConfig, Triplet, build_triplets, generate_synthetic
from gaussent.encoder import new_bag_model
from gaussent.training import (
    AdamW,
    TrainConfig,
    batch_loss,
    grid_search,
    loss_gradients,
    train,
)


def direct_loss(batch, model, cfg):
    """Independent straightforward evaluation of the contrastive objective."""
    n = len(batch)
    with_con = "con" in cfg.loss_variant.split("+")
    with_rev = "rev" in cfg.loss_variant.split("+")
    embed = {s: model.encode(s) for t in batch for s in (t.premise, t.entailed, t.contradicted)}

    def sim(query, reference):
        return similarity(embed[query], embed[reference])

    total = 0.0
    for i in range(n):
        numerator = math.exp(sim(batch[i].entailed, batch[i].premise) / cfg.temperature)
        denominator = 0.0
        for j in range(n):
            denominator += math.exp(sim(batch[j].entailed, batch[i].premise) / cfg.temperature)
            if with_con:
                denominator += math.exp(sim(batch[j].contradicted, batch[i].premise) / cfg.temperature)
            if with_rev:
                denominator += math.exp(sim(batch[j].premise, batch[i].entailed) / cfg.temperature)
        total += -math.log(numerator / denominator)
    return total / n


def tiny_model(seed=0):
    return new_bag_model(d_base=4, dim=3, vocab_buckets=16, seed=seed)


def random_batch(rng, n):
    words = ["ant", "bee", "cat", "dog", "elk", "fox", "gnu", "hen", "ibis", "jay"]
    def sentence():
        return " ".join(rng.choice(words, size=int(rng.integers(1, 5))))
    return [Triplet(sentence(), sentence(), sentence()) for _ in range(n)]


class TestBatchLoss:
    def test_symmetric_singleton_gives_log_three(self):
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent+con+rev", batch_size=1)
        batch = [Triplet("same words", "same words", "same words")]
        assert batch_loss(batch, model, cfg).total == pytest.approx(math.log(3), abs=1e-9)

    def test_ent_singleton_is_exactly_zero(self):
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent", batch_size=1)
        batch = [Triplet("alpha beta", "alpha", "zulu")]
        assert batch_loss(batch, model, cfg).total == 0.0

    @pytest.mark.parametrize("variant", ["ent", "ent+con", "ent+rev", "ent+con+rev"])
    def test_matches_independent_direct_evaluation(self, variant):
        rng = np.random.default_rng(17)
        for trial in range(10):
            model = tiny_model(seed=trial)
            cfg = TrainConfig(loss_variant=variant, batch_size=3)
            batch = random_batch(rng, 3)
            expected = direct_loss(batch, model, cfg)
            assert batch_loss(batch, model, cfg).total == pytest.approx(expected, abs=1e-10)

    def test_breakdown_masses(self):
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent+con+rev", batch_size=2)
        batch = random_batch(np.random.default_rng(5), 2)
        breakdown = batch_loss(batch, model, cfg)
        assert breakdown.v_e > 0 and breakdown.v_c > 0 and breakdown.v_r > 0
        ent_only = batch_loss(batch, model, TrainConfig(loss_variant="ent", batch_size=2))
        assert ent_only.v_c == 0.0 and ent_only.v_r == 0.0
        assert ent_only.v_e == pytest.approx(breakdown.v_e, rel=1e-12)

    def test_tied_sentences_make_reversed_equal_entailment_mass(self):
        # With entailed == premise in every triplet the reversed logits
        # coincide with the entailment logits block.
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent+rev", batch_size=3)
        batch = [
            Triplet("alpha beta", "alpha beta", "x y"),
            Triplet("gamma", "gamma", "z"),
            Triplet("delta eps", "delta eps", "w"),
        ]
        breakdown = batch_loss(batch, model, cfg)
        assert breakdown.v_r == pytest.approx(breakdown.v_e, rel=1e-12)

    def test_non_negative_with_extra_denominator_terms(self):
        rng = np.random.default_rng(6)
        for variant in ("ent+con", "ent+rev", "ent+con+rev"):
            cfg = TrainConfig(loss_variant=variant, batch_size=2)
            for trial in range(5):
                model = tiny_model(seed=trial)
                assert batch_loss(random_batch(rng, 2), model, cfg).total >= 0.0

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            batch_loss([], tiny_model(), TrainConfig())

    def test_non_finite_loss_is_an_error(self):
        model = tiny_model()
        model.heads.w_mean[:] = np.inf
        cfg = TrainConfig(loss_variant="ent", batch_size=2)
        with np.errstate(invalid="ignore"), pytest.raises(ArithmeticError):
            batch_loss(random_batch(np.random.default_rng(7), 2), model, cfg)


class TestLossGradients:
    def test_zero_loss_gives_zero_gradients(self):
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent", batch_size=1)
        batch = [Triplet("alpha beta", "alpha", "zulu")]
        breakdown, grads = loss_gradients(batch, model, cfg)
        assert breakdown.total == 0.0
        for grad in grads.values():
            assert np.array_equal(grad, np.zeros_like(grad))

    @pytest.mark.parametrize("variant", ["ent+con", "ent+rev", "ent+con+rev"])
    def test_matches_central_differences(self, variant):
        rng = np.random.default_rng(23)
        h = 1e-5
        for trial in range(5):
            model = tiny_model(seed=100 + trial)
            cfg = TrainConfig(loss_variant=variant, batch_size=2)
            batch = random_batch(rng, 2)
            _, grads = loss_gradients(batch, model, cfg)
            params = model.trainable_params()
            for name, arr in params.items():
                flat = arr.reshape(-1)
                grad = grads[name].reshape(-1)
                for i in range(flat.size):
                    original = flat[i]
                    flat[i] = original + h
                    hi = batch_loss(batch, model, cfg).total
                    flat[i] = original - h
                    lo = batch_loss(batch, model, cfg).total
                    flat[i] = original
                    fd = (hi - lo) / (2 * h)
                    assert abs(grad[i] - fd) <= 1e-3 * max(abs(fd), abs(grad[i])) + 1e-8, (
                        f"{name}[{i}]: analytic {grad[i]} vs fd {fd}"
                    )

    def test_gradients_cover_all_trainables(self):
        model = tiny_model()
        cfg = TrainConfig(loss_variant="ent+con+rev", batch_size=2)
        _, grads = loss_gradients(random_batch(np.random.default_rng(8), 2), model, cfg)
        assert set(grads) == {"table", "w_mean", "b_mean", "w_var", "b_var"}


class TestAdamW:
    def test_pure_weight_decay_with_zero_gradient(self):
        cfg = TrainConfig(weight_decay=0.01)
        params = {"p": np.array([2.0, -4.0])}
        opt = AdamW(params, cfg)
        opt.step({"p": np.zeros(2)}, lr=0.5)
        np.testing.assert_allclose(params["p"], np.array([2.0, -4.0]) * (1 - 0.5 * 0.01))

    def test_descends_a_quadratic(self):
        cfg = TrainConfig(weight_decay=0.0)
        params = {"p": np.array([5.0])}
        opt = AdamW(params, cfg)
        for _ in range(200):
            opt.step({"p": 2 * params["p"]}, lr=0.05)
        assert abs(params["p"][0]) < 0.5


def synthetic_sets(count=60, seed=0):
    train_ex = generate_synthetic(SyntheticConfig(vocab_size=40, count=count, seed=seed))
    dev_ex = generate_synthetic(SyntheticConfig(vocab_size=40, count=20, seed=seed + 1))
    return build_triplets(train_ex), dev_ex


class TestTrain:
    def test_warmup_schedule_is_linear_and_monotone(self):
        triplets, dev = synthetic_sets()
        cfg = TrainConfig(batch_size=16, learning_rate=0.02, epochs=2, eval_every=3, seed=1)
        result = train(triplets, dev, cfg, new_bag_model(16, 8, 64, seed=1))
        total = len(result.log.records)
        for record in result.log.records:
            assert record.lr == pytest.approx(0.02 * record.step / total, rel=1e-12)
        lrs = [r.lr for r in result.log.records]
        assert lrs == sorted(lrs)
        assert lrs[-1] == pytest.approx(0.02)

    def test_deterministic_log_for_fixed_seed(self):
        triplets, dev = synthetic_sets()
        cfg = TrainConfig(batch_size=16, learning_rate=0.02, epochs=2, eval_every=4, seed=7)
        a = train(triplets, dev, cfg, new_bag_model(16, 8, 64, seed=7))
        b = train(triplets, dev, cfg, new_bag_model(16, 8, 64, seed=7))
        assert a.log.to_tsv() == b.log.to_tsv()

    def test_identical_triplets_ent_variant_keeps_zero_loss(self):
        cfg = TrainConfig(loss_variant="ent", batch_size=1, learning_rate=0.1, epochs=2, seed=0)
        dataset = [Triplet("alpha beta", "alpha", "zulu")] * 6
        result = train(dataset, [], cfg, tiny_model())
        assert all(r.loss == 0.0 for r in result.log.records)
        assert "dev evaluation skipped: empty dev set" in result.log.notes
        assert result.best_dev_auprc is None

    def test_dev_auprc_improves_on_separable_corpus(self):
        triplets, dev = synthetic_sets(count=150, seed=3)
        cfg = TrainConfig(
            loss_variant="ent+con", batch_size=16, learning_rate=0.05, epochs=3,
            eval_every=10, seed=3,
        )
        result = train(triplets, dev, cfg, new_bag_model(32, 16, 1024, seed=3))
        assert result.best_dev_auprc > result.initial_dev_auprc

    def test_final_step_always_evaluated(self):
        triplets, dev = synthetic_sets(count=40)
        cfg = TrainConfig(batch_size=16, epochs=1, eval_every=1000, seed=0, learning_rate=0.01)
        result = train(triplets, dev, cfg, new_bag_model(16, 8, 64, seed=0))
        assert result.log.records[-1].dev_auprc is not None
        assert result.best_step == result.log.records[-1].step

    def test_snapshot_restored_into_returned_model(self):
        triplets, dev = synthetic_sets(count=60, seed=5)
        cfg = TrainConfig(
            loss_variant="ent+con", batch_size=16, learning_rate=0.08, epochs=2,
            eval_every=2, seed=5,
        )
        result = train(triplets, dev, cfg, new_bag_model(16, 8, 256, seed=5))
        from gaussent.nli import auprc, positive_labels, score_examples

        rescored = auprc(score_examples(dev, result.model), positive_labels(dev))
        assert rescored == pytest.approx(result.best_dev_auprc, abs=1e-12)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], [], TrainConfig(), tiny_model())


class TestGridSearch:
    def test_single_cell(self):
        triplets, dev = synthetic_sets(count=30)
        cfg = TrainConfig(epochs=1, eval_every=5, seed=0)
        result = grid_search(
            triplets, dev, [8], [0.02], cfg, lambda c: new_bag_model(16, 8, 64, seed=c.seed)
        )
        assert len(result.cells) == 1
        assert result.best.batch_size == 8
        assert result.best.learning_rate == 0.02
        assert result.best.status == "ok"

    def test_failing_cell_recorded_not_fatal(self):
        triplets, dev = synthetic_sets(count=30)
        cfg = TrainConfig(epochs=1, eval_every=5, seed=0)

        def factory(c):
            if c.batch_size == 16:
                raise RuntimeError("boom")
            return new_bag_model(16, 8, 64, seed=c.seed)

        result = grid_search(triplets, dev, [8, 16], [0.02], cfg, factory)
        statuses = {cell.batch_size: cell.status for cell in result.cells}
        assert statuses[16] == "failed: boom"
        assert statuses[8] == "ok"
        assert result.best.batch_size == 8

    def test_easier_corpus_scores_higher(self):
        # Same-vocabulary contradictions are indistinguishable from entailed
        # hypotheses; the disjoint-vocabulary corpus is strictly easier.
        easy_train, easy_dev = synthetic_sets(count=80, seed=11)
        rng = np.random.default_rng(12)
        words = [f"w{i}" for i in range(20)]

        def hard_examples(count, seed):
            r = np.random.default_rng(seed)
            out = []
            for _ in range(count):
                pre = " ".join(r.choice(words, size=8))
                out.append(NLIExample(pre, " ".join(r.choice(words, size=3)), "entailment"))
                out.append(NLIExample(pre, " ".join(r.choice(words, size=3)), "contradiction"))
            return out

        hard_train = build_triplets(hard_examples(80, 13))
        hard_dev = hard_examples(30, 14)
        cfg = TrainConfig(loss_variant="ent+con", epochs=2, eval_every=5, seed=0, learning_rate=0.05)
        factory = lambda c: new_bag_model(32, 16, 512, seed=c.seed)
        easy = grid_search(easy_train, easy_dev, [16], [0.05], cfg, factory)
        hard = grid_search(hard_train, hard_dev, [16], [0.05], cfg, factory)
        assert easy.best.dev_auprc > hard.best.dev_auprc

    def test_tie_breaking_prefers_smaller_cell(self, monkeypatch):
        import gaussent.training as training_mod

        class StubResult:
            def __init__(self, score):
                self.best_dev_auprc = score

        def stub_train(dataset, dev, cfg, model=None):
            return StubResult(0.9)  # every cell ties

        monkeypatch.setattr(training_mod, "train", stub_train)
        result = training_mod.grid_search(
            [Triplet("a", "b", "c")],
            [NLIExample("a", "b", "entailment")],
            [32, 16],
            [0.03, 0.01],
            TrainConfig(),
            lambda cfg: None,
        )
        assert (result.best.batch_size, result.best.learning_rate) == (16, 0.01)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            grid_search([Triplet("a", "b", "c")], [NLIExample("a", "b", "entailment")], [], [0.1], TrainConfig())
