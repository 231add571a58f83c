import numpy as np
import pytest

from ocref.corpus import build_vocab, make_examples, split_dataset
from ocref.model import (
    AdamState,
    ModelConfig,
    TrainingDiverged,
    accuracy,
    adam_step,
    clip_global_norm,
    evaluate_models,
    train,
)
from synth import synth_corpus


@pytest.fixture(scope="module")
def tiny_data():
    transcripts = synth_corpus(40, seed=21)
    vocab = build_vocab(transcripts)
    train_t, valid_t, _ = split_dataset(transcripts, seed=0)
    train_ex, _ = make_examples(train_t, vocab)
    valid_ex, _ = make_examples(valid_t, vocab)
    return train_ex, valid_ex, vocab


class TestClipping:
    def test_no_clip_below_threshold(self):
        grads = {"a": np.array([0.03, 0.04])}  # norm 0.05
        norm = clip_global_norm(grads, 0.1)
        assert norm == pytest.approx(0.05)
        np.testing.assert_allclose(grads["a"], [0.03, 0.04])

    def test_clip_above_threshold(self):
        grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}  # joint norm 5
        norm = clip_global_norm(grads, 0.1)
        assert norm == pytest.approx(5.0)
        joint = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        assert joint == pytest.approx(0.1)
        # direction preserved
        assert grads["a"][0] / grads["b"][0] == pytest.approx(3.0 / 4.0)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        state = AdamState.for_params(params)
        adam_step(params, grads, state, lr=0.001)
        # bias-corrected first step is lr * g/|g| (up to eps)
        assert params["w"][0] == pytest.approx(1.0 - 0.001, rel=1e-4)


class TestTraining:
    def test_same_seed_identical_params(self, tiny_data):
        train_ex, valid_ex, vocab = tiny_data
        cfg = ModelConfig(variant="context-mlp", epochs=3, seed=5)
        a = train(train_ex, valid_ex, cfg)
        b = train(train_ex, valid_ex, cfg)
        assert a.best_epoch == b.best_epoch
        for k in a.params:
            np.testing.assert_array_equal(a.params[k], b.params[k])

    def test_different_seeds_differ(self, tiny_data):
        train_ex, valid_ex, _ = tiny_data
        a = train(train_ex, valid_ex, ModelConfig(variant="context-mlp", epochs=2, seed=1))
        b = train(train_ex, valid_ex, ModelConfig(variant="context-mlp", epochs=2, seed=2))
        assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_best_checkpoint_contract(self, tiny_data):
        train_ex, valid_ex, _ = tiny_data
        result = train(train_ex, valid_ex, ModelConfig(variant="context-mlp",
                                                       epochs=6, seed=3))
        best = result.best_valid_loss
        assert all(best <= e.valid_loss for e in result.log)
        assert result.log[result.best_epoch - 1].valid_loss == best

    def test_full_variant_trains(self, tiny_data):
        train_ex, valid_ex, vocab = tiny_data
        cfg = ModelConfig(variant="full-rn", vocab_size=vocab.size, epochs=2,
                          seed=0, batch_size=8)
        result = train(train_ex, valid_ex, cfg)
        assert len(result.log) == 2
        assert np.isfinite(result.best_valid_loss)

    def test_divergence_guard(self, tiny_data, monkeypatch):
        train_ex, valid_ex, _ = tiny_data
        import importlib

        train_mod = importlib.import_module("ocref.model.train")

        def bad_loss(*args, **kw):
            return float("nan"), {}, None

        monkeypatch.setattr(train_mod, "loss_and_grads", bad_loss)
        with pytest.raises(TrainingDiverged):
            train_mod.train(train_ex, valid_ex,
                            ModelConfig(variant="context-mlp", epochs=1, seed=0))

    def test_empty_sets_rejected(self, tiny_data):
        train_ex, valid_ex, _ = tiny_data
        with pytest.raises(ValueError):
            train([], valid_ex, ModelConfig(variant="context-mlp"))


class TestOverfitSmall:
    def test_context_rn_overfits_20_examples(self, tiny_data):
        # miniature of the capacity sanity run: drive train accuracy to 1.0
        train_ex, _, vocab = tiny_data
        subset = train_ex[:20]
        cfg = ModelConfig(variant="context-rn", epochs=150, seed=0, batch_size=8,
                          dropout=0.0)
        result = train(subset, subset, cfg)
        assert accuracy(result.params, cfg, subset) == 1.0


class TestEvaluateModels:
    def test_report_structure(self, tiny_data):
        train_ex, valid_ex, vocab = tiny_data
        models = {}
        for variant in ("context-mlp", "context-rn"):
            entries = []
            for seed in (0, 1):
                cfg = ModelConfig(variant=variant, epochs=2, seed=seed)
                res = train(train_ex, valid_ex, cfg)
                entries.append((seed, res.params, cfg, res.best_valid_loss))
            models[variant] = entries
        variants_data = {"full": valid_ex, "uncorrelated": valid_ex[:10],
                         "success_only": valid_ex[:5]}
        report = evaluate_models(models, variants_data)
        assert set(report.variants) == {"context-mlp", "context-rn"}
        rep = report.variants["context-mlp"]
        assert len(rep.seed_accuracies) == 2
        assert 0.0 <= rep.mean <= 1.0
        assert "context-mlp vs context-rn" in report.ttests
        p = report.ttests["context-mlp vs context-rn"]
        assert 0.0 <= p <= 1.0


class TestEvaluateEdgeCases:
    def test_empty_variants_reported_as_null(self, tiny_data):
        train_ex, valid_ex, _ = tiny_data
        cfg = ModelConfig(variant="context-mlp", epochs=1, seed=0)
        from ocref.model import train as train_fn

        res = train_fn(train_ex, valid_ex, cfg)
        models = {"context-mlp": [(0, res.params, cfg, res.best_valid_loss)]}
        variants = {"full": valid_ex, "uncorrelated": [], "success_only": []}
        report = evaluate_models(models, variants)
        rep = report.variants["context-mlp"]
        assert rep.uncorrelated is None and rep.success_only is None
        assert report.ttests == {}

    def test_empty_example_set_rejected(self, tiny_data):
        from ocref.model import accuracy as acc_fn
        train_ex, valid_ex, _ = tiny_data
        cfg = ModelConfig(variant="context-mlp", epochs=1, seed=0)
        from ocref.model import train as train_fn

        res = train_fn(train_ex, valid_ex, cfg)
        with pytest.raises(ValueError):
            acc_fn(res.params, cfg, [])
