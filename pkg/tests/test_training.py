import copy

import numpy as np
import pytest

import irdrop.training as training
from irdrop.cli import dataset_tensors
from irdrop.training import (
    AdamState,
    TrainConfig,
    TrainingError,
    adam_step,
    mse_loss,
    split_dataset,
    train,
)
from irdrop.unet import UNetParams, backward_batch, forward_batch


class TestMseLoss:
    def test_perfect_prediction(self):
        pred = np.random.default_rng(0).normal(size=(2, 1, 4, 4))
        loss, grad = mse_loss(pred, pred.copy())
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros_like(pred))

    def test_constant_offset(self):
        target = np.random.default_rng(1).normal(size=(3, 1, 8, 8))
        loss, _ = mse_loss(target + 0.1, target)
        assert loss == pytest.approx(0.01, abs=1e-12)

    def test_hand_case_exact(self):
        pred = np.array([[1.0, 0.0], [0.0, 0.0]])
        loss, grad = mse_loss(pred, np.zeros((2, 2)))
        assert loss == 0.25
        assert np.array_equal(grad, np.array([[0.5, 0.0], [0.0, 0.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


class TestAdam:
    def _params(self):
        return UNetParams.init(np.random.default_rng(0), base=4)

    def test_zero_grads_leave_params_unchanged(self):
        params = self._params()
        before = {k: a.copy() for k, a in params.arrays().items()}
        grads = {k: np.zeros_like(a) for k, a in params.arrays().items()}
        state = AdamState.init(params)
        adam_step(params, grads, state, lr=1e-3)
        assert state.t == 1
        for key, arr in params.arrays().items():
            assert np.array_equal(arr, before[key])

    def test_first_step_magnitude_closed_form(self):
        # with zero-initialized moments the first update is
        # lr * g / (|g| + eps), nearly lr for any sizable g
        params = self._params()
        before = {k: a.copy() for k, a in params.arrays().items()}
        g = 0.5
        grads = {k: np.full_like(a, g) for k, a in params.arrays().items()}
        adam_step(params, grads, AdamState.init(params), lr=1e-3)
        expected = 1e-3 * g / (g + 1e-8)
        for key, arr in params.arrays().items():
            delta = before[key] - arr
            assert np.allclose(delta, expected, rtol=1e-12)

    def test_deterministic(self):
        p1, p2 = self._params(), self._params()
        grads = {
            k: np.random.default_rng(3).normal(size=a.shape)
            for k, a in p1.arrays().items()
        }
        s1, s2 = AdamState.init(p1), AdamState.init(p2)
        adam_step(p1, copy.deepcopy(grads), s1, 1e-3)
        adam_step(p2, copy.deepcopy(grads), s2, 1e-3)
        for key in p1.arrays():
            assert np.array_equal(p1.arrays()[key], p2.arrays()[key])
            assert np.array_equal(s1.m[key], s2.m[key])

    def test_non_finite_gradient_aborts_with_diagnostics(self):
        params = self._params()
        grads = {k: np.zeros_like(a) for k, a in params.arrays().items()}
        grads["mid_1.weight"][0] = np.nan
        with pytest.raises(TrainingError, match="mid_1.weight"):
            adam_step(params, grads, AdamState.init(params), 1e-3)

    def test_descent_on_frozen_batch(self, tiny_dataset_dir):
        x, y = dataset_tensors(tiny_dataset_dir)
        xb = x[:4].astype(np.float64)
        yb = y[:4][:, None]
        params = UNetParams.init(np.random.default_rng(7))
        state = AdamState.init(params)
        pred, cache = forward_batch(params, xb)
        loss0, grad = mse_loss(pred, yb)
        grads, _ = backward_batch(params, cache, grad)
        adam_step(params, grads, state, lr=1e-4)
        pred1, _ = forward_batch(params, xb, keep_cache=False)
        loss1, _ = mse_loss(pred1, yb)
        assert loss1 <= loss0


class TestSplit:
    def test_1000_samples_default_fraction(self):
        tr, va = split_dataset(1000, 0.1, seed=0)
        assert tr.size == 900
        assert va.size == 100

    def test_same_seed_same_partition(self):
        a = split_dataset(50, 0.2, seed=9)
        b = split_dataset(50, 0.2, seed=9)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_partition_property(self):
        tr, va = split_dataset(37, 0.25, seed=3)
        union = np.sort(np.concatenate([tr, va]))
        assert np.array_equal(union, np.arange(37))

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            split_dataset(1, 0.5, seed=0)


class TestTrain:
    def test_loss_decreases_and_reproducible(self, tiny_dataset_dir):
        x, y = dataset_tensors(tiny_dataset_dir)
        cfg = TrainConfig(max_epochs=5, patience=5, batch_size=4,
                          val_fraction=0.25, seed=2)
        r1 = train(x, y, cfg)
        r2 = train(x, y, cfg)
        assert r1.history[-1].train_loss < r1.history[0].train_loss
        histories = [
            (e.epoch, e.train_loss, e.val_loss) for e in r1.history
        ]
        assert histories == [(e.epoch, e.train_loss, e.val_loss) for e in r2.history]
        for key, arr in r1.params.arrays().items():
            assert np.array_equal(arr, r2.params.arrays()[key])

    def test_best_val_loss_is_history_minimum(self, tiny_dataset_dir):
        x, y = dataset_tensors(tiny_dataset_dir)
        cfg = TrainConfig(max_epochs=6, patience=6, batch_size=4,
                          val_fraction=0.25, seed=4)
        result = train(x, y, cfg)
        assert result.best_val_loss == min(e.val_loss for e in result.history)
        assert result.best_epoch == min(
            e.epoch for e in result.history if e.val_loss == result.best_val_loss
        )

    def test_early_stopping_rule(self, tiny_dataset_dir, monkeypatch):
        # scripted validation losses: improvement only at epoch 3
        scripted = iter([1.0, 0.9, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
        monkeypatch.setattr(
            training, "validation_loss", lambda *a, **k: next(scripted)
        )
        x, y = dataset_tensors(tiny_dataset_dir)
        cfg = TrainConfig(max_epochs=50, patience=1, batch_size=4,
                          val_fraction=0.25, seed=1)
        result = train(x, y, cfg)
        assert result.stopped_early
        assert len(result.history) == 4  # stops one epoch after the best
        assert result.best_epoch == 3

    def test_patience_extends_past_single_regression(self, tiny_dataset_dir,
                                                      monkeypatch):
        scripted = iter([1.0, 1.1, 0.8, 1.2, 1.3, 1.4, 1.5])
        monkeypatch.setattr(
            training, "validation_loss", lambda *a, **k: next(scripted)
        )
        x, y = dataset_tensors(tiny_dataset_dir)
        cfg = TrainConfig(max_epochs=50, patience=3, batch_size=4,
                          val_fraction=0.25, seed=1)
        result = train(x, y, cfg)
        assert len(result.history) == 6
        assert result.best_epoch == 3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=0.0)
        with pytest.raises(ValueError):
            TrainConfig(patience=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
