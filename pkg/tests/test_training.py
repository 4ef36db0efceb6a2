import numpy as np
import pytest

from posecast import autodiff as ad
from posecast.autodiff import DimensionError
from posecast.data import WindowSet, make_windows, skeleton_preset, synth_kinematic
from posecast.model import ModelConfig, build_model
from posecast.training import (
    NumericalError,
    TrainConfig,
    baseline_report,
    evaluate,
    mpjpe_loss,
    mpjpe_value,
    train,
    zero_velocity_baseline,
)


def tiny_model(**overrides):
    base = dict(
        input_frames=4,
        output_frames=3,
        span=1,
        max_hop=1,
        strategy="pseudo_autoregressive",
        value_schedule=(3, 8, 3),
        qk_schedule=(3, 4, 3),
        seed=0,
    )
    base.update(overrides)
    return build_model(skeleton_preset("chain_5"), ModelConfig(**base))


def tiny_windows(n_frames=40, seed=0, noise=0.0):
    seq = synth_kinematic(5, n_frames, period=8, seed=seed, noise=noise)
    return make_windows([seq], t_in=4, k_out=3)


class TestLoss:
    def test_perfect_prediction_is_zero(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 4, 3))
        assert mpjpe_loss(ad.constant(x), x).item() == 0.0

    def test_three_four_five_triangle(self):
        pred = np.zeros((1, 1, 1, 3))
        truth = np.array([3.0, 4.0, 0.0]).reshape(1, 1, 1, 3)
        assert mpjpe_loss(ad.constant(pred), truth).item() == pytest.approx(5.0)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        pred = rng.normal(size=(2, 3, 4, 3))
        truth = rng.normal(size=(2, 3, 4, 3))
        total = 0.0
        for b in range(2):
            for k in range(3):
                for v in range(4):
                    total += np.sqrt(((pred[b, k, v] - truth[b, k, v]) ** 2).sum())
        expected = total / (2 * 3 * 4)
        assert mpjpe_loss(ad.constant(pred), truth).item() == pytest.approx(expected, abs=1e-12)
        assert mpjpe_value(pred, truth) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            mpjpe_loss(ad.constant(np.zeros((1, 2, 3, 3))), np.zeros((1, 3, 3, 3)))

    def test_translation_shifts_loss_by_exactly_delta(self):
        rng = np.random.default_rng(2)
        truth = rng.normal(size=(2, 3, 4, 3))
        shifted = truth + np.array([1.5, 0.0, 0.0])
        assert mpjpe_value(shifted, truth) == pytest.approx(1.5, abs=1e-12)


class TestTrainLoop:
    def test_lr_trace_follows_decay_schedule(self):
        model = tiny_model()
        windows = tiny_windows()
        config = TrainConfig(
            epochs=50, batch_size=16, lr_initial=0.1,
            lr_decay_epochs=(20, 35, 45), lr_decay_factor=0.1, seed=0,
        )
        log = train(model, windows, config)
        lrs = [rec.lr for rec in log]
        assert lrs[0] == pytest.approx(0.1)
        assert lrs[19] == pytest.approx(0.1)
        assert lrs[20] == pytest.approx(0.01)
        assert lrs[35] == pytest.approx(0.001)
        assert lrs[45] == pytest.approx(0.0001)
        assert len(set(lrs)) == 4

    def test_zero_epochs_leaves_parameters_unchanged(self):
        model = tiny_model()
        before = [p.values.copy() for p in model.parameters()]
        log = train(model, tiny_windows(), TrainConfig(epochs=0, lr_decay_epochs=()))
        assert log == []
        for b, p in zip(before, model.parameters()):
            assert np.array_equal(b, p.values)

    def test_empty_dataset_rejected(self):
        model = tiny_model()
        windows = make_windows([], t_in=4, k_out=3)
        with pytest.raises(ValueError):
            train(model, windows, TrainConfig(epochs=1, lr_decay_epochs=()))

    def test_single_step_decreases_loss(self):
        model = tiny_model(seed=3)
        windows = tiny_windows(seed=3)
        x, y = windows.inputs[:8], windows.targets[:8]
        before = mpjpe_value(model.predict(x), y)
        config = TrainConfig(epochs=1, batch_size=8, lr_initial=1e-4,
                             lr_decay_epochs=(), clip_norm=None, seed=0)
        train(model, WindowSet(inputs=x, targets=y), config)
        after = mpjpe_value(model.predict(x), y)
        assert after < before

    def test_nonfinite_loss_aborts_with_diagnostics(self):
        model = tiny_model()
        model.tcn.values[0, 0] = np.nan
        with pytest.raises(NumericalError, match="epoch 0"):
            train(model, tiny_windows(), TrainConfig(epochs=1, lr_decay_epochs=()))

    def test_overfit_small_batch(self):
        model = tiny_model(seed=5)
        windows = tiny_windows(seed=5)
        windows.inputs = windows.inputs[:8]
        windows.targets = windows.targets[:8]
        config = TrainConfig(epochs=200, batch_size=8, lr_initial=0.02,
                             lr_decay_epochs=(), seed=0)
        log = train(model, windows, config)
        assert log[-1].mean_loss < 0.10 * log[0].mean_loss

    def test_decay_epochs_validated(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=10, lr_decay_epochs=(3, 3))
        with pytest.raises(ValueError):
            TrainConfig(epochs=10, lr_decay_epochs=(12,))


class TestEvaluate:
    def test_copy_model_on_constant_data_is_exact(self):
        frames = np.ones((20, 5, 3)) * np.arange(5)[None, :, None]
        from posecast.data import PoseSequence

        seq = PoseSequence(frames=frames)
        windows = make_windows([seq], t_in=4, k_out=3)
        preds = zero_velocity_baseline(windows.inputs, 3)
        for h in (1, 2, 3):
            assert mpjpe_value(preds[:, h - 1], windows.targets[:, h - 1]) == 0.0

    def test_matches_loop_oracle(self):
        model = tiny_model()
        windows = tiny_windows()
        report = evaluate(model, windows, horizons=[1, 3])
        preds = model.predict(windows.inputs)
        for h in (1, 3):
            total = 0.0
            n = 0
            for i in range(len(windows)):
                for v in range(5):
                    total += np.linalg.norm(preds[i, h - 1, v] - windows.targets[i, h - 1, v])
                    n += 1
            assert report.horizons[h] == pytest.approx(total / n, abs=1e-12)

    def test_horizon_out_of_range(self):
        with pytest.raises(ValueError):
            evaluate(tiny_model(), tiny_windows(), horizons=[4])

    def test_report_table_lists_horizons(self):
        report = evaluate(tiny_model(), tiny_windows(), horizons=[1, 2, 3])
        table = report.format_table()
        assert "1" in table and "3" in table and "model" in table


class TestZeroVelocityBaseline:
    def test_constant_input_zero_error(self):
        x = np.ones((3, 4, 5, 3))
        preds = zero_velocity_baseline(x, 2)
        assert np.array_equal(preds, np.ones((3, 2, 5, 3)))

    def test_linear_motion_error_grows_linearly(self):
        step = np.array([1.0, 2.0, 2.0])   # norm 3
        frames = np.arange(10)[:, None, None] * step[None, None, :]
        from posecast.data import PoseSequence

        windows = make_windows([PoseSequence(frames=frames)], t_in=4, k_out=3)
        preds = zero_velocity_baseline(windows.inputs, 3)
        for h in (1, 2, 3):
            err = mpjpe_value(preds[:, h - 1], windows.targets[:, h - 1])
            assert err == pytest.approx(3.0 * h, abs=1e-9)

    def test_baseline_report_monotone_for_drift(self):
        frames = np.arange(30)[:, None, None] * np.ones((1, 2, 3))
        from posecast.data import PoseSequence

        windows = make_windows([PoseSequence(frames=frames)], t_in=4, k_out=3)
        report = baseline_report(windows, horizons=[1, 3])
        assert report.horizons[1] <= report.horizons[3]
