import numpy as np
import pytest

from pastsim.errors import (FormatError, InvalidParameterError, ShapeError,
                            TrainingFailureError, UndefinedMetricError)
from pastsim.neural import (LabelScale, LayerSpec, SensorModel, TrainConfig,
                            backward, build_model, cross_validate, evaluate,
                            fold_slices, forward, load_model, mse_loss, r2,
                            rmse, save_model, smoothgrad, train)

from oracles import grad_check_coords


def tiny_model(seed=0, dtype=np.float64, input_dims=(12, 4), width=3,
               bias_shift=0.0):
    """Conv/pool/dense chain with < 1000 parameters for gradient checks."""
    specs = [LayerSpec("conv1d", filters=width, kernel=3), LayerSpec("relu"),
             LayerSpec("avgpool1d", window=2),
             LayerSpec("dense", filters=4), LayerSpec("relu"),
             LayerSpec("dense", filters=2), LayerSpec("relu")]
    model = SensorModel(specs, input_dims=input_dims, arch="custom",
                        seed=seed, dtype=dtype)
    if bias_shift:
        for layer in model.layers:
            if hasattr(layer, "b"):
                layer.b = layer.b + bias_shift
    return model


def tiny_model_2d(seed=0, dtype=np.float64, bias_shift=0.0):
    specs = [LayerSpec("conv2d", filters=2, kernel=3), LayerSpec("relu"),
             LayerSpec("avgpool2d", window=2),
             LayerSpec("dense", filters=2), LayerSpec("relu")]
    model = SensorModel(specs, input_dims=(9, 7), arch="custom",
                        seed=seed, dtype=dtype)
    if bias_shift:
        for layer in model.layers:
            if hasattr(layer, "b"):
                layer.b = layer.b + bias_shift
    return model


def kink_margin(model, x):
    """Smallest |pre-activation| entering any ReLU; finite differences are
    only valid when this clears the probe epsilon."""
    xb, _ = model.prepare(x)
    h = xb
    margin = np.inf
    for layer in model.layers:
        if layer.__class__.__name__ == "ReLU":
            margin = min(margin, float(np.abs(h).min()))
        h, _ = layer.forward(h)
    return margin


class TestShapes:
    def test_panet_1d_shape_chain(self):
        model = build_model("1d", 4, input_dims=(637, 65))
        chain = model.shape_chain()
        lengths = [s[-1] for s in chain if len(s) == 2]
        # conv/pool length algebra: 637 -> 635 -> 317 -> 315 -> 157 -> 155 -> 77
        assert lengths[0] == 637
        for expected in (635, 317, 315, 157, 155, 77):
            assert expected in lengths
        dense_in = model.layers[9].in_features
        assert dense_in == 77 * 4

    def test_panet_2d_shape_chain(self):
        model = build_model("2d", 3, input_dims=(637, 65))
        chain = model.shape_chain()
        assert chain[0] == (1, 637, 65)
        assert (3, 77, 6) in chain
        assert model.layers[9].in_features == 3 * 77 * 6

    def test_wrong_frame_dims_rejected(self):
        model = tiny_model()
        with pytest.raises(ShapeError):
            forward(model, np.zeros((5, 5)))

    def test_chain_must_end_with_two_outputs(self):
        with pytest.raises(ShapeError):
            SensorModel([LayerSpec("dense", filters=3)], input_dims=(4, 2))


class TestForward:
    def test_zero_network_outputs_zero(self):
        model = tiny_model()
        model.set_parameters([np.zeros_like(a) for _, _, a in model.parameters()])
        out = forward(model, np.random.default_rng(0).random((12, 4)))
        assert np.array_equal(out, np.zeros(2))

    def test_outputs_non_negative_for_any_weights(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            model = tiny_model(seed=seed)
            model.set_parameters([rng.normal(size=a.shape) for _, _, a in
                                  model.parameters()])
            out = forward(model, rng.random((12, 4)))
            assert np.all(out >= 0.0)

    def test_hand_computed_tiny_conv_dense(self):
        specs = [LayerSpec("conv1d", filters=1, kernel=3), LayerSpec("relu"),
                 LayerSpec("dense", filters=2), LayerSpec("relu")]
        model = SensorModel(specs, input_dims=(5, 1), arch="custom",
                            dtype=np.float64)
        model.layers[0].w = np.array([[[1.0, 0.0, -1.0]]])
        model.layers[0].b = np.array([0.5])
        model.layers[2].w = np.array([[1.0, 1.0, 1.0], [0.0, -1.0, 1.0]])
        model.layers[2].b = np.array([0.1, -0.2])
        x = np.array([1.0, 2.0, 3.0, 0.0, -1.0]).reshape(5, 1)
        # windows [1,2,3],[2,3,0],[3,0,-1] . [1,0,-1] + 0.5 -> [-1.5, 2.5, 4.5]
        # relu -> [0, 2.5, 4.5]; dense -> [7.1, 1.8]; relu keeps both
        out = forward(model, x)
        assert out == pytest.approx([7.1, 1.8], abs=1e-12)

    def test_batched_matches_single(self):
        model = tiny_model(seed=2)
        rng = np.random.default_rng(3)
        frames = rng.random((4, 12, 4))
        batch_out = forward(model, frames)
        for i in range(4):
            assert np.allclose(batch_out[i], forward(model, frames[i]), atol=1e-6)


class TestMseLoss:
    def test_perfect_fit(self):
        y = np.array([[1.0, 2.0]])
        assert mse_loss(y, y) == 0.0

    def test_single_sample(self):
        assert mse_loss(np.array([[2.0, 0.0]]), np.array([[0.0, 0.0]])) == 2.0

    def test_batch_mean(self):
        y = np.array([[1.0, 1.0], [3.0, 1.0]])
        y_hat = np.array([[0.0, 0.0], [1.0, 0.0]])
        # per-sample losses 1 and 2.5 -> mean 1.75
        assert mse_loss(y, y_hat) == pytest.approx(1.75)

    def test_empty_batch_rejected(self):
        with pytest.raises(InvalidParameterError):
            mse_loss(np.zeros((0, 2)), np.zeros((0, 2)))


def relative_error(a, b):
    denom = max(abs(a), abs(b), 1e-6)
    return abs(a - b) / denom


class TestGradients:
    def check_model(self, model, x, y, n_coords=12):
        assert model.parameter_count() <= 1000
        rng = np.random.default_rng(0)
        param_grads, input_grad = backward(model, x, y)

        def loss_at():
            return mse_loss(np.asarray(y).reshape(1, 2),
                            forward(model, x).reshape(1, 2))

        for li, layer in enumerate(model.layers):
            for name in layer.params:
                arr = getattr(layer, name)
                flat_idx = rng.choice(arr.size, size=min(n_coords, arr.size),
                                      replace=False)
                coords = [np.unravel_index(k, arr.shape) for k in flat_idx]
                numeric = grad_check_coords(loss_at, arr, coords, eps=1e-3)
                for c, num in zip(coords, numeric):
                    ana = param_grads[li][name][c]
                    assert relative_error(ana, num) <= 1e-4, (li, name, c)

        flat_idx = rng.choice(x.size, size=10, replace=False)
        coords = [np.unravel_index(k, x.shape) for k in flat_idx]
        numeric = grad_check_coords(loss_at, x, coords, eps=1e-3)
        for c, num in zip(coords, numeric):
            assert relative_error(input_grad[c], num) <= 1e-4

    def test_param_and_input_gradients_1d(self):
        model = tiny_model(seed=9, dtype=np.float64, bias_shift=0.3)
        rng = np.random.default_rng(5)
        x = rng.random((12, 4))
        y = np.array([0.7, 1.3])
        assert kink_margin(model, x) > 5e-3   # central differences stay valid
        self.check_model(model, x, y)

    def test_param_and_input_gradients_2d(self):
        model = tiny_model_2d(seed=6, dtype=np.float64, bias_shift=0.3)
        rng = np.random.default_rng(7)
        x = rng.random((9, 7))
        y = np.array([0.2, 0.9])
        assert kink_margin(model, x) > 5e-3
        self.check_model(model, x, y)

    def test_gradient_zero_at_minimum(self):
        # One trainable parameter (dense bias through ReLU), loss minimized
        # when the prediction equals the target exactly.
        specs = [LayerSpec("dense", filters=2), LayerSpec("relu")]
        model = SensorModel(specs, input_dims=(1, 1), arch="custom",
                            dtype=np.float64)
        model.layers[0].w = np.zeros((2, 1))
        model.layers[0].b = np.array([0.5, 1.5])
        grads, _ = backward(model, np.array([[1.0]]), np.array([0.5, 1.5]))
        assert np.all(np.abs(grads[0]["b"]) < 1e-8)

    def test_label_shape_mismatch_rejected(self):
        model = tiny_model()
        with pytest.raises(ShapeError):
            backward(model, np.zeros((12, 4)), np.zeros(3))


class TestTraining:
    def dataset(self, n=24, dims=(40, 6), seed=0, constant=None):
        rng = np.random.default_rng(seed)
        pixels = rng.random((n, *dims)).astype(np.float32)
        if constant is not None:
            labels = np.tile(constant, (n, 1)).astype(np.float64)
        else:
            labels = np.column_stack([rng.uniform(75, 95, n), rng.uniform(0, 2, n)])
        return pixels, labels

    def test_constant_labels_reach_zero_rmse(self):
        data = self.dataset(constant=(100.0, 1.0))
        cfg = TrainConfig(batch_size=8, learning_rate=0.01, width=4, epochs=50,
                          seed=0, patience=50, flow_scale=2.0)
        result = train(data, "1d", cfg)
        assert min(s.val_rmse_temp for s in result.history) < 0.5
        assert min(s.val_rmse_flow for s in result.history) < 0.01

    def test_fixed_seed_reproduces_parameters(self):
        data = self.dataset()
        cfg = TrainConfig(batch_size=8, learning_rate=0.005, width=4, epochs=5,
                          seed=3, patience=10)
        a = train(data, "1d", cfg)
        b = train(data, "1d", cfg)
        for pa, pb in zip(a.model.copy_parameters(), b.model.copy_parameters()):
            assert np.array_equal(pa, pb)

    def test_non_finite_loss_raises_with_epoch(self):
        pixels, labels = self.dataset()
        labels = labels.copy()
        labels[0, 0] = np.nan
        cfg = TrainConfig(batch_size=8, learning_rate=0.01, width=4, epochs=10,
                          seed=0, flow_scale=2.0)
        with pytest.raises(TrainingFailureError) as err:
            train((pixels, labels), "1d", cfg)
        assert err.value.epoch == 0

    def test_history_and_best_epoch(self):
        data = self.dataset()
        cfg = TrainConfig(batch_size=8, learning_rate=0.005, width=4, epochs=6,
                          seed=1, patience=20)
        result = train(data, "1d", cfg)
        assert [s.epoch for s in result.history] == list(range(len(result.history)))
        assert 0 <= result.best_epoch < len(result.history)

    def test_too_small_dataset_rejected(self):
        with pytest.raises(InvalidParameterError):
            train((np.zeros((1, 40, 6), dtype=np.float32), np.zeros((1, 2))),
                  "1d", TrainConfig(width=4))


class TestCrossValidate:
    def test_fold_partition_covers_everything_once(self):
        bounds = fold_slices(20_000, 5)
        assert bounds[0] == (0, 4000)
        assert bounds[-1] == (16_000, 20_000)
        seen = np.zeros(20_000, dtype=int)
        for lo, hi in bounds:
            seen[lo:hi] += 1
        assert np.all(seen == 1)
        # per-fold pools: 16,000 train+val -> 12,800 / 3,200 at 20% reserve
        pool = 20_000 - 4000
        assert pool - int(round(pool * 0.2)) == 12_800
        assert int(round(pool * 0.2)) == 3_200

    def test_remainder_goes_to_last_fold(self):
        bounds = fold_slices(23, 5)
        assert bounds[-1] == (16, 23)

    def test_empty_grid_rejected(self):
        data = (np.zeros((10, 40, 6), dtype=np.float32), np.zeros((10, 2)))
        with pytest.raises(InvalidParameterError):
            cross_validate(data, "1d", grid={"width": []})

    def test_duplicate_dataset_invariance(self):
        rng = np.random.default_rng(11)
        n = 20
        pixels = rng.random((n, 40, 6)).astype(np.float32)
        labels = np.column_stack([rng.uniform(75, 95, n), rng.uniform(0, 2, n)])
        base = TrainConfig(batch_size=1000, learning_rate=0.01, width=3,
                           epochs=8, seed=0, patience=20, flow_scale=2.0)
        grid = {"width": [3]}
        single = cross_validate((pixels, labels), "1d", grid=grid, base_config=base)
        doubled = cross_validate((np.repeat(pixels, 2, axis=0),
                                  np.repeat(labels, 2, axis=0)),
                                 "1d", grid=grid, base_config=base)
        for a, b in zip(single.folds, doubled.folds):
            assert a.rmse_temp == pytest.approx(b.rmse_temp, rel=1e-3)
            assert a.rmse_flow == pytest.approx(b.rmse_flow, rel=1e-3)

    def test_report_csv(self, tmp_path):
        rng = np.random.default_rng(2)
        pixels = rng.random((15, 40, 6)).astype(np.float32)
        labels = np.column_stack([rng.uniform(75, 95, 15), rng.uniform(0, 2, 15)])
        base = TrainConfig(batch_size=4, learning_rate=0.01, width=3, epochs=2,
                           seed=0, flow_scale=2.0)
        report = cross_validate((pixels, labels), "1d", grid={"width": [3]},
                                base_config=base)
        path = tmp_path / "cv.csv"
        report.to_csv(path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 1 + 5 + 2   # header, five folds, mean and std rows


class TestMetrics:
    def test_perfect_fit(self):
        y = np.array([1.0, 2.0, 3.0])
        assert rmse(y, y) == 0.0
        assert r2(y, y) == 1.0

    def test_mean_predictor_r2_zero(self):
        y = np.array([0.0, 2.0, 4.0])
        y_hat = np.full(3, y.mean())
        assert r2(y, y_hat) == 0.0

    def test_rmse_direct(self):
        assert rmse(np.array([0.0, 2.0]), np.array([1.0, 1.0])) == 1.0

    def test_zero_variance_rejected(self):
        with pytest.raises(UndefinedMetricError):
            r2(np.array([2.0, 2.0]), np.array([1.0, 3.0]))

    def test_per_target_columns(self):
        y = np.array([[0.0, 1.0], [2.0, 3.0]])
        y_hat = np.array([[1.0, 1.0], [1.0, 3.0]])
        out = rmse(y, y_hat)
        assert out == pytest.approx([1.0, 0.0])


class TestSmoothGrad:
    def setup_method(self):
        self.model = tiny_model(seed=9, dtype=np.float64, bias_shift=0.3)
        rng = np.random.default_rng(10)
        self.x = rng.random((12, 4))
        self.y = np.array([0.5, 1.0])
        # fixture sanity: live outputs so the gradient map is non-flat
        assert np.all(forward(self.model, self.x) > 0)

    def test_sigma_zero_equals_plain_gradient(self):
        _, grad = backward(self.model, self.x, self.y)
        mag = np.abs(grad)
        expected = (mag - mag.min()) / (mag.max() - mag.min())
        out = smoothgrad(self.model, self.x, self.y, m_samples=1, sigma=0.0)
        assert np.array_equal(out, expected)

    def test_sigma_zero_invariant_to_samples(self):
        a = smoothgrad(self.model, self.x, self.y, m_samples=1, sigma=0.0)
        b = smoothgrad(self.model, self.x, self.y, m_samples=9, sigma=0.0)
        assert np.array_equal(a, b)

    def test_default_noise_map_hits_unit_range(self):
        out = smoothgrad(self.model, self.x, self.y, m_samples=25, sigma=0.001)
        assert out.shape == self.x.shape
        assert out.min() == 0.0
        assert out.max() == 1.0

    def test_constant_map_normalizes_to_zeros(self):
        zero = tiny_model(seed=0, dtype=np.float64)
        zero.set_parameters([np.zeros_like(a) for _, _, a in zero.parameters()])
        out = smoothgrad(zero, self.x, self.y, m_samples=2, sigma=0.001)
        assert np.array_equal(out, np.zeros_like(self.x))

    def test_seeded_determinism(self):
        a = smoothgrad(self.model, self.x, self.y, m_samples=5, sigma=0.01, seed=3)
        b = smoothgrad(self.model, self.x, self.y, m_samples=5, sigma=0.01, seed=3)
        assert np.array_equal(a, b)


class TestCheckpoint:
    def test_roundtrip_exact(self, tmp_path):
        model = build_model("1d", 4, input_dims=(40, 6), seed=1,
                            label_scale=LabelScale(72.0, 212.0, 5.0))
        path = tmp_path / "model.panet"
        save_model(path, model)
        back = load_model(path)
        assert back.arch == "1d"
        assert back.width == 4
        assert back.input_dims == (40, 6)
        assert back.label_scale.flow_scale == 5.0
        for a, b in zip(model.copy_parameters(), back.copy_parameters()):
            assert np.array_equal(a, b)
        x = np.random.default_rng(0).random((40, 6))
        assert np.array_equal(forward(model, x), forward(back, x))

    def test_custom_chain_roundtrip(self, tmp_path):
        model = tiny_model(seed=5, dtype=np.float32)
        path = tmp_path / "custom.panet"
        save_model(path, model)
        back = load_model(path)
        x = np.random.default_rng(1).random((12, 4))
        assert np.allclose(forward(model, x), forward(back, x), atol=1e-6)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "model.panet"
        save_model(path, build_model("1d", 3, input_dims=(40, 6)))
        blob = bytearray(path.read_bytes())
        blob[:8] = b"WRONGMAG"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_model(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "model.panet"
        save_model(path, build_model("1d", 3, input_dims=(40, 6)))
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) - 17])
        with pytest.raises(FormatError):
            load_model(path)
