"""Tests for the LSTM forecaster: recurrence, gradients, Adam, training.

The recurrence oracle is a deliberately naive transcription of the textbook
LSTM equations evaluated with scalar loops, independent of the vectorized
implementation. Gradients are checked against central finite differences.
"""

import math

import numpy as np
import pytest

from oransim.kpi import CellId, KpiSeries
from oransim.forecast import (
    AdamHyper,
    AdamState,
    ForecastModel,
    HeadParams,
    InsufficientDataError,
    LayerParams,
    LstmConfig,
    NormStats,
    TrainingConfig,
    UndefinedMetricError,
    accuracy,
    adam_step,
    backward,
    compute_norm_stats,
    evaluate_heldout,
    forward,
    init_model,
    load_model,
    lstm_cell_step,
    make_windows,
    model_from_json,
    model_to_json,
    mse_loss,
    param_arrays,
    predict_from_window,
    predict_next_hour,
    save_model,
    train,
)


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))


def small_model(seed=0, n_layers=2, units=3, input_dim=2, output_dim=2):
    cfg = LstmConfig(n_layers, units, input_dim, output_dim)
    norm = NormStats(np.zeros(input_dim), np.ones(input_dim))
    return init_model(cfg, norm, rng_for(seed))


def series_from_arrays(prb, thr, cell=CellId(0, 0), start=0):
    return KpiSeries.from_arrays(cell, start, prb, thr)


def sine_series(n=200, seed=3, noise=0.0):
    rng = rng_for(seed)
    t = np.arange(n)
    prb = 50 + 30 * np.sin(2 * np.pi * t / 24) + rng.normal(0, noise, n)
    thr = 5 + 2 * np.cos(2 * np.pi * t / 24) + rng.normal(0, noise, n)
    return series_from_arrays(np.clip(prb, 0, 100), np.maximum(thr, 0.0))


# --- independent oracle: naive scalar transcription of the LSTM equations ---

def oracle_lstm_step(x, h_prev, c_prev, w_x, w_h, b, units):
    """One LSTM step computed element by element from the textbook equations."""
    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    h_new = np.zeros(units)
    c_new = np.zeros(units)
    for u in range(units):
        # gate rows: input u, forget units+u, output 2*units+u, candidate 3*units+u
        zi = b[u] + sum(w_x[u, k] * x[k] for k in range(len(x)))
        zi += sum(w_h[u, k] * h_prev[k] for k in range(units))
        zf = b[units + u] + sum(w_x[units + u, k] * x[k] for k in range(len(x)))
        zf += sum(w_h[units + u, k] * h_prev[k] for k in range(units))
        zo = b[2 * units + u] + sum(w_x[2 * units + u, k] * x[k] for k in range(len(x)))
        zo += sum(w_h[2 * units + u, k] * h_prev[k] for k in range(units))
        zg = b[3 * units + u] + sum(w_x[3 * units + u, k] * x[k] for k in range(len(x)))
        zg += sum(w_h[3 * units + u, k] * h_prev[k] for k in range(units))
        i, f, o, g = sig(zi), sig(zf), sig(zo), math.tanh(zg)
        c_new[u] = f * c_prev[u] + i * g
        h_new[u] = o * math.tanh(c_new[u])
    return h_new, c_new


def oracle_forward(model, window):
    units = model.config.units_per_layer
    h = [np.zeros(units) for _ in model.layers]
    c = [np.zeros(units) for _ in model.layers]
    for t in range(window.shape[0]):
        x = window[t]
        for l, layer in enumerate(model.layers):
            h[l], c[l] = oracle_lstm_step(x, h[l], c[l], layer.w_x, layer.w_h, layer.b, units)
            x = h[l]
    out = np.zeros(model.config.output_dim)
    for j in range(model.config.output_dim):
        out[j] = model.head.b[j] + sum(model.head.w[j, k] * h[-1][k] for k in range(units))
    return out


class TestLstmCell:
    def zero_layer(self, units=4, input_dim=2):
        return LayerParams(
            np.zeros((4 * units, input_dim)),
            np.zeros((4 * units, units)),
            np.zeros(4 * units),
        )

    def test_zero_params_zero_state(self):
        layer = self.zero_layer()
        h, c = lstm_cell_step(np.ones(2), np.zeros(4), np.zeros(4), layer)
        assert np.all(h == 0) and np.all(c == 0)

    def test_zero_params_carries_half_cell_state(self):
        # gates sit at 0.5, candidate at 0: c' = 0.5 c, h = 0.5 tanh(0.5 c)
        layer = self.zero_layer()
        c_prev = np.array([0.4, -1.2, 2.0, 0.0])
        h, c = lstm_cell_step(np.ones(2), np.zeros(4), c_prev, layer)
        assert np.allclose(c, 0.5 * c_prev, atol=1e-15)
        assert np.allclose(h, 0.5 * np.tanh(0.5 * c_prev), atol=1e-15)

    def test_matches_oracle_recurrence(self):
        rng = rng_for(11)
        model = small_model(seed=11, n_layers=1, units=5, input_dim=3)
        layer = model.layers[0]
        x = rng.normal(size=3)
        h_prev = rng.normal(size=5)
        c_prev = rng.normal(size=5)
        h, c = lstm_cell_step(x, h_prev, c_prev, layer)
        oh, oc = oracle_lstm_step(x, h_prev, c_prev, layer.w_x, layer.w_h, layer.b, 5)
        assert np.allclose(h, oh, atol=1e-12)
        assert np.allclose(c, oc, atol=1e-12)

    def test_batch_matches_single(self):
        model = small_model(seed=2, n_layers=1, units=4)
        layer = model.layers[0]
        rng = rng_for(3)
        xs = rng.normal(size=(6, 2))
        hs = rng.normal(size=(6, 4))
        cs = rng.normal(size=(6, 4))
        bh, bc = lstm_cell_step(xs, hs, cs, layer)
        for row in range(6):
            h, c = lstm_cell_step(xs[row], hs[row], cs[row], layer)
            assert np.allclose(bh[row], h, atol=1e-14)
            assert np.allclose(bc[row], c, atol=1e-14)

    def test_shape_mismatch_rejected(self):
        layer = self.zero_layer()
        with pytest.raises(ValueError):
            lstm_cell_step(np.ones(3), np.zeros(4), np.zeros(4), layer)
        with pytest.raises(ValueError):
            lstm_cell_step(np.ones(2), np.zeros(5), np.zeros(4), layer)


class TestForward:
    def test_zero_parameters_give_zero_prediction(self):
        cfg = LstmConfig(2, 3, 2, 2)
        layers = [
            LayerParams(np.zeros((12, 2)), np.zeros((12, 3)), np.zeros(12)),
            LayerParams(np.zeros((12, 3)), np.zeros((12, 3)), np.zeros(12)),
        ]
        head = HeadParams(np.zeros((2, 3)), np.zeros(2))
        model = ForecastModel(cfg, layers, head, NormStats(np.zeros(2), np.ones(2)))
        assert np.all(forward(model, np.ones((8, 2))) == 0)

    def test_lookback_one_reduces_to_single_step(self):
        model = small_model(seed=5, n_layers=1, units=4)
        x = np.array([[0.3, -0.7]])
        h, _ = lstm_cell_step(x[0], np.zeros(4), np.zeros(4), model.layers[0])
        assert np.allclose(forward(model, x), h @ model.head.w.T + model.head.b, atol=1e-14)

    def test_matches_oracle_on_fixed_window(self):
        model = small_model(seed=9, n_layers=2, units=3)
        window = rng_for(10).uniform(-1, 1, size=(6, 2))
        assert np.allclose(forward(model, window), oracle_forward(model, window), atol=1e-12)

    def test_batched_forward_matches_loop(self):
        model = small_model(seed=6)
        windows = rng_for(8).uniform(0, 1, size=(5, 7, 2))
        batched = forward(model, windows)
        for i in range(5):
            assert np.allclose(batched[i], forward(model, windows[i]), atol=1e-14)

    def test_wrong_input_dim_rejected(self):
        model = small_model()
        with pytest.raises(ValueError):
            forward(model, np.ones((4, 3)))


class TestMseLoss:
    def test_zero_at_equality(self):
        x = rng_for(1).normal(size=(4, 2))
        assert mse_loss(x, x) == 0.0

    def test_unit_difference(self):
        assert mse_loss(np.array([2.0, 3.0]), np.array([1.0, 2.0])) == 1.0

    def test_matches_independent_summation(self):
        rng = rng_for(2)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        manual = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / 12
        assert mse_loss(a, b) == pytest.approx(manual, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(np.zeros(2), np.zeros(3))


class TestBackward:
    def gradcheck(self, model, inputs, targets, step=1e-5, tol=1e-4):
        grads = backward(model, inputs, targets)
        worst = 0.0
        for arr, grad in zip(param_arrays(model), grads):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + step
                up = mse_loss(forward(model, inputs), targets)
                arr[idx] = orig - step
                down = mse_loss(forward(model, inputs), targets)
                arr[idx] = orig
                fd = (up - down) / (2 * step)
                rel = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-5)
                worst = max(worst, rel)
        assert worst < tol, f"worst relative gradient error {worst}"

    def test_gradients_match_finite_differences(self):
        rng = rng_for(21)
        model = small_model(seed=21, n_layers=2, units=3)
        inputs = rng.uniform(0, 1, size=(4, 4, 2))
        targets = rng.uniform(0, 1, size=(4, 2))
        self.gradcheck(model, inputs, targets)

    def test_zero_gradients_at_exact_fit(self):
        model = small_model(seed=4, n_layers=1, units=3)
        inputs = rng_for(5).uniform(0, 1, size=(3, 4, 2))
        targets = forward(model, inputs)  # loss is exactly zero here
        grads = backward(model, inputs, targets)
        assert all(np.allclose(g, 0.0, atol=1e-15) for g in grads)

    def test_gradients_are_pure(self):
        model = small_model(seed=7)
        rng = rng_for(6)
        inputs = rng.uniform(0, 1, size=(4, 5, 2))
        targets = rng.uniform(0, 1, size=(4, 2))
        first = backward(model, inputs, targets)
        second = backward(model, inputs, targets)
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_empty_batch_rejected(self):
        model = small_model()
        with pytest.raises(ValueError):
            backward(model, np.zeros((0, 4, 2)), np.zeros((0, 2)))


class TestAdam:
    def test_zero_gradients_fixed_point(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        grads = [np.zeros(2), np.zeros((1, 1))]
        state = AdamState.zeros_like(params)
        new_params, new_state = adam_step(params, grads, state, AdamHyper())
        assert all(np.array_equal(p, q) for p, q in zip(params, new_params))
        assert new_state.step == 1

    def test_first_step_moves_by_lr_times_sign(self):
        hyper = AdamHyper(learning_rate=0.01)
        params = [np.array([1.0, 1.0])]
        grads = [np.array([0.5, -2.0])]
        new_params, _ = adam_step(params, grads, AdamState.zeros_like(params), hyper)
        delta = new_params[0] - params[0]
        assert delta == pytest.approx([-0.01, 0.01], rel=1e-6)

    def test_quadratic_descent_matches_hand_iteration(self):
        # oracle: Adam iterated by hand on f(w) = w^2 from w = 1
        hyper = AdamHyper(learning_rate=0.1)
        w, m, v = 1.0, 0.0, 0.0
        expected = []
        for t in range(1, 4):
            g = 2.0 * w
            m = hyper.beta1 * m + (1 - hyper.beta1) * g
            v = hyper.beta2 * v + (1 - hyper.beta2) * g * g
            m_hat = m / (1 - hyper.beta1**t)
            v_hat = v / (1 - hyper.beta2**t)
            w = w - hyper.learning_rate * m_hat / (math.sqrt(v_hat) + hyper.epsilon)
            expected.append(w)

        params = [np.array([1.0])]
        state = AdamState.zeros_like(params)
        actual = []
        for _ in range(3):
            grads = [2.0 * params[0]]
            params, state = adam_step(params, grads, state, hyper)
            actual.append(float(params[0][0]))
        assert actual == pytest.approx(expected, rel=1e-12)
        assert abs(actual[-1]) < 1.0

    def test_shape_mismatch_rejected(self):
        params = [np.zeros(2)]
        state = AdamState.zeros_like(params)
        with pytest.raises(ValueError):
            adam_step(params, [np.zeros(3)], state, AdamHyper())


class TestWindows:
    def test_window_count_minimal(self):
        series = sine_series(25)
        cfg = TrainingConfig(lookback=24, seed=0)
        windows = make_windows(series, cfg, compute_norm_stats(series.to_array()))
        assert len(windows) == 1

    def test_window_count_arithmetic(self):
        series = sine_series(600)
        cfg = TrainingConfig(lookback=24, seed=0)
        windows = make_windows(series, cfg, compute_norm_stats(series.to_array()))
        assert len(windows) == 576

    def test_targets_are_next_hour(self):
        series = sine_series(30)
        cfg = TrainingConfig(lookback=4, seed=0)
        norm = compute_norm_stats(series.to_array())
        windows = make_windows(series, cfg, norm)
        values = norm.normalize(series.to_array())
        for i in range(len(windows)):
            assert np.array_equal(windows.inputs[i], values[i : i + 4])
            assert np.array_equal(windows.targets[i], values[i + 4])
            assert windows.provenance[i] == (series.cell, i)

    def test_constant_series_normalizes_to_equal_inputs(self):
        series = series_from_arrays([50.0] * 30, [2.0] * 30)
        norm = NormStats(np.array([0.0, 0.0]), np.array([100.0, 4.0]))
        cfg = TrainingConfig(lookback=5, seed=0)
        windows = make_windows(series, cfg, norm)
        assert np.all(windows.inputs == windows.inputs[0, 0])

    def test_too_short_series_rejected(self):
        series = sine_series(10)
        with pytest.raises(InsufficientDataError):
            make_windows(series, TrainingConfig(lookback=24, seed=0),
                         compute_norm_stats(series.to_array()))


class TestNormStats:
    def test_round_trip(self):
        rng = rng_for(12)
        values = rng.uniform(-5, 50, size=(40, 2))
        norm = compute_norm_stats(values)
        assert np.allclose(norm.denormalize(norm.normalize(values)), values, atol=1e-12)

    def test_degenerate_feature_maps_to_zero(self):
        values = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
        norm = compute_norm_stats(values)
        normalized = norm.normalize(values)
        assert np.all(normalized[:, 0] == 0.0)
        assert np.all(norm.denormalize(normalized)[:, 0] == 7.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            NormStats(np.array([1.0]), np.array([0.0]))


class TestTraining:
    def test_deterministic_given_seed(self):
        series = sine_series(80, noise=0.1)
        cfg = TrainingConfig(epochs=3, lookback=8, seed=42)
        lstm = LstmConfig(1, 4, 2, 2)
        model_a, log_a = train(series, lstm, cfg)
        model_b, log_b = train(series, lstm, cfg)
        assert all(
            np.array_equal(p, q)
            for p, q in zip(param_arrays(model_a), param_arrays(model_b))
        )
        assert log_a == log_b

    def test_loss_decreases_on_clean_sine(self):
        series = sine_series(200, noise=0.0)
        cfg = TrainingConfig(epochs=40, lookback=12, seed=1)
        model, log = train(series, LstmConfig(1, 8, 2, 2), cfg)
        assert log[-1].train_loss < 0.1 * log[0].train_loss
        assert model.trained_epochs == 40

    def test_insufficient_data_rejected(self):
        series = sine_series(25)
        with pytest.raises(InsufficientDataError):
            train(series, LstmConfig(1, 4, 2, 2), TrainingConfig(lookback=24, seed=0))

    def test_epochs_validation(self):
        with pytest.raises(ValueError):
            TrainingConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainingConfig(train_fraction=1.0)
        with pytest.raises(ValueError):
            TrainingConfig(horizon=2)

    def test_log_has_one_entry_per_epoch(self):
        series = sine_series(60)
        cfg = TrainingConfig(epochs=5, lookback=6, seed=2)
        _, log = train(series, LstmConfig(1, 3, 2, 2), cfg)
        assert [e.epoch for e in log] == [1, 2, 3, 4, 5]
        assert all(np.isfinite(e.val_loss) for e in log)


class TestPrediction:
    def test_constant_series_predicts_constant(self):
        # constant input is the MSE optimum; training should sit near it
        series = series_from_arrays([60.0] * 80, [3.0] * 80)
        cfg = TrainingConfig(epochs=60, lookback=8, seed=3)
        model, _ = train(series, LstmConfig(1, 4, 2, 2), cfg)
        pred = predict_next_hour(model, series, lookback=8)
        assert pred.prb_util == pytest.approx(60.0, abs=1e-3)
        assert pred.ip_throughput == pytest.approx(3.0, abs=1e-3)
        assert pred.timestamp == 80

    def test_clamping_to_valid_kpi_range(self):
        model = small_model(seed=13)
        # force denormalization far outside the valid range
        object.__setattr__(model.norm, "feature_min", np.array([0.0, 0.0]))
        object.__setattr__(model.norm, "feature_max", np.array([1000.0, 10.0]))
        model.head.b[:] = [1.0, -5.0]
        model.head.w[:] = 0.0
        for layer in model.layers:
            layer.w_x[:] = 0.0
            layer.w_h[:] = 0.0
            layer.b[:] = 0.0
        pred = predict_from_window(model, np.ones((4, 2)), next_timestamp=4)
        assert pred.prb_util == 100.0  # raw 1000 clamped
        assert pred.ip_throughput == 0.0  # raw -50 floored

    def test_zero_model_predicts_feature_minimum(self):
        cfg = LstmConfig(1, 3, 2, 2)
        layers = [LayerParams(np.zeros((12, 2)), np.zeros((12, 3)), np.zeros(12))]
        head = HeadParams(np.zeros((2, 3)), np.zeros(2))
        norm = NormStats(np.array([10.0, 0.5]), np.array([90.0, 9.5]))
        model = ForecastModel(cfg, layers, head, norm)
        pred = predict_from_window(model, np.ones((4, 2)), next_timestamp=4)
        assert pred.prb_util == 10.0
        assert pred.ip_throughput == 0.5

    def test_short_series_rejected(self):
        model = small_model()
        series = sine_series(10)
        with pytest.raises(InsufficientDataError):
            predict_next_hour(model, series, lookback=24)


class TestAccuracy:
    def test_perfect_prediction(self):
        assert accuracy([1.0, 2.0], [1.0, 2.0]) == 100.0

    def test_two_point_example(self):
        # APEs are 50% and 25%: accuracy = 100 - 37.5 = 62.5
        assert accuracy([1.0, 5.0], [2.0, 4.0]) == pytest.approx(62.5)

    def test_floor_at_zero(self):
        assert accuracy([2.0, 4.0], [1.0, 2.0]) == 0.0

    def test_scale_invariance(self):
        rng = rng_for(14)
        pred = rng.uniform(1, 10, size=20)
        act = rng.uniform(1, 10, size=20)
        assert accuracy(3.7 * pred, 3.7 * act) == pytest.approx(accuracy(pred, act), rel=1e-12)

    def test_near_zero_actuals_excluded(self):
        # the zero actual would blow up MAPE; it must be dropped from the mean
        assert accuracy([1.0, 2.0], [0.0, 2.0]) == 100.0

    def test_all_excluded_raises(self):
        with pytest.raises(UndefinedMetricError):
            accuracy([1.0], [0.0])

    def test_heldout_evaluation(self):
        series = sine_series(120, noise=0.0)
        cfg = TrainingConfig(epochs=60, lookback=12, seed=4)
        model, _ = train(series, LstmConfig(1, 8, 2, 2), cfg)
        acc, n_points = evaluate_heldout(model, series, cfg)
        assert n_points == 120 - 12 - (96 - 12)  # targets at hours >= 96
        assert acc > 90.0


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        series = sine_series(60, noise=0.05)
        cfg = TrainingConfig(epochs=2, lookback=6, seed=9)
        model, _ = train(series, LstmConfig(2, 4, 2, 2), cfg)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.config == model.config
        assert loaded.trained_epochs == model.trained_epochs
        assert np.array_equal(loaded.norm.feature_min, model.norm.feature_min)
        assert np.array_equal(loaded.norm.feature_max, model.norm.feature_max)
        for a, b in zip(param_arrays(model), param_arrays(loaded)):
            assert np.array_equal(a, b)

    def test_serialization_is_deterministic(self):
        model = small_model(seed=17)
        assert model_to_json(model) == model_to_json(model)

    def test_rejects_foreign_files(self):
        with pytest.raises(ValueError):
            model_from_json('{"format": "something-else"}')

    def test_save_load_preserves_predictions(self, tmp_path):
        model = small_model(seed=19)
        window = rng_for(20).uniform(0, 1, size=(6, 2))
        path = tmp_path / "m.json"
        save_model(model, path)
        assert np.array_equal(forward(model, window), forward(load_model(path), window))


class TestShapeInvariance:
    def test_init_shapes_match_config(self):
        cfg = LstmConfig(3, 5, 2, 2)
        model = init_model(cfg, NormStats(np.zeros(2), np.ones(2)), rng_for(1))
        model.validate_shapes()
        assert model.layers[0].w_x.shape == (20, 2)
        assert model.layers[1].w_x.shape == (20, 5)
        assert model.head.w.shape == (2, 5)

    def test_forget_gate_bias_initialized_to_one(self):
        model = small_model(seed=23, units=4)
        for layer in model.layers:
            assert np.all(layer.b[4:8] == 1.0)
            assert np.all(layer.b[:4] == 0.0)
            assert np.all(layer.b[8:] == 0.0)

    def test_validate_rejects_bad_shapes(self):
        model = small_model()
        model.head.b = np.zeros(5)
        with pytest.raises(ValueError):
            model.validate_shapes()
