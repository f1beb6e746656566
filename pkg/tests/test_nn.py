import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowspec.errors import ArtifactError, ParameterError, ShapeError, TrainingError
from lowspec.nn import (
    LSTM,
    Conv2D,
    ConvLSTM,
    Dense,
    Flatten,
    GlobalAvgPool,
    L2Norm,
    MaxPool2D,
    ModelGraph,
    ReLU,
    Residual,
    Sequence,
    Sigmoid,
    Softmax,
    Tanh,
    TrainConfig,
    convlstm_step,
    convlstm_step_backward,
    grad_check,
    layer_from_config,
    load_model,
    lstm_step,
    lstm_step_backward,
    save_model,
    train,
)
from lowspec.nn import losses as L
from lowspec.nn.kernels import COL2IM, IM2COL, out_size
from lowspec.nn.optim import SGD, Adam, make_optimizer

rng0 = np.random.default_rng(0)


# ---------------------------------------------------------------------------
# forward semantics
# ---------------------------------------------------------------------------


def test_identity_dense_passes_input_through():
    m = ModelGraph([Dense(4)], (4,))
    m.set_weights([np.eye(4), np.zeros(4)])
    x = rng0.standard_normal((3, 4))
    assert np.array_equal(m.forward(x), x)


def test_relu_values():
    m = ModelGraph([ReLU()], (3,))
    assert m.forward(np.array([[-1.0, 0.0, 2.0]])).tolist() == [[0.0, 0.0, 2.0]]


def direct_conv(x, w, b, stride):
    """Plain loop cross-correlation, valid padding."""
    bsz, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    sh, sw = stride
    ho, wo = (h - kh) // sh + 1, (wd - kw) // sw + 1
    out = np.zeros((bsz, f, ho, wo))
    for n in range(bsz):
        for k in range(f):
            for i in range(ho):
                for j in range(wo):
                    out[n, k, i, j] = np.sum(x[n, :, i * sh : i * sh + kh, j * sw : j * sw + kw] * w[k]) + b[k]
    return out


def test_delta_kernel_shifts_input():
    m = ModelGraph([Conv2D(1, (3, 3))], (1, 6, 7))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 2, 1] = 1.0
    m.set_weights([w.reshape(1, 9), np.zeros(1)])
    x = rng0.standard_normal((2, 1, 6, 7))
    assert np.array_equal(m.forward(x)[:, 0], x[:, 0, 2:, 1:6])


@pytest.mark.parametrize("kernel,stride", [((3, 5), (1, 2)), ((2, 2), (2, 2)), ((1, 3), (3, 1))])
def test_conv_matches_direct_oracle(kernel, stride):
    m = ModelGraph([Conv2D(3, kernel, stride)], (2, 9, 11))
    w = rng0.standard_normal((3, 2) + kernel)
    b = rng0.standard_normal(3)
    m.set_weights([w.reshape(3, -1), b])
    x = rng0.standard_normal((2, 2, 9, 11))
    assert np.allclose(m.forward(x), direct_conv(x, w, b, stride), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(5, 20), st.integers(5, 20), st.integers(1, 5), st.integers(1, 5),
       st.integers(1, 3), st.integers(1, 3))
def test_conv_output_shape(h, w, kh, kw, sh, sw):
    m = ModelGraph([Conv2D(2, (kh, kw), (sh, sw))], (1, h, w))
    assert m.output_shape == (2, (h - kh) // sh + 1, (w - kw) // sw + 1)
    assert m.forward(np.zeros((1, 1, h, w))).shape[1:] == m.output_shape


def test_softmax_rows_and_sigmoid_range():
    x = rng0.standard_normal((10, 5)) * 30
    p = ModelGraph([Softmax()], (5,)).forward(x)
    assert np.abs(p.sum(axis=1) - 1).max() < 1e-9
    s = ModelGraph([Sigmoid()], (5,)).forward(x / 3)
    assert ((s > 0) & (s < 1)).all()


def test_l2norm_unit_rows():
    y = ModelGraph([L2Norm()], (6,)).forward(rng0.standard_normal((4, 6)))
    assert np.allclose(np.linalg.norm(y, axis=1), 1.0)


def test_shape_errors():
    with pytest.raises(ShapeError):
        ModelGraph([Dense(3)], (2, 2))
    with pytest.raises(ShapeError):
        ModelGraph([Conv2D(2, (5, 5))], (1, 3, 3))
    m = ModelGraph([Dense(2)], (3,))
    with pytest.raises(ShapeError):
        m.forward(np.zeros((1, 4)))
    with pytest.raises(ShapeError):
        layer_from_config({"kind": "attention"})
    with pytest.raises(ShapeError):
        ModelGraph([Residual([Dense(2)])], (3,))


# ---------------------------------------------------------------------------
# gradient checks, one per layer kind
# ---------------------------------------------------------------------------

LAYER_CASES = {
    "conv2d": ([Conv2D(3, (3, 2), (1, 2))], (2, 6, 7)),
    "conv2d_same": ([Conv2D(2, (3, 3), padding="same")], (2, 5, 5)),
    "maxpool2d": ([MaxPool2D((2, 2))], (2, 6, 6)),
    "dense": ([Dense(5)], (4,)),
    "relu": ([ReLU()], (7,)),
    "sigmoid": ([Sigmoid()], (7,)),
    "tanh": ([Tanh()], (7,)),
    "softmax": ([Softmax()], (6,)),
    "flatten": ([Flatten()], (2, 3, 4)),
    "l2norm": ([L2Norm()], (6,)),
    "global_avg_pool": ([GlobalAvgPool()], (3, 4, 5)),
    "sequence": ([Sequence()], (2, 3, 4)),
    "sequence_maps": ([Sequence(maps=True)], (2, 3, 4)),
    "lstm": ([LSTM(5)], (4, 3)),
    "lstm_sequences": ([LSTM(3, return_sequences=True)], (4, 3)),
    "convlstm": ([ConvLSTM(2, (3, 3))], (3, 1, 4, 4)),
    "convlstm_sequences": ([ConvLSTM(2, (3, 1), return_sequences=True)], (3, 2, 4, 1)),
    "residual": ([Residual([Dense(4), Tanh(), Dense(4)])], (4,)),
}


@pytest.mark.parametrize("name", sorted(LAYER_CASES))
def test_layer_gradients(name):
    layers, shape = LAYER_CASES[name]
    m = ModelGraph(layers, shape, seed=3)
    x = np.random.default_rng(1).standard_normal((3,) + shape)
    if name == "maxpool2d":
        x += np.arange(x.size).reshape(x.shape) * 1e-2  # keep window maxima well separated
    report = grad_check(m, x, n_checks=15, eps=1e-4)
    assert report.passed, report.failures[:3]
    assert report.n_checked > 0


def test_corrupted_gradient_is_caught():
    m = ModelGraph([Dense(4), Tanh(), Dense(1)], (3,), seed=1)
    good = Dense.backward

    def skewed(self, dy):
        dx = good(self, dy)
        self.grads = {k: v * 1.1 for k, v in self.grads.items()}
        return dx

    x = np.random.default_rng(2).standard_normal((5, 3))
    assert grad_check(m, x).passed
    Dense.backward = skewed
    try:
        report = grad_check(m, x)
    finally:
        Dense.backward = good
    assert not report.passed
    assert report.failures


def test_dense_relu_bce_stack():
    m = ModelGraph([Dense(6), ReLU(), Dense(1), Sigmoid()], (4,), seed=5)
    x = np.random.default_rng(4).standard_normal((8, 4))
    y = (x[:, 0] > 0).astype(float)[:, None]
    report = grad_check(m, x, objective=lambda p: (L.bce(p, y), L.bce_grad(p, y)), eps=1e-4)
    assert report.passed, report.failures[:3]


# ---------------------------------------------------------------------------
# recurrent steps
# ---------------------------------------------------------------------------


def lstm_params(d, n, seed=0):
    r = np.random.default_rng(seed)
    return r.standard_normal((d, 4 * n)) * 0.5, r.standard_normal((n, 4 * n)) * 0.5, r.standard_normal(4 * n) * 0.1


def test_lstm_zero_state_zero_input():
    W, U, _ = lstm_params(3, 4)
    c, h, _ = lstm_step(np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((2, 3)), W, U, np.zeros(16))
    assert not c.any() and not h.any()


def test_lstm_saturated_forget_preserves_cell():
    n = 3
    b = np.zeros(4 * n)
    b[:n] = -50.0  # input gate closed
    b[n : 2 * n] = 50.0  # forget gate open
    c0 = np.random.default_rng(1).standard_normal((2, n))
    c, _, _ = lstm_step(c0, np.zeros((2, n)), np.ones((2, 5)), np.zeros((5, 4 * n)), np.zeros((n, 4 * n)), b)
    assert np.array_equal(c, c0)


def fd_check(f, arrays, grads, eps=1e-6, tol=1e-3):
    """Central differences of scalar ``f()`` against analytic ``grads`` for every entry."""
    worst = 0.0
    for a, g in zip(arrays, grads):
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + eps
            fp = f()
            a[idx] = old - eps
            fm = f()
            a[idx] = old
            num = (fp - fm) / (2 * eps)
            worst = max(worst, abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-6))
    assert worst <= tol
    return worst


def test_lstm_step_gradients():
    r = np.random.default_rng(3)
    W, U, b = lstm_params(3, 2, seed=3)
    c, h, x = r.standard_normal((2, 2)), r.standard_normal((2, 2)), r.standard_normal((2, 3))
    rc, rh = r.standard_normal((2, 2)), r.standard_normal((2, 2))

    def f():
        cn, hn, _ = lstm_step(c, h, x, W, U, b)
        return float((cn * rc).sum() + (hn * rh).sum())

    _, _, cache = lstm_step(c, h, x, W, U, b)
    dc, dh, dx, dW, dU, db = lstm_step_backward(rc, rh, cache, W, U)
    fd_check(f, [c, h, x, W, U, b], [dc, dh, dx, dW, dU, db])


def test_lstm_step_dim_mismatch():
    W, U, b = lstm_params(3, 2)
    with pytest.raises(ShapeError):
        lstm_step(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 4)), W, U, b)


def convlstm_params(cin, f, kernel, seed=0):
    r = np.random.default_rng(seed)
    k = (cin + f) * kernel[0] * kernel[1]
    return r.standard_normal((4 * f, k)) * 0.3, r.standard_normal(4 * f) * 0.1


def test_convlstm_zero_everything():
    W, _ = convlstm_params(1, 2, (3, 3))
    c, h, _ = convlstm_step(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 4, 4)), np.zeros((1, 1, 4, 4)), W,
                            np.zeros(8), (3, 3))
    assert not c.any() and not h.any()
    assert h.shape == (1, 2, 4, 4)


def test_convlstm_saturated_forget_preserves_cell():
    f = 2
    b = np.zeros(4 * f)
    b[:f], b[f : 2 * f] = -50.0, 50.0
    c0 = np.random.default_rng(0).standard_normal((1, f, 4, 4))
    x = np.random.default_rng(1).standard_normal((1, 1, 4, 4))
    c, _, _ = convlstm_step(c0, np.zeros_like(c0), x, np.zeros((4 * f, (1 + f) * 9)), b, (3, 3))
    assert np.array_equal(c, c0)


def test_convlstm_step_gradients_on_1x4x4_map():
    r = np.random.default_rng(7)
    W, b = convlstm_params(1, 2, (3, 3), seed=7)
    c, h = r.standard_normal((1, 2, 4, 4)), r.standard_normal((1, 2, 4, 4))
    x = r.standard_normal((1, 1, 4, 4))
    rc, rh = r.standard_normal(c.shape), r.standard_normal(h.shape)

    def f():
        cn, hn, _ = convlstm_step(c, h, x, W, b, (3, 3))
        return float((cn * rc).sum() + (hn * rh).sum())

    _, _, cache = convlstm_step(c, h, x, W, b, (3, 3))
    dc, dh, dx, dW, db = convlstm_step_backward(rc, rh, cache, W)
    fd_check(f, [c, h, x, W, b], [dc, dh, dx, dW, db])


def test_convlstm_step_dim_mismatch():
    W, b = convlstm_params(1, 2, (3, 3))
    with pytest.raises(ShapeError):
        convlstm_step(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 4, 4)), W, b, (3, 3))
    with pytest.raises(ShapeError):
        convlstm_step(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 4, 4)), np.zeros((1, 1, 4, 4)), W, b, (2, 2))


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def test_loss_hand_values():
    assert L.bce([[1.0]], [[1.0]]) < 1e-6
    assert abs(L.bce([[0.5]], [[1.0]]) - math.log(2)) < 1e-12
    assert abs(L.cce([[0.5, 0.5]], [[0.0, 1.0]]) - math.log(2)) < 1e-12
    assert L.cce([[0.0, 1.0, 0.0]], [1]) < 1e-6
    assert L.contrastive([0.0], [1]) == 0.0
    assert abs(L.contrastive([0.5], [0], margin=1.0) - 0.25) < 1e-12
    assert abs(L.contrastive([0.5], [1]) - 0.25) < 1e-12
    assert L.triplet([0.0], [1.0], 0.2) == 0.0
    assert abs(L.triplet([0.7], [0.7], 0.2) - 0.2) < 1e-12


def test_loss_errors():
    with pytest.raises(ParameterError):
        L.contrastive([-0.1], [1])
    with pytest.raises(ParameterError):
        L.triplet([0.1], [0.2], margin=0.0)


def test_triplet_gradient_vanishes_when_margin_holds():
    g_ap, g_an = L.triplet_grad([0.1, 0.2], [0.9, 1.5], 0.2)
    assert not g_ap.any() and not g_an.any()


def scalar_fd(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        fp = f(x)
        x[idx] = old - eps
        fm = f(x)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * eps)
    return g


@pytest.mark.parametrize("name", ["bce", "cce", "mse"])
def test_supervised_loss_gradients(name):
    r = np.random.default_rng(1)
    if name == "cce":
        p = r.random((4, 3)) + 0.1
        p /= p.sum(1, keepdims=True)
        y = np.array([0, 2, 1, 2])
    else:
        p = r.uniform(0.1, 0.9, (5, 1))
        y = (r.random((5, 1)) > 0.5).astype(float)
    value, grad = L.LOSSES[name]
    assert np.allclose(grad(p, y), scalar_fd(lambda q: value(q, y), p.copy()), rtol=1e-5, atol=1e-8)


def test_metric_loss_gradients():
    r = np.random.default_rng(2)
    d = r.uniform(0.1, 1.8, 6)
    same = np.array([1, 0, 1, 0, 0, 1])
    assert np.allclose(L.contrastive_grad(d, same), scalar_fd(lambda q: L.contrastive(q, same), d.copy()),
                       atol=1e-8)
    d_an = d[::-1].copy() + 0.05
    g_ap, g_an = L.triplet_grad(d, d_an)
    assert np.allclose(g_ap, scalar_fd(lambda q: L.triplet(q, d_an), d.copy()), atol=1e-8)
    assert np.allclose(g_an, scalar_fd(lambda q: L.triplet(d, q), d_an.copy()), atol=1e-8)
    a, b = r.standard_normal((3, 4)), r.standard_normal((3, 4))
    up = r.standard_normal(3)
    da, db = L.euclidean_grad(a, b, L.euclidean(a, b), up)
    assert np.allclose(da, scalar_fd(lambda q: float((L.euclidean(q, b) * up).sum()), a.copy()), atol=1e-8)
    assert np.allclose(db, -da)


# ---------------------------------------------------------------------------
# backward on a linear model, training
# ---------------------------------------------------------------------------


def test_linear_mse_gradient_closed_form():
    r = np.random.default_rng(0)
    X, y = r.standard_normal((8, 3)), r.standard_normal((8, 1))
    m = ModelGraph([Dense(1)], (3,))
    w = r.standard_normal((3, 1))
    m.set_weights([w, np.zeros(1)])
    p = m.forward(X)
    m.backward(L.mse_grad(p, y))
    assert np.allclose(m.layers[0].grads["W"], 2 * X.T @ (X @ w - y) / 8, atol=1e-12)


def test_zero_loss_batch_gives_zero_gradients():
    r = np.random.default_rng(1)
    m = ModelGraph([Dense(3), Tanh(), Dense(1)], (2,), seed=2)
    X = r.standard_normal((5, 2))
    p = m.forward(X)
    m.backward(L.mse_grad(p, p.copy()))
    for _, _, g in m.parameters():
        assert not g.any()


def test_gradients_finite_on_random_batch():
    m = ModelGraph([Conv2D(2, (3, 3)), ReLU(), Flatten(), Dense(1), Sigmoid()], (1, 6, 6), seed=0)
    x = np.random.default_rng(3).standard_normal((4, 1, 6, 6))
    p = m.forward(x)
    m.backward(L.bce_grad(p, np.array([[1], [0], [1], [0]])))
    assert all(np.isfinite(g).all() for _, _, g in m.parameters())


def toy_problem(n=200, seed=0):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, 2))
    y = (X @ np.array([1.5, -1.0]) + 0.3 > 0).astype(float)
    X += np.sign(y - 0.5)[:, None] * 0.3 * np.array([1.5, -1.0])  # widen the margin
    return X, y


def test_toy_separable_problem():
    X, y = toy_problem()
    m = ModelGraph([Dense(1), Sigmoid()], (2,), seed=1)
    train(m, (X, y), TrainConfig(epochs=50, batch_size=20, learning_rate=0.05))
    acc = np.mean((m.predict(X)[:, 0] > 0.5) == (y > 0.5))
    assert acc >= 0.99
    assert m.history[0]["loss"] > m.history[-1]["loss"]


def test_training_is_deterministic():
    X, y = toy_problem(seed=2)

    def run():
        m = ModelGraph([Dense(4), ReLU(), Dense(1), Sigmoid()], (2,), seed=9)
        return train(m, (X, y), TrainConfig(epochs=5, batch_size=16, seed=4)).weights_digest()

    assert run() == run()


def test_non_finite_loss_aborts():
    X, y = toy_problem()
    X[3, 0] = np.nan
    m = ModelGraph([Dense(1), Sigmoid()], (2,))
    with pytest.raises(TrainingError, match="non-finite"):
        train(m, (X, y), TrainConfig(epochs=2))


def test_train_input_errors():
    m = ModelGraph([Dense(1), Sigmoid()], (2,))
    with pytest.raises(TrainingError):
        train(m, (np.zeros((0, 2)), np.zeros(0)), TrainConfig())
    with pytest.raises(ParameterError):
        train(m, (np.zeros((3, 2)), np.zeros(2)), TrainConfig())
    with pytest.raises(ParameterError):
        train(m, (np.zeros((3, 2)), np.zeros(3), np.zeros(3)), TrainConfig())


def test_early_stopping_restores_best_weights():
    X, y = toy_problem(seed=5)
    m = ModelGraph([Dense(1), Sigmoid()], (2,), seed=0)
    cfg = TrainConfig(epochs=40, batch_size=20, learning_rate=0.05, early_stopping=True, patience=3)
    train(m, (X, y), cfg)
    assert len(m.history) <= 40
    assert all("val_accuracy" in h for h in m.history)


@pytest.mark.parametrize("kw", [
    {"epochs": 0}, {"batch_size": 0}, {"loss": "hinge"}, {"optimizer": "rmsprop"},
    {"learning_rate": 0.0}, {"margin": -1.0}, {"patience": 0}, {"val_fraction": 1.0},
])
def test_train_config_validation(kw):
    with pytest.raises(ParameterError):
        TrainConfig(**kw)


def test_default_margins():
    assert TrainConfig(loss="contrastive").effective_margin == 1.0
    assert TrainConfig(loss="triplet").effective_margin == 0.2
    assert TrainConfig(loss="triplet", margin=0.5).effective_margin == 0.5


def test_optimizers_descend_a_quadratic():
    for opt in (SGD(0.1), Adam(0.1), make_optimizer("adam", 0.05)):
        w = np.array([3.0, -2.0])
        for _ in range(200):
            opt.step([("w", w, 2 * w)])
        assert np.abs(w).max() < 0.1


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def small_model():
    return ModelGraph([Conv2D(2, (3, 3)), ReLU(), MaxPool2D((2, 2)), Flatten(), Dense(3), Softmax()],
                      (1, 8, 8), seed=4, name="small", embedding_index=5)


def test_save_load_roundtrip(tmp_path):
    m = small_model()
    m.round_to_float32()
    save_model(m, tmp_path / "m")
    back = load_model(tmp_path / "m")
    assert back.weights_digest() == m.weights_digest()
    assert back.config() == m.config()
    x = np.random.default_rng(0).random((2, 1, 8, 8))
    assert np.array_equal(back.forward(x), m.forward(x))


def test_tampered_manifest_shape(tmp_path):
    save_model(small_model(), tmp_path / "m")
    p = tmp_path / "m" / "manifest.json"
    doc = json.loads(p.read_text())
    doc["arrays"][0]["shape"] = [3, 9]
    p.write_text(json.dumps(doc))
    with pytest.raises(ArtifactError):
        load_model(tmp_path / "m")


def test_version_mismatch(tmp_path):
    save_model(small_model(), tmp_path / "m")
    p = tmp_path / "m" / "manifest.json"
    doc = json.loads(p.read_text())
    doc["format_version"] = 99
    p.write_text(json.dumps(doc))
    with pytest.raises(ArtifactError, match="migrate"):
        load_model(tmp_path / "m")


def test_weights_length_checks(tmp_path):
    save_model(small_model(), tmp_path / "m")
    w = tmp_path / "m" / "weights.bin"
    raw = w.read_bytes()
    w.write_bytes(raw + b"\0\0\0\0")
    with pytest.raises(ArtifactError, match="trailing"):
        load_model(tmp_path / "m")
    w.write_bytes(raw[:-4])
    with pytest.raises(ArtifactError):
        load_model(tmp_path / "m")
    w.unlink()
    with pytest.raises(ArtifactError, match="missing"):
        load_model(tmp_path / "m")


# ---------------------------------------------------------------------------
# numba and numpy kernels agree
# ---------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(4, 12), st.integers(4, 12),
       st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3))
def test_im2col_paths_agree_and_col2im_is_adjoint(b, c, h, w, kh, kw, sh, sw):
    kh, kw = min(kh, h), min(kw, w)
    r = np.random.default_rng(b * 1000 + h * 10 + w)
    xp = r.standard_normal((b, c, h, w))
    cols = IM2COL["numpy"](xp, kh, kw, sh, sw)
    assert np.array_equal(cols, IM2COL["numba"](xp, kh, kw, sh, sw))
    assert cols.shape == (b * out_size(h, kh, sh) * out_size(w, kw, sw), c * kh * kw)
    g = r.standard_normal(cols.shape)
    back_np = COL2IM["numpy"](g, xp.shape, kh, kw, sh, sw)
    assert np.allclose(back_np, COL2IM["numba"](g, xp.shape, kh, kw, sh, sw), atol=1e-12)
    assert abs(np.sum(cols * g) - np.sum(xp * back_np)) < 1e-9 * max(1.0, abs(np.sum(cols * g)))


def test_env_flag_selects_numpy_path():
    code = (
        "import lowspec._accel as a, lowspec.nn.kernels as k, lowspec.one_class.isotonic as i;"
        "print(a.USE_NUMBA, k.col2im is k._col2im_numpy, i.pav is i._pav_py)"
    )
    env = dict(os.environ, LOWSPEC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True", "True"]


def test_model_forward_identical_on_both_paths():
    code = (
        "import numpy as np; from lowspec.architectures import build;"
        "m = build('spec_cnn', (24, 40), seed=1);"
        "x = np.random.default_rng(0).random((2, 1, 24, 40));"
        "y = m.forward(x); m.backward(np.ones_like(y));"
        "print(repr(float(y.sum())), m.weights_digest()[:8], repr(float(sum(g.sum() for _, _, g in m.parameters()))))"
    )
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, LOWSPEC_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout.split())
    assert outs[0][:2] == outs[1][:2]
    assert abs(float(outs[0][2]) - float(outs[1][2])) < 1e-9
