import numpy as np
import pytest

from lowspec.architectures import (
    ARCHITECTURES,
    EMBEDDING_DIM,
    ArchitectureId,
    as_batch,
    build,
    embed,
    train_binary,
    train_extractor,
)
from lowspec.errors import ParameterError, ShapeError
from lowspec.nn import LSTM, Conv2D, ConvLSTM, L2Norm, Residual, Sigmoid, TrainConfig, grad_check
from lowspec.spectrogram import StftConfig, spectrogram_stack
from lowspec.synth import (
    NoiseSpec,
    make_binary_dataset,
    make_multiclass_dataset,
    sample_signature,
    sample_signature_bank,
)

SMALL_SHAPES = {
    "spec_cnn": (24, 40), "oc_spec_cnn": (24, 24), "si_spec_cnn": (8, 6),
    "mini_deep": (32, 31), "lenet": (32, 32), "basic_cnn": (10, 10),
}


def convs(model):
    out = []
    for layer in model.layers:
        if isinstance(layer, Conv2D):
            out.append(layer)
        if isinstance(layer, Residual):
            out.extend(x for x in layer.layers if isinstance(x, Conv2D))
    return out


def test_spec_cnn_ends_in_single_sigmoid():
    m = build("spec_cnn", (64, 64))
    assert isinstance(m.layers[-1], Sigmoid)
    assert m.output_shape == (1,)


def test_oc_spec_cnn_has_lstm_after_convs():
    m = build("oc_spec_cnn")
    kinds = [type(x) for x in m.layers]
    assert LSTM in kinds
    assert kinds.index(LSTM) > max(i for i, k in enumerate(kinds) if k is Conv2D)


def test_si_spec_cnn_has_convlstm_and_unit_embedding():
    m = build("si_spec_cnn")
    assert any(isinstance(x, ConvLSTM) for x in m.layers)
    assert isinstance(m.layers[-1], L2Norm)
    e = m.forward(np.random.default_rng(0).random((2, 1, 64, 63)))
    assert np.allclose(np.linalg.norm(e, axis=1), 1.0)


@pytest.mark.parametrize("name", ARCHITECTURES)
def test_every_recipe_composes_on_benchmark_shape(name):
    m = build(name, (64, 63))
    y = m.forward(np.random.default_rng(1).random((2, 1, 64, 63)))
    assert y.shape == (2,) + m.output_shape
    assert np.isfinite(y).all()
    for conv in convs(m):
        assert conv.stride[1] >= conv.stride[0]


@pytest.mark.parametrize("name", ARCHITECTURES)
def test_architecture_gradients(name):
    # seed 0 keeps every relu pre-activation and pool window clear of a kink at this step
    m = build(name, SMALL_SHAPES[name], seed=0)
    x = np.random.default_rng(3).random((2, 1) + SMALL_SHAPES[name])
    report = grad_check(m, x, n_checks=8)
    assert report.passed, report.failures[:3]


def test_unknown_architecture_and_head():
    with pytest.raises(ParameterError):
        build("resnet50")
    with pytest.raises(ParameterError):
        build("spec_cnn", head="ranking")
    with pytest.raises(ParameterError):
        ArchitectureId("spec_cnn", (64,))
    with pytest.raises(ShapeError):
        build("lenet", (8, 8))


def test_embedding_heads_have_width_64():
    for name, head in (("oc_spec_cnn", "softmax"), ("si_spec_cnn", "embedding"), ("spec_cnn", "embedding")):
        m = build(name, head=head)
        assert m.embedding_shape == (EMBEDDING_DIM,)


def test_as_batch_shapes():
    assert as_batch(np.zeros((4, 5))).shape == (1, 1, 4, 5)
    assert as_batch(np.zeros((3, 4, 5))).shape == (3, 1, 4, 5)
    with pytest.raises(ShapeError):
        as_batch(np.zeros(5))


@pytest.fixture(scope="module")
def small_binary():
    target = sample_signature(5, signature_id="target")
    return (make_binary_dataset(target, 30, 30, seed=1),
            make_binary_dataset(target, 20, 20, seed=2, split="test"))


def test_train_binary_beats_random_weights_and_repeats(small_binary):
    train_set, _ = small_binary
    cfg = TrainConfig(epochs=8, batch_size=10)
    m = train_binary("basic_cnn", train_set, cfg)
    x = as_batch(spectrogram_stack(train_set.audio_items(), StftConfig(), 0.75, 44100))
    y = train_set.labels
    acc = np.mean((m.predict(x)[:, 0] > 0.5) == y)
    untrained = build("basic_cnn", x.shape[2:], seed=0)
    base = np.mean((untrained.predict(x)[:, 0] > 0.5) == y)
    assert acc >= base
    assert acc > 0.8
    assert train_binary("basic_cnn", train_set, cfg).weights_digest() == m.weights_digest()


def test_train_binary_rejects_wrong_regime():
    bank = sample_signature_bank(2, 0)
    with pytest.raises(ParameterError):
        train_binary("basic_cnn", make_multiclass_dataset(bank, 2), TrainConfig(epochs=1))


@pytest.fixture(scope="module")
def extractor():
    target = sample_signature(9, signature_id="target")
    bank = sample_signature_bank(4, seed=3, exclude=target)
    aux = make_multiclass_dataset(bank, 20, NoiseSpec(3.0), seed=1)
    held = make_multiclass_dataset(bank, 10, NoiseSpec(3.0), seed=2, split="test")
    model = train_extractor("oc_spec_cnn", aux, TrainConfig(epochs=12, batch_size=20, loss="cce"))
    return model, held


def test_extractor_beats_chance(extractor):
    model, held = extractor
    x = as_batch(spectrogram_stack(held.audio_items(), StftConfig(), 0.75, 44100))
    acc = np.mean(model.predict(x).argmax(1) == held.labels)
    assert acc > 1 / 4


def test_same_signature_embeddings_are_closer(extractor):
    model, held = extractor
    x = spectrogram_stack(held.audio_items(), StftConfig(), 0.75, 44100)
    e = embed(model, x)
    y = held.labels
    r = np.random.default_rng(0)
    wins = 0
    for _ in range(200):
        a = r.integers(len(y))
        p = r.choice(np.flatnonzero((y == y[a]) & (np.arange(len(y)) != a)))
        n = r.choice(np.flatnonzero(y != y[a]))
        wins += np.linalg.norm(e[a] - e[p]) < np.linalg.norm(e[a] - e[n])
    assert wins >= 160


def test_embed_is_fixed_width_and_deterministic(extractor):
    model, held = extractor
    spec = spectrogram_stack(held.audio_items()[:1], StftConfig(), 0.75, 44100)[0]
    v1, v2 = embed(model, spec), embed(model, spec)
    assert v1.shape == (EMBEDDING_DIM,)
    assert np.array_equal(v1, v2)
    assert np.isfinite(v1).all()
