import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowspec.architectures import build
from lowspec.errors import ArtifactError, ParameterError, TrainingError
from lowspec.nn import TrainConfig
from lowspec.siamese import (
    SiameseModel,
    load_siamese,
    save_siamese,
    select_threshold,
    similarity,
    threshold_accuracies,
    train_siamese,
    triplets_as_pairs,
    verify_fewshot,
)
from lowspec.synth import make_multiclass_dataset, sample_signature_bank

SHAPE = (12, 12)


def pair_accuracy(d, same, cut):
    return np.mean((np.asarray(d) < cut) == np.asarray(same, bool))


def brute_threshold(d, same):
    u = np.unique(d)
    cands = [u[0] - 1.0] + [(a + b) / 2 for a, b in zip(u[:-1], u[1:])] + [u[-1] + 1.0]
    return max(pair_accuracy(d, same, c) for c in cands)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=1, max_size=40))
def test_threshold_is_optimal_among_midpoints(pairs):
    d = np.array([p[0] for p in pairs], float) / 4
    same = np.array([p[1] for p in pairs])
    cut = select_threshold(d, same)
    assert pair_accuracy(d, same, cut) == brute_threshold(d, same)
    assert pair_accuracy(d, same, cut) >= pair_accuracy(d, same, np.median(d))


def test_threshold_perfect_separation():
    d = np.array([0.1, 0.2, 0.3, 1.0, 1.1])
    same = np.array([1, 1, 1, 0, 0])
    cut = select_threshold(d, same)
    assert 0.3 < cut < 1.0
    assert pair_accuracy(d, same, cut) == 1.0


def test_threshold_accuracies_match_direct_count():
    r = np.random.default_rng(0)
    d, same = r.random(30), r.random(30) < 0.5
    cuts = np.linspace(-0.1, 1.1, 25)
    direct = [pair_accuracy(d, same, c) for c in cuts]
    assert np.allclose(threshold_accuracies(d, same, cuts), direct)


def test_threshold_errors():
    with pytest.raises(ParameterError):
        select_threshold([], [])
    with pytest.raises(ParameterError):
        select_threshold([0.1, 0.2], [1])


def test_triplets_as_pairs():
    a, p, n = np.zeros((3, 2)), np.ones((3, 2)), np.full((3, 2), 2.0)
    x, y, same = triplets_as_pairs(a, p, n)
    assert x.shape == (6, 2) and same.tolist() == [1, 1, 1, 0, 0, 0]
    assert (y[:3] == 1).all() and (y[3:] == 2).all()


@pytest.fixture(scope="module")
def untrained():
    return SiameseModel(build("si_spec_cnn", SHAPE, head="embedding", seed=0))


def test_identical_inputs_have_zero_distance(untrained):
    x = np.random.default_rng(0).random((4,) + SHAPE)
    assert np.allclose(untrained.distances(x, x), 0.0, atol=1e-7)


def test_distance_is_symmetric_and_obeys_triangle(untrained):
    r = np.random.default_rng(1)
    a, b, c = (r.random((100,) + SHAPE) for _ in range(3))
    ab, ba = untrained.distances(a, b), untrained.distances(b, a)
    assert np.allclose(ab, ba, atol=1e-12)
    bc, ac = untrained.distances(b, c), untrained.distances(a, c)
    assert (ac <= ab + bc + 1e-9).all()


def test_branches_share_one_set_of_weights(untrained):
    single = build("si_spec_cnn", SHAPE, head="embedding", seed=0)
    assert untrained.trunk.n_params == single.n_params
    x = np.random.default_rng(2).random((3,) + SHAPE)
    before = untrained.distances(x, x[::-1])
    w = untrained.trunk.get_weights()
    untrained.trunk.set_weights([v * 1.5 for v in w])
    after = untrained.distances(x, x[::-1])
    untrained.trunk.set_weights(w)
    assert not np.allclose(before, after)


def test_similarity_needs_threshold(untrained):
    x = np.zeros(SHAPE)
    with pytest.raises(TrainingError):
        similarity(untrained, x, x)


def test_fewshot_query_equal_to_support(untrained):
    r = np.random.default_rng(3)
    support = r.random((3,) + SHAPE)
    pred = verify_fewshot(untrained, support, [7, 8, 9], support[[2, 0]])
    assert pred.tolist() == [9, 7]
    with pytest.raises(ParameterError):
        verify_fewshot(untrained, support[:0], [], support)
    with pytest.raises(ParameterError):
        verify_fewshot(untrained, support, [1, 2], support)


def test_loss_and_regime_must_match():
    bank = sample_signature_bank(2, 0)
    multi = make_multiclass_dataset(bank, 2)
    with pytest.raises(ParameterError):
        train_siamese("si_spec_cnn", multi, TrainConfig(epochs=1, loss="bce"))
    with pytest.raises(ParameterError):
        train_siamese("si_spec_cnn", multi, TrainConfig(epochs=1, loss="contrastive"))


def bar_image(cls, rng):
    img = rng.random(SHAPE) * 0.3
    img[2 + 4 * cls] += 1.0
    return img


@pytest.fixture(scope="module")
def trained():
    r = np.random.default_rng(0)
    n = 80
    ca, same = r.integers(0, 2, n), np.arange(n) % 2
    cb = np.where(same == 1, ca, 1 - ca)
    a = np.stack([bar_image(c, r) for c in ca])[:, None]
    b = np.stack([bar_image(c, r) for c in cb])[:, None]
    cfg = TrainConfig(epochs=15, batch_size=10, loss="contrastive", learning_rate=3e-3)
    return train_siamese("si_spec_cnn", (a, b, same.astype(float)), cfg)


def test_training_pulls_same_pairs_together(trained):
    r = np.random.default_rng(9)
    x0 = np.stack([bar_image(0, r) for _ in range(20)])
    x1 = np.stack([bar_image(1, r) for _ in range(20)])
    same_d = trained.distances(x0[:10], x0[10:]).mean()
    diff_d = trained.distances(x0[:10], x1[:10]).mean()
    assert same_d < diff_d
    d, similar = similarity(trained, np.concatenate([x0[:10], x0[:10]]), np.concatenate([x0[10:], x1[:10]]))
    assert np.mean(similar == np.r_[np.ones(10), np.zeros(10)].astype(bool)) >= 0.8
    assert verify_fewshot(trained, np.stack([x0[0], x1[0]]), [0, 1], x1[5:10]).tolist() == [1] * 5


def test_save_load_keeps_threshold(tmp_path, trained):
    trained.trunk.round_to_float32()  # weights are stored as float32
    save_siamese(trained, tmp_path / "s")
    back = load_siamese(tmp_path / "s")
    assert back.threshold == trained.threshold
    x = np.random.default_rng(4).random((3,) + SHAPE)
    assert np.array_equal(back.distances(x, x[::-1]), trained.distances(x, x[::-1]))
    (tmp_path / "s" / "siamese.json").unlink()
    with pytest.raises(ArtifactError):
        load_siamese(tmp_path / "s")
