import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cochleanet.classifiers import (
    MlpConfig,
    MlpModel,
    classify_euclidean,
    classify_normalized,
    evaluate,
    fit_normalized,
    fit_prototypes,
    loss_and_grads,
    mlp_predict,
    mlp_train,
    normalize_histogram,
)
from cochleanet.errors import DegenerateInput, DimensionMismatch, EmptyClass, EmptyHistogram


def separable_set(rng, n=40, dim=10):
    hists, labels = [], []
    for i in range(n):
        h = np.zeros(dim)
        if i % 2:
            h[rng.integers(0, dim // 2)] = rng.integers(1, 50)
            labels.append("a")
        else:
            h[rng.integers(dim // 2, dim)] = rng.integers(1, 50)
            labels.append("b")
        hists.append(h)
    return np.array(hists), labels


def central_difference(params, x, y, eps=1e-5):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            up = loss_and_grads(params, x, y)[0]
            p[idx] = orig - eps
            down = loss_and_grads(params, x, y)[0]
            p[idx] = orig
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def test_prototype_single_histogram_per_class():
    m = fit_prototypes([[1, 2], [3, 4]], ["x", "y"])
    assert m.prototypes.tolist() == [[1, 2], [3, 4]]


def test_prototype_mean_and_order():
    m = fit_prototypes([[2, 0], [9, 9], [0, 2]], ["a", "b", "a"])
    assert m.prototypes[0].tolist() == [1, 1]
    m2 = fit_prototypes([[0, 2], [9, 9], [2, 0]], ["a", "b", "a"])
    assert np.array_equal(m.prototypes, m2.prototypes)


def test_prototype_empty_class():
    with pytest.raises(EmptyClass):
        fit_normalized([[0, 0], [1, 1]], ["a", "b"])


def test_euclidean_examples():
    m = fit_prototypes([[0, 0], [4, 0]], ["b", "a"])
    assert classify_euclidean(m, [4, 0]) == "a"
    assert classify_euclidean(m, [2, 0]) == "a"  # equidistant -> smaller label
    with pytest.raises(DimensionMismatch):
        classify_euclidean(m, [1, 2, 3])


def test_euclidean_matches_brute_force():
    rng = np.random.default_rng(8)
    protos = rng.random((2, 12)) * 10
    m = fit_prototypes(protos, ["p", "q"])
    for _ in range(1000):
        h = rng.random(12) * 10
        d = [np.sqrt(sum((h[i] - protos[c][i]) ** 2 for i in range(12))) for c in range(2)]
        assert classify_euclidean(m, h) == ("p" if d[0] <= d[1] else "q")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_euclidean_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    protos = rng.random((3, 6))
    shift = rng.normal(size=6) * 5
    h = rng.random(6)
    a = fit_prototypes(protos, ["a", "b", "c"])
    b = fit_prototypes(protos + shift, ["a", "b", "c"])
    assert classify_euclidean(a, h) == classify_euclidean(b, h + shift)


def test_normalized_examples():
    m = fit_normalized([[3, 1], [1, 3]], ["a", "b"])
    assert np.allclose(m.prototypes[0], [0.75, 0.25])
    assert classify_normalized(m, [3, 1]) == "a"
    assert normalize_histogram([3, 1]).sum() == 1.0
    with pytest.raises(EmptyHistogram):
        classify_normalized(m, [0, 0])


def test_normalized_skips_empty_training_histograms():
    m = fit_normalized([[3, 1], [0, 0], [1, 3]], ["a", "a", "b"])
    assert np.allclose(m.prototypes[0], [0.75, 0.25])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 1000))
def test_normalized_scale_invariance(seed, alpha):
    rng = np.random.default_rng(seed)
    train = rng.integers(0, 20, size=(10, 8)) + 1
    m = fit_normalized(train, ["a", "b"] * 5)
    h = rng.integers(1, 30, size=8).astype(float)
    assert classify_normalized(m, h) == classify_normalized(m, alpha * h)
    assert classify_normalized(m, h) == classify_normalized(m, 2 * h)


def test_gradient_check():
    rng = np.random.default_rng(0)
    x = rng.random((7, 6))
    y = rng.integers(0, 3, size=7)
    params = [rng.normal(size=(6, 5)), rng.normal(size=5), rng.normal(size=(5, 3)),
              rng.normal(size=3)]
    _, analytic = loss_and_grads(params, x, y)
    numeric = central_difference(params, x, y)
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)
        assert rel.max() <= 1e-4


def test_mlp_separable_toy():
    x, y = separable_set(np.random.default_rng(1))
    m = mlp_train(x, y, MlpConfig(epochs=200, seed=0))
    assert all(mlp_predict(m, h) == lab for h, lab in zip(x, y))
    assert np.all(np.diff(m.loss_history) <= 0)


def test_mlp_deterministic():
    x, y = separable_set(np.random.default_rng(2))
    a = mlp_train(x, y, MlpConfig(epochs=20, seed=4))
    b = mlp_train(x, y, MlpConfig(epochs=20, seed=4))
    for p, q in zip(a.params, b.params):
        assert p.tobytes() == q.tobytes()


def test_mlp_single_class_rejected():
    with pytest.raises(DegenerateInput):
        mlp_train([[1, 2], [3, 4]], ["a", "a"])


def test_mlp_zero_network_picks_first_label():
    m = MlpModel(["no", "yes"], np.zeros((4, 3)), np.zeros(3), np.zeros((3, 2)), np.zeros(2))
    assert mlp_predict(m, [1, 2, 3, 4]) == "no"


def test_mlp_scale_invariant_prediction():
    x, y = separable_set(np.random.default_rng(3))
    m = mlp_train(x, y, MlpConfig(epochs=10))
    rng = np.random.default_rng(4)
    for _ in range(50):
        h = rng.integers(0, 9, size=10) + 1
        assert mlp_predict(m, h) == mlp_predict(m, 7 * h)


def test_mlp_hand_computed_forward():
    m = MlpModel(["a", "b"], np.array([[1.0, -1.0], [0.5, 2.0]]), np.array([0.0, -0.5]),
                 np.array([[1.0, 0.0], [-1.0, 2.0]]), np.array([0.1, 0.0]))
    # [3,1] -> x=[.75,.25], hidden=[.875, 0], scores=[.975, 0]
    assert mlp_predict(m, [3, 1]) == "a"
    # [1,3] -> x=[.25,.75], hidden=[.625, .75], scores=[-.025, 1.5]
    assert mlp_predict(m, [1, 3]) == "b"


def test_evaluate_echo_and_constant():
    items = [([i], lab) for i, lab in enumerate(["a", "b"] * 10)]
    truth = dict((i, lab) for i, lab in enumerate(["a", "b"] * 10))
    echo = evaluate(lambda h: truth[h[0]], items)
    assert echo.accuracy == 1.0
    const = evaluate(lambda h: "a", items)
    assert const.accuracy == 0.5
    assert const.confusion_matrix.sum(axis=1).tolist() == [10, 10]


def test_evaluate_counts_skips():
    m = fit_normalized([[1, 0], [0, 1]], ["a", "b"])
    res = evaluate(m, [([1, 0], "a"), ([0, 0], "a"), ([0, 5], "b")])
    assert res.skipped_count == 1 and res.total == 2 and res.accuracy == 1.0
    assert res.confusion_matrix.sum(axis=1).tolist() == [1, 1]
