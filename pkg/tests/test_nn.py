import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgh.errors import ConfigError, InputError
from fedgh.nn import (
    DenseLayer,
    FeatureExtractor,
    PredictionHeader,
    cross_entropy,
    finite_diff_grad,
    forward_extractor,
    forward_header,
    header_gradients,
    log_softmax,
    mean_cross_entropy,
    model_gradients,
    param_count,
    predict_logits,
    sgd_header_step,
    sgd_step,
)

from conftest import make_model


def _oracle_forward(layers, x):
    """Straight-line scalar re-implementation of a dense stack."""
    h = list(map(float, x))
    for layer in layers:
        out = []
        for i in range(layer.out_dim):
            z = layer.bias[i]
            for j in range(layer.in_dim):
                z += layer.weights[i, j] * h[j]
            out.append(max(z, 0.0) if layer.activation == "relu" else z)
        h = out
    return np.array(h)


# -- forward -----------------------------------------------------------------

def test_identity_extractor():
    ext = FeatureExtractor([DenseLayer(np.eye(2), np.zeros(2), "identity")])
    np.testing.assert_array_equal(forward_extractor(ext, [1.0, 2.0]), [1.0, 2.0])


def test_relu_extractor():
    ext = FeatureExtractor([DenseLayer(np.eye(2), np.zeros(2), "relu")])
    np.testing.assert_array_equal(forward_extractor(ext, [-1.0, 2.0]), [0.0, 2.0])


def test_extractor_matches_oracle():
    rng = np.random.default_rng(3)
    ext = FeatureExtractor.build(5, [7], 4, rng)
    ext.layers[0].bias[:] = rng.normal(size=7)
    x = rng.normal(size=5)
    np.testing.assert_allclose(forward_extractor(ext, x), _oracle_forward(ext.layers, x), rtol=1e-12)


def test_zero_header_gives_zero_logits():
    head = PredictionHeader([DenseLayer(np.zeros((3, 4)), np.zeros(3))])
    np.testing.assert_array_equal(forward_header(head, np.ones(4)), np.zeros(3))


def test_identity_header():
    head = PredictionHeader([DenseLayer(np.eye(3), np.zeros(3))])
    np.testing.assert_array_equal(forward_header(head, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_header_matches_oracle():
    rng = np.random.default_rng(11)
    head = PredictionHeader.build(6, 3, rng, hidden=[5])
    rep = rng.normal(size=6)
    np.testing.assert_allclose(forward_header(head, rep), _oracle_forward(head.layers, rep), rtol=1e-12)


def test_dimension_mismatch():
    ext = FeatureExtractor.build(3, [4], 2, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        forward_extractor(ext, np.ones(4))
    head = PredictionHeader.build(2, 3, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        forward_header(head, np.ones(5))


def test_layer_chain_is_checked():
    with pytest.raises(ConfigError):
        FeatureExtractor([DenseLayer(np.ones((3, 2)), np.zeros(3)),
                          DenseLayer(np.ones((2, 4)), np.zeros(2))])
    with pytest.raises(ConfigError):
        DenseLayer(np.ones((3, 2)), np.zeros(2))


def test_split_model_requires_matching_rep_dim():
    from fedgh.nn import SplitModel
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        SplitModel(FeatureExtractor.build(3, [], 4, rng), PredictionHeader.build(5, 2, rng))


def test_activation_layout():
    ext = FeatureExtractor.build(4, [8, 6], 3, np.random.default_rng(0))
    assert [l.activation for l in ext.layers] == ["relu", "relu", "identity"]
    head = PredictionHeader.build(3, 2, np.random.default_rng(0))
    assert [l.activation for l in head.layers] == ["identity"]


# -- loss --------------------------------------------------------------------

def test_uniform_logits_loss_is_log_classes():
    for label in range(10):
        assert cross_entropy(np.zeros(10), label) == pytest.approx(math.log(10), abs=1e-12)


def test_saturated_logits_do_not_overflow():
    loss = cross_entropy(np.array([1000.0, -1000.0]), 0)
    assert np.isfinite(loss) and loss == pytest.approx(0.0, abs=1e-12)
    assert cross_entropy(np.array([1000.0, -1000.0]), 1) == pytest.approx(2000.0)


def test_cross_entropy_matches_high_precision_value():
    # -log(e^3 / (e + e^2 + e^3)) evaluated with mpmath at 40 digits
    assert cross_entropy(np.array([1.0, 2.0, 3.0]), 2) == pytest.approx(
        0.407605964444380304482919904545070451473, rel=1e-14)


def test_label_out_of_range():
    with pytest.raises(InputError):
        cross_entropy(np.zeros(3), 3)
    with pytest.raises(InputError):
        cross_entropy(np.zeros(3), -1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-500, 500), min_size=2, max_size=12))
def test_softmax_normalises(logits):
    p = np.exp(log_softmax(np.array(logits)))
    assert abs(p.sum() - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.integers(0, 7))
def test_loss_non_negative(logits, label):
    label %= len(logits)
    assert cross_entropy(np.array(logits), label) >= 0.0


# -- gradients and SGD -------------------------------------------------------

def _loss_closure(model, x, y):
    return lambda: mean_cross_entropy(predict_logits(model, x), y)


@pytest.mark.parametrize("seed", range(3))
def test_backprop_matches_finite_differences(seed):
    model = make_model(seed, hidden=(7, 5), header_hidden=(3,))
    rng = np.random.default_rng(100 + seed)
    x, y = rng.normal(size=(6, 6)), rng.integers(0, 4, size=6)
    _, grads = model_gradients(model, x, y)
    fd = finite_diff_grad(_loss_closure(model, x, y), model.parameters(), 1e-6)
    for g, f in zip(grads, fd):
        assert np.all(np.abs(g - f) / np.maximum(1.0, np.abs(f)) < 1e-4)


def test_zero_lr_leaves_parameters_bit_identical():
    model = make_model(0)
    before = [p.copy() for p in model.parameters()]
    rng = np.random.default_rng(1)
    sgd_step(model, rng.normal(size=(3, 6)), [0, 1, 2], 0.0)
    for b, p in zip(before, model.parameters()):
        assert np.array_equal(b, p)


def test_single_sample_step_equals_lr_times_gradient():
    model = make_model(4)
    x, y = np.random.default_rng(5).normal(size=(1, 6)), [2]
    fd = finite_diff_grad(_loss_closure(model, x, y), model.parameters(), 1e-6)
    before = [p.copy() for p in model.parameters()]
    sgd_step(model, x, y, 0.1)
    for b, p, g in zip(before, model.parameters(), fd):
        np.testing.assert_allclose(b - p, 0.1 * g, atol=1e-8)


def test_duplicate_samples_match_single_sample():
    a, b = make_model(9), make_model(9)
    x = np.random.default_rng(2).normal(size=(1, 6))
    la = sgd_step(a, x, [1], 0.05)
    lb = sgd_step(b, np.vstack([x, x]), [1, 1], 0.05)
    assert la == pytest.approx(lb, abs=1e-15)
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_allclose(pa, pb, atol=1e-15)


def test_sgd_step_returns_pre_update_loss():
    model = make_model(2)
    x, y = np.random.default_rng(3).normal(size=(4, 6)), [0, 1, 2, 3]
    expected = mean_cross_entropy(predict_logits(model, x), y)
    assert sgd_step(model, x, y, 0.5) == expected


def test_empty_batch_rejected():
    with pytest.raises(InputError):
        sgd_step(make_model(0), np.zeros((0, 6)), [], 0.1)


def test_sgd_deterministic():
    a, b = make_model(1), make_model(1)
    rng_a, rng_b = np.random.default_rng(8), np.random.default_rng(8)
    for _ in range(20):
        xa, xb = rng_a.normal(size=(5, 6)), rng_b.normal(size=(5, 6))
        sgd_step(a, xa, [0, 1, 2, 3, 0], 0.1)
        sgd_step(b, xb, [0, 1, 2, 3, 0], 0.1)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)


def test_header_step_zero_lr():
    head = PredictionHeader.build(4, 3, np.random.default_rng(0))
    before = [p.copy() for p in head.parameters()]
    sgd_header_step(head, np.ones(4), 1, 0.0)
    assert all(np.array_equal(b, p) for b, p in zip(before, head.parameters()))


def test_header_step_decreases_loss_from_zero_init():
    head = PredictionHeader([DenseLayer(np.zeros((3, 4)), np.zeros(3))])
    rep = np.array([0.5, -1.0, 2.0, 0.3])
    before = cross_entropy(forward_header(head, rep), 2)
    returned = sgd_header_step(head, rep, 2, 0.01)
    after = cross_entropy(forward_header(head, rep), 2)
    assert returned == before and after < before


def test_header_gradient_matches_finite_differences():
    head = PredictionHeader.build(5, 4, np.random.default_rng(6), hidden=[6])
    rep = np.random.default_rng(7).normal(size=5)
    _, grads = header_gradients(head, rep, 3)
    fd = finite_diff_grad(lambda: cross_entropy(forward_header(head, rep), 3), head.parameters())
    for g, f in zip(grads, fd):
        assert np.all(np.abs(g - f) / np.maximum(1.0, np.abs(f)) < 1e-4)


def test_header_step_label_out_of_range():
    head = PredictionHeader.build(4, 3, np.random.default_rng(0))
    with pytest.raises(InputError):
        sgd_header_step(head, np.ones(4), 3, 0.1)


# -- param_count / finite differences ---------------------------------------

def test_param_count():
    rng = np.random.default_rng(0)
    assert param_count(PredictionHeader.build(500, 10, rng)) == 5010
    assert param_count(FeatureExtractor([])) == 0
    # 8 -> 16 -> 4: (16*8 + 16) + (4*16 + 4)
    assert param_count(FeatureExtractor.build(8, [16], 4, rng)) == 212


def test_finite_diff_quadratic():
    p = np.array([3.0])
    (g,) = finite_diff_grad(lambda: 0.5 * p[0] ** 2, [p], 1e-6)
    assert g[0] == pytest.approx(3.0, abs=1e-8)
    assert p[0] == 3.0


def test_finite_diff_constant():
    p = np.arange(4.0)
    (g,) = finite_diff_grad(lambda: 1.5, [p], 1e-6)
    assert np.array_equal(g, np.zeros(4))


def test_finite_diff_rejects_bad_eps():
    with pytest.raises(InputError):
        finite_diff_grad(lambda: 0.0, [np.zeros(1)], 0.0)
