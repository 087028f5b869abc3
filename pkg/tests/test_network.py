import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from safequant.network import (Batch, Conv2D, Dense, Flatten, InputError,
                               MaxPool, Network, ReLU, ShapeError, Sigmoid,
                               Softmax, forward, forward_single)

from conftest import (SEED0_OUT_03_07, SEED0_OUT_1_0, make_mlp, make_seed0_net)


class TestForward:
    def test_identity_softmax_equal_logits(self, identity_softmax_net):
        out = forward_single(identity_softmax_net, np.array([0.0, 0.0]))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_relu_definition(self):
        net = Network([ReLU()], input_shape=2)
        np.testing.assert_array_equal(net.forward_single([-1.0, 2.0]), [0.0, 2.0])

    def test_seed0_fixture_hand_oracle(self, seed0_net):
        np.testing.assert_allclose(seed0_net.forward_single([0.3, 0.7]),
                                   SEED0_OUT_03_07, atol=1e-12)
        np.testing.assert_allclose(seed0_net.forward_single([1.0, 0.0]),
                                   SEED0_OUT_1_0, atol=1e-12)

    def test_forward_single_equals_forward_batch(self, seed0_net):
        x = np.array([0.1, 0.9])
        single = seed0_net.forward_single(x)
        batched = forward(seed0_net, x[None, :])[0]
        assert np.array_equal(single, batched)

    def test_output_order_matches_input_order(self, seed0_net):
        pts = np.array([[0.3, 0.7], [1.0, 0.0]])
        out = seed0_net.forward(pts)
        np.testing.assert_allclose(out[0], SEED0_OUT_03_07, atol=1e-12)
        np.testing.assert_allclose(out[1], SEED0_OUT_1_0, atol=1e-12)

    def test_dimension_mismatch_names_layer(self, seed0_net):
        with pytest.raises(InputError):
            seed0_net.forward(np.zeros((1, 3)))

    def test_nonfinite_input_rejected(self, seed0_net):
        with pytest.raises(InputError):
            seed0_net.forward(np.array([[np.nan, 0.0]]))

    def test_query_accounting(self, seed0_net):
        meter = seed0_net.meter
        assert (meter.queries, meter.batches) == (0, 0)
        seed0_net.forward(np.zeros((5, 2)))
        assert (meter.queries, meter.batches) == (5, 1)
        seed0_net.forward_single(np.zeros(2))
        assert (meter.queries, meter.batches) == (6, 2)


class TestBatchType:
    def test_count(self):
        assert Batch(np.zeros((3, 2))).count == 3

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            Batch(np.zeros((0, 2)))

    def test_forward_accepts_batch_object(self, seed0_net):
        out = seed0_net.forward(Batch(np.array([[0.3, 0.7]])))
        np.testing.assert_allclose(out[0], SEED0_OUT_03_07, atol=1e-12)


class TestShapeValidation:
    def test_incompatible_dense_chain(self):
        with pytest.raises(ShapeError, match="layer 1"):
            Network([Dense(np.zeros((3, 2)), np.zeros(3)),
                     Dense(np.zeros((2, 4)), np.zeros(2))], input_shape=2)

    def test_dense_weight_bias_mismatch(self):
        with pytest.raises(ShapeError):
            Dense(np.zeros((3, 2)), np.zeros(2))


@given(x=arrays(np.float64, (7, 2),
                elements=st.floats(-5, 5, allow_nan=False)))
@settings(max_examples=200, deadline=None)
def test_batch_consistency(x):
    net = make_seed0_net()
    batched = net.forward(x)
    for i in range(x.shape[0]):
        assert np.array_equal(batched[i], net.forward_single(x[i]))


@given(x=arrays(np.float64, (4, 2),
                elements=st.floats(-20, 20, allow_nan=False)))
@settings(max_examples=200, deadline=None)
def test_softmax_normalization(x):
    net = make_mlp([8], "tanh", seed=42)
    out = net.forward(x)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)


def _conv_reference(x, filt, bias, stride, padding):
    """Naive quadruple-loop convolution, test-only oracle."""
    k, h, w, c_in = x.shape
    kh, kw, _, c_out = filt.shape
    if padding == "same":
        oh = -(-h // stride)
        ow = -(-w // stride)
        ph = max((oh - 1) * stride + kh - h, 0)
        pw = max((ow - 1) * stride + kw - w, 0)
        x = np.pad(x, ((0, 0), (ph // 2, ph - ph // 2),
                       (pw // 2, pw - pw // 2), (0, 0)))
    else:
        oh = (h - kh) // stride + 1
        ow = (w - kw) // stride + 1
    out = np.zeros((k, oh, ow, c_out))
    for b in range(k):
        for i in range(oh):
            for j in range(ow):
                for d in range(c_out):
                    acc = 0.0
                    for u in range(kh):
                        for v in range(kw):
                            for c in range(c_in):
                                acc += x[b, i * stride + u, j * stride + v, c] \
                                    * filt[u, v, c, d]
                    out[b, i, j, d] = acc + bias[d]
    return out


@pytest.mark.parametrize("stride,padding", [(1, "valid"), (1, "same"),
                                            (2, "valid"), (2, "same")])
def test_conv_oracle_equivalence(stride, padding):
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(3, 6, 6, 1))
    filt = rng.normal(size=(3, 3, 1, 2))
    bias = rng.normal(size=2)
    layer = Conv2D(filters=filt, bias=bias, stride=stride, padding=padding)
    got = layer.apply(x)
    want = _conv_reference(x, filt, bias, stride, padding)
    assert got.shape == want.shape
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_maxpool_matches_naive():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(2, 6, 6, 3))
    layer = MaxPool(window=2, stride=2)
    got = layer.apply(x)
    for b in range(2):
        for i in range(3):
            for j in range(3):
                for c in range(3):
                    assert got[b, i, j, c] == x[b, 2*i:2*i+2, 2*j:2*j+2, c].max()


def test_conv_pipeline_end_to_end():
    rng = np.random.default_rng(9)
    net = Network([
        Conv2D(rng.normal(size=(3, 3, 1, 4)), rng.normal(size=4),
               stride=1, padding="same"),
        ReLU(),
        MaxPool(window=2, stride=2),
        Flatten(),
        Dense(rng.normal(size=(3, 36)), rng.normal(size=3)),
        Softmax(),
    ], input_shape=(6, 6, 1))
    out = net.forward(rng.uniform(size=(5, 36)))
    assert out.shape == (5, 3)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)


def test_sigmoid_extreme_inputs_stable():
    layer = Sigmoid()
    out = layer.apply(np.array([[-1000.0, 0.0, 1000.0]]))
    np.testing.assert_allclose(out, [[0.0, 0.5, 1.0]], atol=1e-12)


def test_forward_deterministic(seed0_net):
    x = np.array([[0.123456789, 0.987654321]])
    a = seed0_net.forward(x)
    b = seed0_net.forward(x)
    assert np.array_equal(a, b)
