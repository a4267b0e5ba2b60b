import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ganprng import nncore as nn
from ganprng.errors import RejectedInputError, StateError

from gradcheck import REL_TOL, check_layer, near_kink, numeric_grad, rel_error

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def dense_with(weight, bias):
    layer = nn.Dense(len(weight[0]), len(weight))
    layer.params["weight"][...] = weight
    layer.params["bias"][...] = bias
    return layer


# ---------------------------------------------------------------- dense


def test_dense_identity():
    layer = dense_with([[1, 0], [0, 1]], [0, 0])
    np.testing.assert_array_equal(layer.forward([3, 4]), [3, 4])


def test_dense_hand_sum():
    layer = dense_with([[1, 1]], [-1])
    np.testing.assert_array_equal(layer.forward([2, 3]), [4])


def test_dense_matches_naive_matmul():
    rng = np.random.default_rng(0)
    layer = nn.Dense(3, 2, rng)
    layer.params["bias"][...] = rng.normal(size=2)
    x = rng.normal(size=3)
    W, b = layer.weight, layer.bias
    expected = [sum(W[i][j] * x[j] for j in range(3)) + b[i] for i in range(2)]
    np.testing.assert_allclose(layer.forward(x), expected, rtol=0, atol=1e-12)


def test_dense_rejects_wrong_width():
    with pytest.raises(RejectedInputError):
        nn.Dense(3, 2).forward(np.ones(4))


def test_dense_scalar_backward():
    layer = dense_with([[2.0]], [0.0])
    layer.forward([3.0])
    dx = layer.backward([1.0])
    np.testing.assert_array_equal(dx, [2.0])
    np.testing.assert_array_equal(layer.grads["weight"], [[3.0]])


def test_dense_zero_grad_out_gives_zero_gradients():
    rng = np.random.default_rng(1)
    layer = nn.Dense(4, 3, rng)
    layer.forward(rng.normal(size=(5, 4)))
    dx = layer.backward(np.zeros((5, 3)))
    assert not dx.any()
    assert not layer.grads["weight"].any() and not layer.grads["bias"].any()


def test_dense_backward_before_forward():
    with pytest.raises(StateError):
        nn.Dense(2, 2).backward(np.ones(2))


def test_dense_finite_differences():
    rng = np.random.default_rng(2)
    layer = nn.Dense(3, 2, rng)
    layer.params["bias"][...] = rng.normal(size=2)
    assert check_layer(layer, rng.normal(size=(4, 3)), rng) < REL_TOL


# ---------------------------------------------------------------- conv / pool


def conv_with(filters, bias=None, stride=1):
    filters = np.asarray(filters, dtype=float)
    f, c, k = filters.shape
    layer = nn.Conv1D(c, f, k, stride)
    layer.params["filters"][...] = filters
    if bias is not None:
        layer.params["bias"][...] = bias
    return layer


def naive_conv(x, filters, bias, stride):
    F, C, K = filters.shape
    B, _, L = x.shape
    n_out = (L - K) // stride + 1
    out = np.zeros((B, F, n_out))
    for b in range(B):
        for f in range(F):
            for i in range(n_out):
                acc = bias[f]
                for c in range(C):
                    for k in range(K):
                        acc += filters[f, c, k] * x[b, c, i * stride + k]
                out[b, f, i] = acc
    return out


def test_conv_difference_filter():
    layer = conv_with([[[1, -1]]])
    np.testing.assert_array_equal(layer.forward([1, 2, 3]), [-1, -1])


def test_conv_shift_kernel_drops_last():
    x = np.array([5.0, -2.0, 7.5, 1.0])
    np.testing.assert_array_equal(conv_with([[[1, 0]]]).forward(x), x[:-1])


@pytest.mark.parametrize("stride", [1, 2, 3])
def test_conv_matches_naive_loops(stride):
    rng = np.random.default_rng(stride)
    layer = nn.Conv1D(3, 4, 2, stride, rng)
    layer.params["bias"][...] = rng.normal(size=4)
    x = rng.normal(size=(2, 3, 9))
    expected = naive_conv(x, layer.params["filters"], layer.params["bias"], stride)
    np.testing.assert_allclose(layer.forward(x), expected, rtol=0, atol=1e-12)


def test_conv_output_length_rule():
    layer = nn.Conv1D(1, 1, 3, 2)
    assert layer.output_length(8) == (8 - 3) // 2 + 1
    with pytest.raises(RejectedInputError):
        layer.forward(np.ones(2))


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_finite_differences(stride):
    rng = np.random.default_rng(10 + stride)
    layer = nn.Conv1D(2, 3, 2, stride, rng)
    layer.params["bias"][...] = rng.normal(size=3)
    assert check_layer(layer, rng.normal(size=(3, 2, 7)), rng) < REL_TOL


def test_conv_zero_grad_out():
    rng = np.random.default_rng(3)
    layer = nn.Conv1D(1, 4, 2, 1, rng)
    layer.forward(rng.normal(size=(2, 1, 8)))
    assert not layer.backward(np.zeros((2, 4, 7))).any()
    assert not layer.grads["filters"].any()


def test_conv_unit_kernel_passes_gradient():
    layer = conv_with([[[1.0]]])
    layer.forward([1.0, 2.0, 3.0])
    g = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(layer.backward(g), g)


def test_conv_backward_before_forward():
    with pytest.raises(StateError):
        nn.Conv1D(1, 1, 2).backward(np.ones(3))


def test_maxpool_window_maxima():
    np.testing.assert_array_equal(nn.maxpool1d_forward([1, 3, 2, 0], 2, 2), [3, 2])


def test_maxpool_identity_and_partial_window():
    np.testing.assert_array_equal(nn.maxpool1d_forward([5.0], 1, 1), [5.0])
    np.testing.assert_array_equal(nn.maxpool1d_forward([1, 4, 2], 2, 2), [4])


def test_maxpool_rejects_oversized_pool():
    with pytest.raises(RejectedInputError):
        nn.maxpool1d_forward([1.0], 2, 2)


def test_maxpool_routes_gradient_to_argmax():
    pool = nn.MaxPool1D(2, 2)
    pool.forward(np.array([[[1.0, 3.0, 2.0, 0.0]]]))
    dx = pool.backward(np.array([[[10.0, 20.0]]]))
    np.testing.assert_array_equal(dx, [[[0.0, 10.0, 20.0, 0.0]]])


def test_maxpool_finite_differences():
    rng = np.random.default_rng(4)
    x = rng.permutation(24).reshape(2, 3, 4).astype(float) * 0.1  # no ties
    assert check_layer(nn.MaxPool1D(2, 2), x, rng) < REL_TOL


# ---------------------------------------------------------------- activations


def test_leaky_relu_values():
    assert nn.leaky_relu(2.0, 0.2) == 2.0
    assert nn.leaky_relu(-1.0, 0.2) == pytest.approx(-0.2)
    assert nn.leaky_relu(0.0, 0.2) == 0.0


def test_leaky_relu_slope_bounds():
    with pytest.raises(RejectedInputError):
        nn.leaky_relu(1.0, 1.5)


def test_leaky_relu_backward_scales():
    act = nn.LeakyReLU(0.2)
    act.forward(np.array([2.0, -3.0]))
    np.testing.assert_allclose(act.backward(np.array([1.0, 1.0])), [1.0, 0.2])


@pytest.mark.parametrize(
    "x, expected", [(70000.0, 4464.0), (-1.0, 65535.0), (65535.5, 65535.5), (65536.0, 0.0)]
)
def test_mod_activation_values(x, expected):
    assert nn.mod_activation(x, 65536) == expected


@given(arrays(np.float64, st.integers(1, 20), elements=finite),
       st.floats(1e-3, 1e5, allow_nan=False))
def test_mod_activation_range(x, modulus):
    y = nn.mod_activation(x, modulus)
    assert np.all(y >= 0) and np.all(y < modulus)


def test_mod_activation_negative_tiny_folds_to_zero():
    assert nn.mod_activation(-1e-30, 65536.0) == 0.0


def test_mod_backward_is_straight_through():
    m = nn.Mod(10.0)
    m.forward(np.array([3.0, 17.0]))
    np.testing.assert_array_equal(m.backward(np.array([0.5, -2.0])), [0.5, -2.0])


def test_sigmoid_values():
    assert nn.sigmoid(0.0) == 0.5
    assert nn.sigmoid(10.0) == pytest.approx(1 / (1 + np.exp(-10.0)), abs=1e-15)
    assert nn.sigmoid(10.0) == pytest.approx(0.9999546, abs=1e-7)
    assert nn.sigmoid(800.0) == 1.0 and nn.sigmoid(-800.0) == 0.0


def test_sigmoid_gradient():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(3, 4)) * 3
    assert check_layer(nn.Sigmoid(), x, rng) < 1e-6


def test_activation_finite_differences_away_from_kinks():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(4, 5))
    x[np.abs(x) < 1e-3] += 0.01
    assert check_layer(nn.LeakyReLU(0.2), x, rng) < REL_TOL
    x = rng.uniform(0.1, 9.9, size=(4, 5)) + 10 * rng.integers(-3, 3, size=(4, 5))
    assert check_layer(nn.Mod(10.0), x, rng) < REL_TOL


# ---------------------------------------------------------------- losses


def test_least_squares_examples():
    assert nn.least_squares_loss([0.8], [1.0]) == pytest.approx(0.04)
    assert nn.least_squares_loss([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert nn.least_squares_loss([0.0, 1.0], [1.0, 1.0]) == 0.5


def test_absolute_difference_examples():
    assert nn.absolute_difference_loss([0.3], [0.5]) == pytest.approx(0.2)
    assert nn.absolute_difference_loss([0.4], [0.4]) == 0.0
    assert nn.absolute_difference_loss([0.0, 1.0], [1.0, 1.0]) == 0.5
    np.testing.assert_array_equal(nn.absolute_difference_grad([0.4], [0.4]), [0.0])


@pytest.mark.parametrize("loss", [nn.least_squares_loss, nn.absolute_difference_loss])
def test_loss_shape_mismatch(loss):
    with pytest.raises(RejectedInputError):
        loss([1.0, 2.0], [1.0])


grid = st.integers(-1000, 1000).map(lambda k: k / 8)  # exact binary fractions, no underflow


@given(arrays(np.float64, 5, elements=grid), arrays(np.float64, 5, elements=grid))
def test_losses_nonnegative_zero_iff_equal(pred, target):
    for loss in (nn.least_squares_loss, nn.absolute_difference_loss):
        value = loss(pred, target)
        assert value >= 0
        assert (value == 0) == bool(np.all(pred == target))


@pytest.mark.parametrize(
    "loss, grad",
    [(nn.least_squares_loss, nn.least_squares_grad),
     (nn.absolute_difference_loss, nn.absolute_difference_grad)],
)
def test_loss_gradients(loss, grad):
    rng = np.random.default_rng(7)
    pred = rng.normal(size=6)
    target = pred + rng.choice([-1, 1], size=6) * rng.uniform(0.1, 1, size=6)
    assert rel_error(grad(pred, target), numeric_grad(lambda: loss(pred, target), pred)) < REL_TOL


# ---------------------------------------------------------------- adam


def test_adam_first_step_is_lr_sized():
    theta = np.array([0.0])
    state = nn.AdamState.like(theta)
    nn.adam_step(theta, np.array([0.5]), state, lr=0.02)
    # m_hat = 0.5, v_hat = 0.25, so the step is lr * 0.5 / (0.5 + eps)
    assert theta[0] == pytest.approx(-0.02 * 0.5 / (0.5 + 1e-8), abs=1e-15)
    assert state.step_count == 1


def test_adam_zero_gradient_leaves_parameter():
    theta = np.array([1.5, -2.0])
    state = nn.AdamState.like(theta)
    for _ in range(5):
        nn.adam_step(theta, np.zeros(2), state, lr=0.02)
    np.testing.assert_array_equal(theta, [1.5, -2.0])
    assert state.step_count == 5


def test_adam_two_steps_hand_unrolled():
    g, lr, b1, b2, eps = 0.3, 0.02, 0.9, 0.999, 1e-8
    theta = np.array([1.0])
    state = nn.AdamState.like(theta)
    nn.adam_step(theta, np.array([g]), state, lr)
    nn.adam_step(theta, np.array([g]), state, lr)

    expected = 1.0
    m = v = 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        expected -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    assert abs(theta[0] - expected) < 1e-12


def test_adam_optimizer_counts_steps():
    net = nn.Sequential([nn.Dense(2, 3, np.random.default_rng(0))])
    opt = nn.Adam(net, lr=0.01)
    for _ in range(4):
        opt.step()
    assert opt.step_count == 4
    assert all(s.step_count == 4 for s in opt.states.values())


def test_adam_shape_mismatch():
    with pytest.raises(RejectedInputError):
        nn.adam_step(np.zeros(2), np.zeros(3), nn.AdamState.like(np.zeros(2)), 0.1)


# ---------------------------------------------------------------- purity


def test_forward_is_pure():
    rng = np.random.default_rng(8)
    net = nn.Sequential([nn.Dense(3, 4, rng), nn.LeakyReLU(), nn.Dense(4, 2, rng)])
    x = rng.normal(size=(5, 3))
    a = net.forward(x).copy()
    b = net.forward(x)
    assert a.tobytes() == b.tobytes()


def test_flat_parameter_round_trip():
    rng = np.random.default_rng(9)
    net = nn.Sequential([nn.Dense(3, 4, rng), nn.Conv1D(1, 2, 2, 1, rng)])
    flat = net.flat_parameters()
    other = nn.Sequential([nn.Dense(3, 4), nn.Conv1D(1, 2, 2, 1)])
    other.load_flat_parameters(flat)
    np.testing.assert_array_equal(other.flat_parameters(), flat)
    with pytest.raises(RejectedInputError):
        other.load_flat_parameters(flat[:-1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dense_conv_gradients_random_configs(seed):
    rng = np.random.default_rng(seed)
    dense = nn.Dense(int(rng.integers(1, 5)), int(rng.integers(1, 5)), rng)
    assert check_layer(dense, rng.normal(size=(2, dense.in_dim)), rng) < REL_TOL
    conv = nn.Conv1D(int(rng.integers(1, 3)), int(rng.integers(1, 4)),
                     int(rng.integers(1, 3)), int(rng.integers(1, 3)), rng)
    x = rng.normal(size=(2, conv.in_channels, int(rng.integers(conv.kernel, 8))))
    assert not near_kink(x, 0) and check_layer(conv, x, rng) < REL_TOL
