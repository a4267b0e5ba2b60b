"""
Minimal neural network engine with hand-written gradients.

Everything is plain ``numpy.float64`` arrays. Layers keep their parameters in
``layer.params`` and accumulate gradients into ``layer.grads`` (same keys, same
shapes). ``forward`` caches whatever ``backward`` needs; calling ``backward``
without a preceding ``forward`` raises :class:`StateError`.

Batch conventions:

- dense layers take ``(batch, in)`` or a single ``(in,)`` vector
- conv / pooling layers take ``(batch, channels, length)``, ``(channels, length)``
  or a single-channel ``(length,)`` vector

Outputs keep the rank of the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import RejectedInputError, StateError

DEFAULT_LEAKY_SLOPE = 0.2


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a float64 array (no copy if it already is one)."""
    return np.asarray(x, dtype=np.float64)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _as_ncl(x: np.ndarray, channels: int) -> tuple[np.ndarray, int]:
    """Promote to (batch, channels, length); also return the original rank."""
    rank = x.ndim
    if rank == 1:
        x = x[None, None, :]
    elif rank == 2:
        x = x[None, :, :]
    elif rank != 3:
        raise RejectedInputError(f"expected rank 1-3 input, got shape {x.shape}")
    if x.shape[1] != channels:
        raise RejectedInputError(f"expected {channels} input channel(s), got {x.shape[1]}")
    return x, rank


def _restore_rank(y: np.ndarray, rank: int) -> np.ndarray:
    if rank == 1:
        return y[0, 0] if y.shape[1] == 1 else y[0]
    if rank == 2:
        return y[0]
    return y


# ----------------------------------------------------------------------------
# Layers
# ----------------------------------------------------------------------------


class Layer:
    """Base class. Parameter-free layers leave ``params`` empty."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    __call__ = forward


class Dense(Layer):
    """Fully connected layer ``y = gain * (x @ W.T) + b`` with ``W`` of shape (out, in).

    ``gain`` is a fixed multiplier on the weights only.  It lets a layer produce
    outputs on a large scale while its stored weights (and Adam's step sizes)
    stay O(1).
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None,
                 gain: float = 1.0):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise RejectedInputError("layer dimensions must be positive")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.gain = float(gain)
        if rng is None:
            weight = np.zeros((out_dim, in_dim))
        else:
            weight = glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim)
        self.params = {"weight": weight, "bias": np.zeros(out_dim)}
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._x = None

    @property
    def weight(self) -> np.ndarray:
        return self.params["weight"]

    @property
    def bias(self) -> np.ndarray:
        return self.params["bias"]

    def forward(self, x):
        x = as_tensor(x)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise RejectedInputError(
                f"dense layer expects width {self.in_dim}, got shape {x.shape}"
            )
        self._x = x
        self._single = single
        # einsum's plain loop keeps each row's result independent of batch
        # size, which BLAS kernels do not guarantee
        y = np.einsum("bi,oi->bo", x, self.params["weight"], optimize=False)
        if self.gain != 1.0:
            y *= self.gain
        y += self.params["bias"]
        return y[0] if single else y

    def backward(self, grad_out):
        if self._x is None:
            raise StateError("backward called before forward")
        g = as_tensor(grad_out)
        if self._single:
            g = g[None, :]
        if g.shape != (self._x.shape[0], self.out_dim):
            raise RejectedInputError(f"gradient shape {g.shape} does not match output")
        self.grads["weight"] += self.gain * (g.T @ self._x)
        self.grads["bias"] += g.sum(axis=0)
        dx = g @ self.params["weight"]
        if self.gain != 1.0:
            dx *= self.gain
        return dx[0] if self._single else dx


class Conv1D(Layer):
    """Valid (unpadded) 1-D cross-correlation.

    ``out[b, f, i] = sum_c sum_k filters[f, c, k] * x[b, c, i*stride + k] + bias[f]``
    """

    def __init__(
        self,
        in_channels: int,
        num_filters: int,
        kernel: int,
        stride: int = 1,
        rng: np.random.Generator | None = None,
    ):
        super().__init__()
        if min(in_channels, num_filters, kernel, stride) < 1:
            raise RejectedInputError("conv dimensions and stride must be positive")
        self.in_channels = in_channels
        self.num_filters = num_filters
        self.kernel = kernel
        self.stride = stride
        shape = (num_filters, in_channels, kernel)
        if rng is None:
            filters = np.zeros(shape)
        else:
            filters = glorot_uniform(
                rng, shape, in_channels * kernel, num_filters * kernel
            )
        self.params = {"filters": filters, "bias": np.zeros(num_filters)}
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._patches = None

    def output_length(self, length: int) -> int:
        if length < self.kernel:
            raise RejectedInputError(
                f"input length {length} shorter than kernel {self.kernel}"
            )
        return (length - self.kernel) // self.stride + 1

    def forward(self, x):
        x, rank = _as_ncl(as_tensor(x), self.in_channels)
        n_out = self.output_length(x.shape[2])
        # (batch, channels, n_out, kernel)
        patches = sliding_window_view(x, self.kernel, axis=2)[:, :, :: self.stride][:, :, :n_out]
        self._patches = patches
        self._in_shape = x.shape
        self._rank = rank
        y = np.einsum("bclk,fck->bfl", patches, self.params["filters"])
        y += self.params["bias"][None, :, None]
        return _restore_rank(y, rank)

    def backward(self, grad_out):
        if self._patches is None:
            raise StateError("backward called before forward")
        g = as_tensor(grad_out)
        batch, _, length = self._in_shape
        n_out = self._patches.shape[2]
        g = g.reshape(batch, self.num_filters, n_out)
        self.grads["filters"] += np.einsum("bfl,bclk->fck", g, self._patches)
        self.grads["bias"] += g.sum(axis=(0, 2))
        dx = np.zeros(self._in_shape)
        span = self.stride * (n_out - 1) + 1
        for k in range(self.kernel):
            dx[:, :, k : k + span : self.stride] += np.einsum(
                "bfl,fc->bcl", g, self.params["filters"][:, :, k]
            )
        return _restore_rank(dx, self._rank)


class MaxPool1D(Layer):
    """Per-channel max pooling; a trailing partial window is dropped."""

    def __init__(self, pool: int = 2, stride: int = 2):
        super().__init__()
        if pool < 1 or stride < 1:
            raise RejectedInputError("pool and stride must be positive")
        self.pool = pool
        self.stride = stride
        self._argmax = None

    def output_length(self, length: int) -> int:
        if length < self.pool:
            raise RejectedInputError(f"pool {self.pool} larger than input length {length}")
        return (length - self.pool) // self.stride + 1

    def forward(self, x):
        x = as_tensor(x)
        x, rank = _as_ncl(x, x.shape[-2] if x.ndim >= 2 else 1)
        n_out = self.output_length(x.shape[2])
        windows = sliding_window_view(x, self.pool, axis=2)[:, :, :: self.stride][:, :, :n_out]
        arg = windows.argmax(axis=3)
        self._argmax = arg + (np.arange(n_out) * self.stride)[None, None, :]
        self._in_shape = x.shape
        self._rank = rank
        y = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
        return _restore_rank(y, rank)

    def backward(self, grad_out):
        if self._argmax is None:
            raise StateError("backward called before forward")
        g = as_tensor(grad_out).reshape(self._argmax.shape)
        dx = np.zeros(self._in_shape)
        b, c, _ = np.indices(self._argmax.shape)
        np.add.at(dx, (b, c, self._argmax), g)
        return _restore_rank(dx, self._rank)


class Flatten(Layer):
    def forward(self, x):
        x = as_tensor(x)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return as_tensor(grad_out).reshape(self._shape)


class Reshape(Layer):
    """Reshape the trailing (per-sample) dimensions, keeping the batch axis."""

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        x = as_tensor(x)
        self._shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad_out):
        return as_tensor(grad_out).reshape(self._shape)


class Scale(Layer):
    """Multiply by a fixed constant (used for 16-bit input normalisation)."""

    def __init__(self, factor: float):
        super().__init__()
        self.factor = float(factor)

    def forward(self, x):
        return as_tensor(x) * self.factor

    def backward(self, grad_out):
        return as_tensor(grad_out) * self.factor


# ----------------------------------------------------------------------------
# Activations
# ----------------------------------------------------------------------------


def leaky_relu(x, slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    """Elementwise ``max(x, slope * x)`` for ``0 < slope < 1``."""
    if not 0.0 < slope < 1.0:
        raise RejectedInputError("leaky ReLU slope must lie in (0, 1)")
    x = as_tensor(x)
    return np.where(x >= 0.0, x, slope * x)


def mod_activation(x, modulus: float) -> np.ndarray:
    """Floored modulo: ``x - modulus * floor(x / modulus)``, always in ``[0, modulus)``."""
    if modulus <= 0:
        raise RejectedInputError("modulus must be positive")
    x = as_tensor(x)
    y = x - modulus * np.floor(x / modulus)
    # subnormal x underflows x / modulus to -0 and survives negative; -tiny
    # rounds up to exactly `modulus`.  Fold both back into range.
    y = np.where(y < 0, y + modulus, y)
    return np.where(y >= modulus, y - modulus, y)


def sigmoid(x) -> np.ndarray:
    x = as_tensor(x)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class LeakyReLU(Layer):
    def __init__(self, slope: float = DEFAULT_LEAKY_SLOPE):
        super().__init__()
        if not 0.0 < slope < 1.0:
            raise RejectedInputError("leaky ReLU slope must lie in (0, 1)")
        self.slope = slope
        self._mask = None

    def forward(self, x):
        x = as_tensor(x)
        self._mask = x >= 0.0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, grad_out):
        if self._mask is None:
            raise StateError("backward called before forward")
        return np.where(self._mask, grad_out, self.slope * as_tensor(grad_out))


class Mod(Layer):
    """Modulo activation with a straight-through gradient (d/dx = 1 a.e.)."""

    def __init__(self, modulus: float):
        super().__init__()
        if modulus <= 0:
            raise RejectedInputError("modulus must be positive")
        self.modulus = float(modulus)

    def forward(self, x):
        return mod_activation(x, self.modulus)

    def backward(self, grad_out):
        return as_tensor(grad_out)


class Sigmoid(Layer):
    def __init__(self):
        super().__init__()
        self._y = None

    def forward(self, x):
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad_out):
        if self._y is None:
            raise StateError("backward called before forward")
        return as_tensor(grad_out) * self._y * (1.0 - self._y)


def maxpool1d_forward(x, pool: int = 2, stride: int = 2) -> np.ndarray:
    """Functional max pooling; see :class:`MaxPool1D`."""
    return MaxPool1D(pool, stride).forward(x)


# ----------------------------------------------------------------------------
# Containers
# ----------------------------------------------------------------------------


class Sequential:
    """A chain of layers run front to back (forward) and back to front (backward)."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self):
        """Yield ``(name, param, grad)`` in deterministic layer order."""
        for i, layer in enumerate(self.layers):
            for key, value in layer.params.items():
                yield f"{i}.{key}", value, layer.grads[key]

    def parameter_count(self) -> int:
        return sum(p.size for _, p, _ in self.parameters())

    def flat_parameters(self) -> np.ndarray:
        params = [p.ravel() for _, p, _ in self.parameters()]
        return np.concatenate(params) if params else np.zeros(0)

    def load_flat_parameters(self, flat) -> None:
        flat = as_tensor(flat)
        if flat.size != self.parameter_count():
            raise RejectedInputError(
                f"expected {self.parameter_count()} parameters, got {flat.size}"
            )
        pos = 0
        for _, p, _ in self.parameters():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size


# ----------------------------------------------------------------------------
# Losses
# ----------------------------------------------------------------------------


def _check_pair(pred, target):
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise RejectedInputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def least_squares_loss(pred, target) -> float:
    """Mean of ``(pred - target)**2``."""
    pred, target = _check_pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def least_squares_grad(pred, target) -> np.ndarray:
    pred, target = _check_pair(pred, target)
    return 2.0 * (pred - target) / pred.size


def absolute_difference_loss(pred, target) -> float:
    """Mean of ``|pred - target|``."""
    pred, target = _check_pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def absolute_difference_grad(pred, target) -> np.ndarray:
    # np.sign(0) == 0 is the subgradient we want at the kink.
    pred, target = _check_pair(pred, target)
    return np.sign(pred - target) / pred.size


def _wrapped(pred, target, period):
    d = pred - target
    return d - period * np.round(d / period)


def circular_difference_loss(pred, target, period: float = 1.0) -> float:
    """Mean absolute difference measured around a circle of circumference ``period``.

    For values that are residues (outputs of a mod activation), 0 and
    ``period`` are the same point, so the distance never exceeds ``period / 2``.
    """
    pred, target = _check_pair(pred, target)
    return float(np.mean(np.abs(_wrapped(pred, target, period))))


def circular_difference_grad(pred, target, period: float = 1.0) -> np.ndarray:
    pred, target = _check_pair(pred, target)
    return np.sign(_wrapped(pred, target, period)) / pred.size


# ----------------------------------------------------------------------------
# Adam
# ----------------------------------------------------------------------------


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, param, **kwargs) -> "AdamState":
        param = as_tensor(param)
        return cls(np.zeros_like(param), np.zeros_like(param), **kwargs)


def adam_step(param, grad, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam update. ``param`` is modified in place and returned."""
    grad = as_tensor(grad)
    if np.shape(param) != grad.shape or state.first_moment.shape != grad.shape:
        raise RejectedInputError("parameter, gradient and optimizer state shapes differ")
    state.step_count += 1
    t = state.step_count
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * grad
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * grad * grad
    m_hat = state.first_moment / (1.0 - state.beta1**t)
    v_hat = state.second_moment / (1.0 - state.beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param


@dataclass
class Adam:
    """Adam over every parameter of a :class:`Sequential`."""

    net: Sequential
    lr: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict = field(init=False)

    def __post_init__(self):
        if self.lr <= 0:
            raise RejectedInputError("learning rate must be positive")
        self.states = {
            name: AdamState.like(p, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
            for name, p, _ in self.net.parameters()
        }

    def step(self):
        for name, p, g in self.net.parameters():
            adam_step(p, g, self.states[name], self.lr)

    @property
    def step_count(self) -> int:
        counts = {s.step_count for s in self.states.values()}
        return counts.pop() if len(counts) == 1 else max(counts)
