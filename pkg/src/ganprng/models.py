"""
The three networks of the adversarial PRNG setup.

``GeneratorNet`` maps ``(seed, offset)`` pairs of 16-bit values to 8 outputs in
``[0, 65536)``.  Its output layer carries a fixed weight gain (default
``2**14``): with inputs scaled down by ``2**16`` the plain layer could only
reach outputs of a few units, which the mod-``2**16`` activation leaves stuck
next to its wrap point.  ``DiscriminatorNet`` scores 8-value sequences with a
probability, ``PredictorNet`` guesses the 8th value from the first 7.

Values crossing a network boundary are raw 16-bit-range reals.  Internally every
network divides its input by ``2**16`` so activations stay O(1); the predictor's
output lives in that normalised space too.

Parameter files
---------------
``save_params``/``load_params`` use a small little-endian binary layout::

    8s   magic  b"GANPRNG\\0"
    u16  format version (1)
    u16  architecture id (1 generator, 2 discriminator, 3 predictor)
    u32  hidden width      (generator only, 0 otherwise)
    u32  hidden depth      (generator only, 0 otherwise)
    f64  output gain       (generator only, 1.0 otherwise)
    u64  parameter count
    f64 * count, in ``Sequential.parameters()`` order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import nncore as nn
from .errors import ParseError, RejectedInputError

WORD_RANGE = 2**16
DEFAULT_OUTPUT_GAIN = 2.0**14
INPUT_SCALE = 1.0 / WORD_RANGE
SEQUENCE_LENGTH = 8

MAGIC = b"GANPRNG\0"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHIIdQ")

GENERATOR_ID = 1
DISCRIMINATOR_ID = 2
PREDICTOR_ID = 3


def _make_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class GeneratorNet:
    """Dense stack ``2 -> 30 -> 30 -> 30 -> 30 -> 8`` with leaky ReLU and a mod-2**16 output."""

    arch_id = GENERATOR_ID

    def __init__(self, seed=0, hidden_width: int = 30, hidden_depth: int = 4,
                 slope: float = nn.DEFAULT_LEAKY_SLOPE,
                 output_gain: float = DEFAULT_OUTPUT_GAIN):
        if hidden_width < 1 or hidden_depth < 1:
            raise RejectedInputError("hidden width and depth must be positive")
        if not output_gain > 0:
            raise RejectedInputError("output gain must be positive")
        rng = _make_rng(seed)
        self.hidden_width = hidden_width
        self.hidden_depth = hidden_depth
        self.output_gain = float(output_gain)
        layers: list[nn.Layer] = [nn.Scale(INPUT_SCALE)]
        width_in = 2
        for _ in range(hidden_depth):
            layers += [nn.Dense(width_in, hidden_width, rng), nn.LeakyReLU(slope)]
            width_in = hidden_width
        layers += [nn.Dense(width_in, SEQUENCE_LENGTH, rng, gain=output_gain),
                   nn.Mod(WORD_RANGE)]
        self.net = nn.Sequential(layers)

    @property
    def output_layer(self) -> nn.Dense:
        return self.net.layers[-2]

    def forward(self, inputs) -> np.ndarray:
        """Return a ``(batch, 8)`` array of outputs in ``[0, 65536)``."""
        x = nn.as_tensor(inputs)
        if x.ndim != 2 or x.shape[1] != 2:
            raise RejectedInputError(f"generator expects (batch, 2) inputs, got {x.shape}")
        return self.net.forward(x)

    __call__ = forward

    def backward(self, grad_out) -> np.ndarray:
        return self.net.backward(grad_out)

    def parameter_count(self) -> int:
        return self.net.parameter_count()


class _ConvCritic:
    """Shared conv stack for the discriminator and predictor.

    Four kernel-2 stride-1 convolutions (1 -> 4 -> 4 -> 4 -> 4 channels), max
    pool (2, 2), then dense layers to 4 and 1 units.
    """

    num_filters = 4
    kernel = 2
    conv_layers = 4
    head_width = 4

    def __init__(self, input_length: int, seed, slope: float, squash: bool):
        rng = _make_rng(seed)
        self.input_length = input_length
        layers: list[nn.Layer] = [nn.Scale(INPUT_SCALE), nn.Reshape((1, input_length))]
        channels, length = 1, input_length
        for _ in range(self.conv_layers):
            conv = nn.Conv1D(channels, self.num_filters, self.kernel, 1, rng)
            length = conv.output_length(length)
            layers += [conv, nn.LeakyReLU(slope)]
            channels = self.num_filters
        self.conv_output_length = length
        pool = nn.MaxPool1D(2, 2)
        self.pooled_length = pool.output_length(length)
        flat = channels * self.pooled_length
        layers += [
            pool,
            nn.Flatten(),
            nn.Dense(flat, self.head_width, rng),
            nn.LeakyReLU(slope),
            nn.Dense(self.head_width, 1, rng),
        ]
        if squash:
            layers.append(nn.Sigmoid())
        self.net = nn.Sequential(layers)

    def forward(self, batch) -> np.ndarray:
        x = nn.as_tensor(batch)
        if x.ndim != 2 or x.shape[1] != self.input_length:
            raise RejectedInputError(
                f"expected (batch, {self.input_length}) input, got {x.shape}"
            )
        return self.net.forward(x)[:, 0]

    __call__ = forward

    def backward(self, grad_out) -> np.ndarray:
        """``grad_out`` has shape (batch,); returns the gradient w.r.t. raw inputs."""
        g = nn.as_tensor(grad_out)[:, None]
        return self.net.backward(g)

    def parameter_count(self) -> int:
        return self.net.parameter_count()


class DiscriminatorNet(_ConvCritic):
    """Probability that an 8-value sequence came from the reference source."""

    arch_id = DISCRIMINATOR_ID

    def __init__(self, seed=0, slope: float = nn.DEFAULT_LEAKY_SLOPE):
        super().__init__(SEQUENCE_LENGTH, seed, slope, squash=True)


class PredictorNet(_ConvCritic):
    """Predicts the normalised 8th value of a sequence from the first 7."""

    arch_id = PREDICTOR_ID

    def __init__(self, seed=0, slope: float = nn.DEFAULT_LEAKY_SLOPE):
        super().__init__(SEQUENCE_LENGTH - 1, seed, slope, squash=False)


def generator_forward(net: GeneratorNet, inputs) -> np.ndarray:
    return net.forward(inputs)


def discriminator_forward(net: DiscriminatorNet, batch) -> np.ndarray:
    return net.forward(batch)


def predictor_forward(net: PredictorNet, split_inputs) -> np.ndarray:
    return net.forward(split_inputs)


def split_sequences(batch) -> tuple[np.ndarray, np.ndarray]:
    """Split ``(batch, 8)`` rows into the first 7 columns and the last column."""
    batch = nn.as_tensor(batch)
    if batch.ndim != 2 or batch.shape[1] != SEQUENCE_LENGTH:
        raise RejectedInputError(f"expected (batch, 8) sequences, got {batch.shape}")
    return batch[:, :-1], batch[:, -1]


# ----------------------------------------------------------------------------
# Serialisation
# ----------------------------------------------------------------------------


def params_to_bytes(model) -> bytes:
    width = getattr(model, "hidden_width", 0)
    depth = getattr(model, "hidden_depth", 0)
    gain = getattr(model, "output_gain", 1.0)
    flat = model.net.flat_parameters()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, model.arch_id, width, depth, gain, flat.size)
    return header + flat.astype("<f8").tobytes()


def params_from_bytes(data: bytes):
    """Rebuild a network from :func:`params_to_bytes` output."""
    if len(data) < _HEADER.size:
        raise ParseError("parameter file truncated in header", offset=len(data))
    magic, version, arch, width, depth, gain, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError("bad magic in parameter file", offset=0)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported parameter file version {version}", offset=8)
    if arch == GENERATOR_ID:
        if width < 1 or depth < 1 or not gain > 0:
            raise ParseError("invalid generator dimensions in header", offset=12)
        model = GeneratorNet(seed=None, hidden_width=width, hidden_depth=depth,
                             output_gain=gain)
    elif arch == DISCRIMINATOR_ID:
        model = DiscriminatorNet(seed=0)
    elif arch == PREDICTOR_ID:
        model = PredictorNet(seed=0)
    else:
        raise ParseError(f"unknown architecture id {arch}", offset=10)
    if count != model.parameter_count():
        raise ParseError(
            f"parameter count {count} does not match architecture ({model.parameter_count()})",
            offset=_HEADER.size - 8,
        )
    expected = _HEADER.size + 8 * count
    if len(data) != expected:
        raise ParseError(
            f"parameter file has {len(data)} bytes, expected {expected}",
            offset=min(len(data), expected),
        )
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=count)
    model.net.load_flat_parameters(flat)
    return model


def save_params(model, path) -> None:
    Path(path).write_bytes(params_to_bytes(model))


def load_params(path):
    return params_from_bytes(Path(path).read_bytes())
