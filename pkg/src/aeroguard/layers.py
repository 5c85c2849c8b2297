"""Network building blocks: 1-D convolutions, LSTM cells, bi-directional
wrappers, dense layers, dropout, and Glorot initialization.

Layers hold their parameters as Tensors and expose ``parameters()`` as
(name, Tensor) pairs in a stable order, which is also the checkpoint order.
Sequences are passed between recurrent layers as Python lists of
[batch, features] tensors.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError
from .tensor import Tensor


def glorot_uniform(rng, shape, fan_in, fan_out):
    """Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(T.get_dtype())


class Conv1D:
    """Same- or valid-padded 1-D convolution, stride >= 1.

    Weight layout is [kernel, in_channels, out_channels]; bias starts at
    zero and weights at zero until ``init_parameters`` is called.
    """

    def __init__(self, in_channels, out_channels, kernel_size, padding="same", stride=1):
        if kernel_size < 1:
            raise ConfigError(f"kernel_size must be >= 1, got {kernel_size}")
        if padding not in ("same", "valid"):
            raise ConfigError(f"padding must be 'same' or 'valid', got {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.stride = stride
        self.weight = Tensor(
            np.zeros((kernel_size, in_channels, out_channels)), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x):
        return T.conv1d(x, self.weight, self.bias, self.padding, self.stride)

    def parameters(self, prefix=""):
        return [(prefix + "w", self.weight), (prefix + "b", self.bias)]

    def init(self, rng):
        fan_in = self.kernel_size * self.in_channels
        fan_out = self.kernel_size * self.out_channels
        self.weight.data[...] = glorot_uniform(rng, self.weight.shape, fan_in, fan_out)
        self.bias.data[...] = 0.0


class TransposedConv1D:
    """Adjoint of a Conv1D with the channel roles swapped.

    Maps in_channels -> out_channels using a weight shaped like the mirrored
    convolution: [kernel, out_channels, in_channels].  Stride 1 only, which
    is all the architectures here use.
    """

    def __init__(self, in_channels, out_channels, kernel_size, padding="same"):
        if padding not in ("same", "valid"):
            raise ConfigError(f"padding must be 'same' or 'valid', got {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.weight = Tensor(
            np.zeros((kernel_size, out_channels, in_channels)), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def mirrors(self, conv):
        """True when this layer is the exact transpose of ``conv``."""
        return (
            self.kernel_size == conv.kernel_size
            and self.padding == conv.padding
            and self.in_channels == conv.out_channels
            and self.out_channels == conv.in_channels
        )

    def forward(self, y):
        return T.transposed_conv1d(y, self.weight, self.bias, self.padding)

    def parameters(self, prefix=""):
        return [(prefix + "w", self.weight), (prefix + "b", self.bias)]

    def init(self, rng):
        fan_in = self.kernel_size * self.in_channels
        fan_out = self.kernel_size * self.out_channels
        self.weight.data[...] = glorot_uniform(rng, self.weight.shape, fan_in, fan_out)
        self.bias.data[...] = 0.0


class LSTMCell:
    """Standard LSTM cell, no peepholes.

    Gate order in the fused weight is (input, forget, candidate, output).
    The forget-gate bias initializes to one so early training does not
    flush the cell state.
    """

    def __init__(self, input_size, hidden_size):
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        self.wx = Tensor(np.zeros((input_size, 4 * h)), requires_grad=True)
        self.wh = Tensor(np.zeros((h, 4 * h)), requires_grad=True)
        self.bias = Tensor(np.zeros(4 * h), requires_grad=True)

    def step(self, x, h, c):
        """One timestep: returns (h_next, c_next)."""
        hs = self.hidden_size
        z = T.add_bias(T.add(T.matmul(x, self.wx), T.matmul(h, self.wh)), self.bias)
        i = T.sigmoid(T.slice_cols(z, 0, hs))
        f = T.sigmoid(T.slice_cols(z, hs, 2 * hs))
        g = T.tanh(T.slice_cols(z, 2 * hs, 3 * hs))
        o = T.sigmoid(T.slice_cols(z, 3 * hs, 4 * hs))
        c_next = T.add(T.mul(f, c), T.mul(i, g))
        h_next = T.mul(o, T.tanh(c_next))
        return h_next, c_next

    def parameters(self, prefix=""):
        return [
            (prefix + "wx", self.wx),
            (prefix + "wh", self.wh),
            (prefix + "b", self.bias),
        ]

    def init(self, rng):
        h = self.hidden_size
        self.wx.data[...] = glorot_uniform(rng, self.wx.shape, self.input_size, 4 * h)
        self.wh.data[...] = glorot_uniform(rng, self.wh.shape, h, 4 * h)
        self.bias.data[...] = 0.0
        self.bias.data[h : 2 * h] = 1.0


class BiLSTM:
    """Bi-directional LSTM layer with concatenated outputs.

    The backward cell consumes the sequence in reverse.  Per-timestep output
    t is [forward h_t | backward h_t], so the features that saw the whole
    sequence are the forward half of the last output and the backward half
    of the first.
    """

    def __init__(self, input_size, hidden_size):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.fwd = LSTMCell(input_size, hidden_size)
        self.bwd = LSTMCell(input_size, hidden_size)

    def forward(self, seq, init_states=None):
        """Run over a list of [batch, features] tensors.

        ``init_states`` is an optional (h_f0, c_f0, h_b0, c_b0) tuple; zeros
        otherwise.  Returns (outputs, finals) where outputs is a list of
        [batch, 2*hidden] tensors aligned with the input order and finals is
        (h_f_last, c_f_last, h_b_last, c_b_last).
        """
        if not seq:
            raise ContractError("BiLSTM.forward: empty sequence")
        batch = seq[0].shape[0]
        fs = seq[0].shape[-1]
        if fs != self.input_size:
            raise DimensionError(
                f"BiLSTM input width {fs} does not match declared {self.input_size}"
            )
        if init_states is None:
            zeros = Tensor(np.zeros((batch, self.hidden_size)))
            hf = cf = hb = cb = zeros
        else:
            hf, cf, hb, cb = init_states
        fwd_out = []
        for x in seq:
            hf, cf = self.fwd.step(x, hf, cf)
            fwd_out.append(hf)
        bwd_out = []
        for x in reversed(seq):
            hb, cb = self.bwd.step(x, hb, cb)
            bwd_out.append(hb)
        bwd_out.reverse()
        outputs = [T.concat_cols([f, b]) for f, b in zip(fwd_out, bwd_out)]
        return outputs, (hf, cf, hb, cb)

    def parameters(self, prefix=""):
        return self.fwd.parameters(prefix + "f.") + self.bwd.parameters(prefix + "b.")

    def init(self, rng):
        self.fwd.init(rng)
        self.bwd.init(rng)


class Dense:
    def __init__(self, in_features, out_features):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((in_features, out_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def forward(self, x):
        return T.add_bias(T.matmul(x, self.weight), self.bias)

    def parameters(self, prefix=""):
        return [(prefix + "w", self.weight), (prefix + "b", self.bias)]

    def init(self, rng):
        self.weight.data[...] = glorot_uniform(
            rng, self.weight.shape, self.in_features, self.out_features
        )
        self.bias.data[...] = 0.0


class Dropout:
    """Inverted dropout: scales kept activations by 1/(1-p) during training
    so evaluation is the identity."""

    def __init__(self, p):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
        self.p = float(p)

    def forward(self, x, rng=None, training=False):
        if not training or self.p == 0.0:
            return x
        if rng is None:
            raise ContractError("Dropout in training mode needs an RNG")
        keep = 1.0 - self.p
        mask = (rng.random(x.shape) < keep).astype(T.get_dtype()) / keep
        return T.mul(x, Tensor(mask))

    def parameters(self, prefix=""):
        return []


def init_parameters(layer, seed_or_rng):
    """Initialize a layer (or anything exposing ``init``) deterministically.

    Accepts either an int seed or an existing numpy Generator so models can
    thread one stream through all their layers.
    """
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    layer.init(rng)
    return layer
