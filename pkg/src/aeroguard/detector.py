"""Convolutional Bi-LSTM autoencoder for flight-window anomaly detection.

The encoder runs a 1-D convolution stack over the window, then two
bidirectional LSTM layers; the embedding is the concatenated final hidden
and cell states of both directions of the top layer, so its size is fixed
by the hidden width no matter how long the window is.  The decoder mirrors
the encoder in reverse: a Bi-LSTM seeded from the embedding and fed zero
inputs for every timestep, a per-timestep linear adapter back to the conv
feature width, and transposed convolutions that undo the encoder stack.

Feeding zeros (rather than the previous output) keeps training and
inference identical and the whole model is one differentiable graph, so the
embedding gradients flow back through the decoder seeding.

Training minimizes plain mean-squared reconstruction error; the scorer
turns per-channel errors into anomaly scores downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError, TrainingFault
from .layers import BiLSTM, Conv1D, Dense, TransposedConv1D
from .optim import Adam
from .tensor import Tensor


@dataclass
class DetectorConfig:
    """Architecture and training knobs for the detection autoencoder.

    Defaults follow the full-scale recipe (conv filters 48/64/96, kernels
    5/5/3, hidden 256, minibatch 512); tests and the desk-scale pipeline
    shrink them.  ``window`` is the length each trained model is committed
    to; one model serves exactly one (window, channel-set) combination.
    """

    window: int = 25
    channels: int = 6
    conv_filters: tuple = (48, 64, 96)
    conv_kernels: tuple = (5, 5, 3)
    hidden: int = 256
    epochs: int = 100
    batch_size: int = 512
    learning_rate: float = 0.01
    adam_eps: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.window < 1 or self.channels < 1:
            raise ConfigError("window and channels must be positive")
        if len(self.conv_filters) != len(self.conv_kernels):
            raise ConfigError("conv_filters and conv_kernels must pair up")
        if not self.conv_filters:
            raise ConfigError("need at least one conv layer")
        if any(f < 1 for f in self.conv_filters) or any(
            k < 1 for k in self.conv_kernels
        ):
            raise ConfigError("conv sizes must be positive")
        if min(self.hidden, self.epochs, self.batch_size) < 1:
            raise ConfigError("hidden, epochs, and batch_size must be positive")

    @property
    def embedding_size(self):
        # both directions, h and c each
        return 4 * self.hidden


@dataclass
class TrainingInfo:
    epochs_run: int = 0
    final_loss: float = float("nan")
    seed: int = 0
    history: list = field(default_factory=list)


class SequenceAutoencoder:
    """Encoder/decoder pair over [batch, window, channels] arrays."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.info = TrainingInfo(seed=config.seed)
        c = config
        widths = (c.channels,) + tuple(c.conv_filters)
        self.enc_convs = [
            Conv1D(widths[i], widths[i + 1], c.conv_kernels[i])
            for i in range(len(c.conv_filters))
        ]
        feat = widths[-1]
        self.enc_lstm1 = BiLSTM(feat, c.hidden)
        self.enc_lstm2 = BiLSTM(2 * c.hidden, c.hidden)
        self.dec_lstm1 = BiLSTM(2 * c.hidden, c.hidden)
        self.dec_lstm2 = BiLSTM(2 * c.hidden, c.hidden)
        self.dec_proj = Dense(2 * c.hidden, feat)
        # exact reverse mirror of the conv stack
        self.dec_tconvs = [
            TransposedConv1D(widths[i + 1], widths[i], c.conv_kernels[i])
            for i in reversed(range(len(c.conv_filters)))
        ]
        rng = np.random.default_rng(c.seed)
        for layer in self._layers():
            layer.init(rng)

    def _layers(self):
        return (
            self.enc_convs
            + [self.enc_lstm1, self.enc_lstm2, self.dec_lstm1, self.dec_lstm2]
            + [self.dec_proj]
            + self.dec_tconvs
        )

    def parameters(self):
        pairs = []
        for i, conv in enumerate(self.enc_convs):
            pairs += conv.parameters(f"enc_conv{i}.")
        pairs += self.enc_lstm1.parameters("enc_lstm1.")
        pairs += self.enc_lstm2.parameters("enc_lstm2.")
        pairs += self.dec_lstm1.parameters("dec_lstm1.")
        pairs += self.dec_lstm2.parameters("dec_lstm2.")
        pairs += self.dec_proj.parameters("dec_proj.")
        for i, tconv in enumerate(self.dec_tconvs):
            pairs += tconv.parameters(f"dec_tconv{i}.")
        return pairs

    def parameter_arrays(self):
        """Name -> array copies, for checkpointing and snapshots."""
        return {name: p.data.copy() for name, p in self.parameters()}

    def load_parameter_arrays(self, arrays):
        for name, p in self.parameters():
            if name not in arrays:
                raise ContractError(f"missing parameter {name}")
            if arrays[name].shape != p.data.shape:
                raise DimensionError(
                    f"parameter {name} has shape {arrays[name].shape}, "
                    f"expected {p.data.shape}"
                )
            p.data[...] = arrays[name]

    # -- forward passes ----------------------------------------------------

    def _check_window(self, x):
        c = self.config
        if x.ndim != 3 or x.shape[-2] != c.window or x.shape[-1] != c.channels:
            raise DimensionError(
                f"window batch shaped {x.shape} does not match "
                f"model {c.window}x{c.channels}"
            )
        return x

    def encode(self, x):
        """[batch, W, C] (or a single [W, C]) -> [batch, 4*hidden] embedding."""
        single = not isinstance(x, Tensor) and np.ndim(x) == 2
        if single:
            x = np.asarray(x)[None]
        x = self._check_window(x if isinstance(x, Tensor) else Tensor(x))
        h = x
        for conv in self.enc_convs:
            h = T.relu(conv.forward(h))
        seq = [T.time_slice(h, t) for t in range(self.config.window)]
        seq, _ = self.enc_lstm1.forward(seq)
        _, (hf, cf, hb, cb) = self.enc_lstm2.forward(seq)
        emb = T.concat_cols([hf, cf, hb, cb])
        return emb

    def decode(self, embedding):
        """[batch, 4*hidden] embedding -> [batch, W, C] reconstruction."""
        if not isinstance(embedding, Tensor):
            embedding = Tensor(np.atleast_2d(np.asarray(embedding)))
        c = self.config
        if embedding.ndim != 2 or embedding.shape[1] != c.embedding_size:
            raise DimensionError(
                f"embedding width {embedding.shape[-1]} does not match "
                f"model {c.embedding_size}"
            )
        hsz = c.hidden
        batch = embedding.shape[0]
        init = tuple(
            T.slice_cols(embedding, i * hsz, (i + 1) * hsz) for i in range(4)
        )
        zero = Tensor(np.zeros((batch, 2 * hsz)))
        seq, _ = self.dec_lstm1.forward([zero] * c.window, init_states=init)
        seq, _ = self.dec_lstm2.forward(seq)
        h = T.stack_time(seq)
        flat = T.reshape(h, (batch * c.window, 2 * hsz))
        flat = self.dec_proj.forward(flat)
        h = T.reshape(flat, (batch, c.window, self.dec_proj.out_features))
        for tconv in self.dec_tconvs[:-1]:
            h = T.relu(tconv.forward(h))
        return self.dec_tconvs[-1].forward(h)

    def reconstruct(self, x):
        single = not isinstance(x, Tensor) and np.ndim(x) == 2
        out = self.decode(self.encode(x))
        if single:
            return Tensor(out.data[0])
        return out


def train_detector(config: DetectorConfig, windows) -> SequenceAutoencoder:
    """Fit the autoencoder on normal-phase windows [N, W, C].

    Minibatch Adam on mean-squared reconstruction error, one permutation of
    the data per epoch.  Everything downstream of the seed is deterministic.
    A non-finite loss raises TrainingFault carrying the last epoch's
    parameters and the loss history up to the failure.
    """
    windows = np.asarray(windows, dtype=np.float32)
    if windows.ndim != 3 or windows.shape[0] == 0:
        raise ContractError("training needs a non-empty [N, W, C] window stack")
    if windows.shape[1] != config.window or windows.shape[2] != config.channels:
        raise DimensionError(
            f"windows shaped {windows.shape[1]}x{windows.shape[2]} do not "
            f"match config {config.window}x{config.channels}"
        )
    model = SequenceAutoencoder(config)
    params = model.parameters()
    opt = Adam(
        [p for _, p in params],
        lr=config.learning_rate,
        eps=config.adam_eps,
    )
    rng = np.random.default_rng(config.seed)
    n = windows.shape[0]
    last_good = model.parameter_arrays()
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            x = Tensor(windows[idx])
            loss = T.mse_loss(model.reconstruct(x), x)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingFault(
                    f"non-finite loss in epoch {epoch + 1}",
                    last_good=last_good,
                    epochs_completed=epoch,
                    history=history,
                )
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            total += value * len(idx)
        history.append(total / n)
        last_good = model.parameter_arrays()
    model.info = TrainingInfo(
        epochs_run=config.epochs,
        final_loss=history[-1] if history else float("nan"),
        seed=config.seed,
        history=history,
    )
    return model


def reconstruction_error(model: SequenceAutoencoder, windows, batch_size=512):
    """Per-channel mean-squared error: [N, W, C] -> [N, C] (or [W, C] -> [C]).

    This error vector is the multivariate observation the Gaussian scorer
    fits; no gradients are recorded.
    """
    arr = np.asarray(windows, dtype=np.float32)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError("expected [N, W, C] windows")
    out = np.empty((arr.shape[0], arr.shape[2]), dtype=np.float32)
    with T.no_grad():
        for lo in range(0, arr.shape[0], batch_size):
            chunk = arr[lo : lo + batch_size]
            recon = model.reconstruct(Tensor(chunk))
            sq = (recon.data - chunk) ** 2
            out[lo : lo + batch_size] = sq.mean(axis=1)
    return out[0] if single else out
