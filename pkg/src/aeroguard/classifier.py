"""Convolutional Bi-LSTM classifier for crash-cause identification.

Windows flagged anomalous by the detection stage arrive here; the network
maps each one to a probability over fault classes.  Structure: three 1-D
convolutions (no pooling), two bidirectional LSTM layers over the full
window, the concatenated final outputs of both directions, one tanh dense
layer, and a softmax head trained with categorical cross entropy.  Dropout
sits after the conv stack and after the LSTM stack, active only during
training.

Labels here are 0-based class indices; the pipeline layer owns the mapping
between crash classes and indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError, TrainingFault
from .layers import BiLSTM, Conv1D, Dense, Dropout
from .optim import Adam
from .tensor import Tensor


@dataclass
class ClassifierConfig:
    """Architecture and training knobs for the identification network.

    Defaults are the full-scale recipe (filters 48/64/96, kernels 5/5/3,
    hidden 128, one tanh dense layer of 128, dropout 0.2, 15 epochs of
    minibatch-64 Adam).
    """

    window: int = 100
    channels: int = 3
    num_classes: int = 15
    conv_filters: tuple = (48, 64, 96)
    conv_kernels: tuple = (5, 5, 3)
    hidden: int = 128
    dense_hidden: int = 128
    dropout: float = 0.2
    epochs: int = 15
    batch_size: int = 64
    learning_rate: float = 0.01
    adam_eps: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.window < 1 or self.channels < 1:
            raise ConfigError("window and channels must be positive")
        if self.num_classes < 2:
            raise ConfigError("need at least 2 classes")
        if len(self.conv_filters) != len(self.conv_kernels) or not self.conv_filters:
            raise ConfigError("conv_filters and conv_kernels must pair up")
        if min(self.hidden, self.dense_hidden, self.epochs, self.batch_size) < 1:
            raise ConfigError("layer sizes, epochs, and batch_size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


@dataclass
class TrainingInfo:
    epochs_run: int = 0
    final_loss: float = float("nan")
    seed: int = 0
    history: list = field(default_factory=list)  # per-epoch metric dicts


class FaultClassifier:
    """Window [batch, W, C] -> logits [batch, K]."""

    def __init__(self, config: ClassifierConfig):
        self.config = config
        self.info = TrainingInfo(seed=config.seed)
        c = config
        widths = (c.channels,) + tuple(c.conv_filters)
        self.convs = [
            Conv1D(widths[i], widths[i + 1], c.conv_kernels[i])
            for i in range(len(c.conv_filters))
        ]
        self.drop_conv = Dropout(c.dropout)
        self.lstm1 = BiLSTM(widths[-1], c.hidden)
        self.lstm2 = BiLSTM(2 * c.hidden, c.hidden)
        self.drop_readout = Dropout(c.dropout)
        self.dense = Dense(2 * c.hidden, c.dense_hidden)
        self.head = Dense(c.dense_hidden, c.num_classes)
        rng = np.random.default_rng(c.seed)
        for layer in self.convs + [self.lstm1, self.lstm2, self.dense, self.head]:
            layer.init(rng)

    def parameters(self):
        pairs = []
        for i, conv in enumerate(self.convs):
            pairs += conv.parameters(f"conv{i}.")
        pairs += self.lstm1.parameters("lstm1.")
        pairs += self.lstm2.parameters("lstm2.")
        pairs += self.dense.parameters("dense.")
        pairs += self.head.parameters("head.")
        return pairs

    def parameter_arrays(self):
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

    def forward(self, x, rng=None, training=False):
        c = self.config
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.ndim != 3 or x.shape[1] != c.window or x.shape[2] != c.channels:
            raise DimensionError(
                f"window batch shaped {x.shape} does not match "
                f"model {c.window}x{c.channels}"
            )
        h = x
        for conv in self.convs:
            h = T.relu(conv.forward(h))
        h = self.drop_conv.forward(h, rng=rng, training=training)
        seq = [T.time_slice(h, t) for t in range(c.window)]
        seq, _ = self.lstm1.forward(seq)
        _, (hf, _, hb, _) = self.lstm2.forward(seq)
        readout = T.concat_cols([hf, hb])
        readout = self.drop_readout.forward(readout, rng=rng, training=training)
        hidden = T.tanh(self.dense.forward(readout))
        return self.head.forward(hidden)


def predict(model: FaultClassifier, windows):
    """Class ids and probabilities, dropout off.

    A single [W, C] window gives (int, [K]); a batch [N, W, C] gives
    ([N], [N, K]).  Argmax breaks ties toward the lowest class index.
    """
    arr = np.asarray(windows, dtype=np.float32)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    with T.no_grad():
        logits = model.forward(Tensor(arr))
        probs = T.softmax(logits).data
    ids = probs.argmax(axis=1)
    if single:
        return int(ids[0]), probs[0]
    return ids.astype(np.int64), probs


@dataclass
class ConfusionMatrix:
    """Counts with rows = truth, columns = prediction."""

    counts: np.ndarray

    @property
    def accuracy(self):
        total = self.counts.sum()
        if total == 0:
            raise ContractError("empty confusion matrix")
        return float(np.trace(self.counts) / total)

    def row_totals(self):
        return self.counts.sum(axis=1)

    def write_csv(self, path):
        k = self.counts.shape[0]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("truth\\pred," + ",".join(str(j) for j in range(k)) + "\n")
            for i in range(k):
                row = ",".join(str(int(v)) for v in self.counts[i])
                fh.write(f"{i},{row}\n")


def evaluate(model: FaultClassifier, windows, labels):
    """Accuracy and confusion matrix over a labeled test set."""
    arr = np.asarray(windows, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ContractError("evaluation needs a non-empty [N, W, C] window stack")
    if y.shape != (arr.shape[0],):
        raise ContractError("labels must align one-to-one with windows")
    k = model.config.num_classes
    if y.min() < 0 or y.max() >= k:
        raise ContractError(f"labels outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    for lo in range(0, arr.shape[0], 512):
        ids, _ = predict(model, arr[lo : lo + 512])
        for truth, pred in zip(y[lo : lo + 512], ids):
            counts[truth, pred] += 1
    matrix = ConfusionMatrix(counts)
    return matrix.accuracy, matrix


def train_classifier(
    config: ClassifierConfig,
    windows,
    labels,
    test_windows=None,
    test_labels=None,
) -> FaultClassifier:
    """Fit on labeled windows; optionally track a held-out set per epoch.

    History rows carry epoch, train_loss, train_acc, and (when a test set
    is supplied) test_loss and test_acc.  Deterministic for a fixed seed.
    """
    windows = np.asarray(windows, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if windows.ndim != 3 or windows.shape[0] == 0:
        raise ContractError("training needs a non-empty [N, W, C] window stack")
    if windows.shape[1] != config.window or windows.shape[2] != config.channels:
        raise DimensionError(
            f"windows shaped {windows.shape[1]}x{windows.shape[2]} do not "
            f"match config {config.window}x{config.channels}"
        )
    if labels.shape != (windows.shape[0],):
        raise ContractError("labels must align one-to-one with windows")
    if labels.min() < 0 or labels.max() >= config.num_classes:
        raise ContractError(f"labels outside 0..{config.num_classes - 1}")
    if len(np.unique(labels)) < 2:
        raise ContractError("training set contains a single class")
    has_test = test_windows is not None
    if has_test:
        test_windows = np.asarray(test_windows, dtype=np.float32)
        test_labels = np.asarray(test_labels, dtype=np.int64)

    model = FaultClassifier(config)
    opt = Adam(
        [p for _, p in model.parameters()],
        lr=config.learning_rate,
        eps=config.adam_eps,
    )
    shuffle_rng = np.random.default_rng((config.seed, 1))
    dropout_rng = np.random.default_rng((config.seed, 2))
    n = windows.shape[0]
    last_good = model.parameter_arrays()
    history = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        correct = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            x = Tensor(windows[idx])
            logits = model.forward(x, rng=dropout_rng, training=True)
            loss = T.cross_entropy_loss(logits, labels[idx])
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
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        row = {
            "epoch": epoch + 1,
            "train_loss": total / n,
            "train_acc": correct / n,
        }
        if has_test:
            row["test_loss"] = _dataset_loss(model, test_windows, test_labels)
            row["test_acc"] = evaluate(model, test_windows, test_labels)[0]
        history.append(row)
        last_good = model.parameter_arrays()
    model.info = TrainingInfo(
        epochs_run=config.epochs,
        final_loss=history[-1]["train_loss"] if history else float("nan"),
        seed=config.seed,
        history=history,
    )
    return model


def _dataset_loss(model, windows, labels, batch_size=512):
    total = 0.0
    with T.no_grad():
        for lo in range(0, len(windows), batch_size):
            x = Tensor(windows[lo : lo + batch_size])
            loss = T.cross_entropy_loss(model.forward(x), labels[lo : lo + batch_size])
            total += loss.item() * x.shape[0]
    return total / len(windows)


def write_history_csv(path, history):
    """`epoch,train_loss,test_loss,train_acc,test_acc`; blanks when untracked."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,test_loss,train_acc,test_acc\n")
        for row in history:
            test_loss = row.get("test_loss")
            test_acc = row.get("test_acc")
            fh.write(
                f"{row['epoch']},{row['train_loss']:.9g},"
                f"{'' if test_loss is None else format(test_loss, '.9g')},"
                f"{row['train_acc']:.9g},"
                f"{'' if test_acc is None else format(test_acc, '.9g')}\n"
            )


def channel_ablation(config: ClassifierConfig, windows, labels, test_windows,
                     test_labels, subsets):
    """Accuracy per channel subset, each from a freshly trained model.

    ``subsets`` is an iterable of channel-index tuples into the window's
    channel axis.  Returns [(subset, accuracy)] in the order given.
    """
    from dataclasses import replace

    windows = np.asarray(windows, dtype=np.float32)
    test_windows = np.asarray(test_windows, dtype=np.float32)
    results = []
    for subset in subsets:
        subset = tuple(subset)
        if not subset or max(subset) >= windows.shape[2] or min(subset) < 0:
            raise ContractError(f"channel subset {subset} out of range")
        sub_cfg = replace(config, channels=len(subset))
        model = train_classifier(
            sub_cfg, windows[:, :, subset], labels
        )
        acc, _ = evaluate(model, test_windows[:, :, subset], test_labels)
        results.append((subset, acc))
    return results
