"""Dense tensors with taped reverse-mode differentiation.

Everything downstream (layers, both networks) is built on the primitives in
this module.  Design notes:

* Values are contiguous numpy arrays.  Compute defaults to float32; a global
  switch selects float64, which is what the finite-difference gradient checks
  run under.
* Every differentiable operation appends a record to a module-level tape.
  Record order is a valid topological order of the graph, so ``backward``
  simply walks the tape in exact reverse order.  No recursion, so deeply
  unrolled recurrent graphs are fine.
* Gradients accumulate into ``Tensor.grad``.  Callers (the optimizer) zero
  them between steps.
* Elementwise binary ops require equal shapes; the only broadcasting allowed
  is scalar-with-tensor.  Bias addition over rows is its own primitive.

The tape is module-global state, which keeps the op signatures clean but
means the engine is single-threaded by design.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, DimensionError, LabelError, NumericError

_DTYPES = {"float32": np.float32, "float64": np.float64}

# module state: active dtype, whether ops record to the tape
_state = {"dtype": np.float32, "grad": True}
_node_ids = itertools.count()
_tape: list["_Record"] = []


def set_dtype(name):
    """Select the global compute dtype ("float32" or "float64")."""
    if name not in _DTYPES:
        raise ContractError(f"unsupported dtype {name!r}; expected float32 or float64")
    _state["dtype"] = _DTYPES[name]


def get_dtype():
    return _state["dtype"]


@contextmanager
def use_dtype(name):
    """Temporarily switch the compute dtype (used by the gradient checker)."""
    prev = _state["dtype"]
    set_dtype(name)
    try:
        yield
    finally:
        _state["dtype"] = prev


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference paths)."""
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


def clear_tape():
    _tape.clear()


def tape_length():
    return len(_tape)


class _Record:
    """One recorded operation: output node plus a closure that routes the
    output gradient into the parents."""

    __slots__ = ("name", "out", "fn", "parents")

    def __init__(self, name, out, fn, parents):
        self.name = name
        self.out = out
        self.fn = fn
        self.parents = parents  # parent node ids, for introspection


class Tensor:
    """A dense array plus a gradient slot.

    ``requires_grad`` marks leaves (parameters) whose gradients the caller
    wants; outputs of recorded ops inherit it from their parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=_state["dtype"])
        if arr.size == 0:
            raise DimensionError("empty tensors are not supported")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the free functions do the real work
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(arr):
    """Wrap an already-computed array without re-casting it."""
    t = Tensor.__new__(Tensor)
    t.data = arr
    t.grad = None
    t.requires_grad = False
    t.node_id = next(_node_ids)
    return t


def _record(name, out, parents, fn):
    if _state["grad"] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _tape.append(_Record(name, out, fn, tuple(p.node_id for p in parents)))
    return out


def _accum(t, g):
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def recorded_ops():
    """The current tape as (op-name, output-id, parent-ids) triples."""
    return [(r.name, r.out.node_id, r.parents) for r in _tape]


def backward(loss):
    """Reverse-mode sweep from a scalar loss.

    Walks the tape in exact reverse of record order, skipping nodes the loss
    does not depend on (their output gradient is still None).  Consumes the
    tape.  Gradients accumulate; callers zero parameter grads between steps.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ContractError("loss is not connected to any recorded operation")
    loss.grad = np.ones_like(loss.data)
    for rec in reversed(_tape):
        g = rec.out.grad
        if g is not None:
            rec.fn(g)
    _tape.clear()


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def _is_scalar(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


# ---------------------------------------------------------------------------
# elementwise and scalar ops


def add(a, b):
    if _is_scalar(b):
        out = _result(a.data + b)

        def fn(g, a=a):
            _accum(a, g)

        return _record("add", out, (a,), fn)
    if _is_scalar(a):
        return add(b, a)
    _check_same_shape(a, b, "add")
    out = _result(a.data + b.data)

    def fn(g, a=a, b=b):
        _accum(a, g)
        _accum(b, g)

    return _record("add", out, (a, b), fn)


def sub(a, b):
    if _is_scalar(b):
        return add(a, -b)
    _check_same_shape(a, b, "sub")
    out = _result(a.data - b.data)

    def fn(g, a=a, b=b):
        _accum(a, g)
        _accum(b, -g)

    return _record("sub", out, (a, b), fn)


def mul(a, b):
    if _is_scalar(b):
        return scale(a, b)
    if _is_scalar(a):
        return scale(b, a)
    _check_same_shape(a, b, "mul")
    out = _result(a.data * b.data)

    def fn(g, a=a, b=b):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _record("mul", out, (a, b), fn)


def scale(a, s):
    s = float(s)
    out = _result(a.data * s)

    def fn(g, a=a, s=s):
        _accum(a, g * s)

    return _record("scale", out, (a,), fn)


def sigmoid(a):
    # exp overflow for very negative inputs saturates to 0, which is the
    # right answer; silence the warning rather than branch
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-a.data))
    out = _result(y)

    def fn(g, a=a, y=y):
        _accum(a, g * (y * (1.0 - y)))

    return _record("sigmoid", out, (a,), fn)


def tanh(a):
    y = np.tanh(a.data)
    out = _result(y)

    def fn(g, a=a, y=y):
        _accum(a, g * (1.0 - y * y))

    return _record("tanh", out, (a,), fn)


def relu(a):
    y = np.maximum(a.data, 0)
    out = _result(y)

    def fn(g, a=a):
        _accum(a, g * (a.data > 0))

    return _record("relu", out, (a,), fn)


def softmax(a):
    """Softmax over the last axis (1-D or 2-D input)."""
    if a.ndim not in (1, 2):
        raise DimensionError(f"softmax expects 1-D or 2-D input, got {a.data.shape}")
    if not np.isfinite(a.data).all():
        raise NumericError("softmax: non-finite input")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _result(y)

    def fn(g, a=a, y=y):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    return _record("softmax", out, (a,), fn)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}"
        )
    out = _result(a.data @ b.data)

    def fn(g, a=a, b=b):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _record("matmul", out, (a, b), fn)


def add_bias(x, b):
    """Add a 1-D bias over the last axis of x."""
    if b.ndim != 1 or x.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(f"add_bias: {x.data.shape} + {b.data.shape}")
    out = _result(x.data + b.data)

    def fn(g, x=x, b=b):
        _accum(x, g)
        if b.requires_grad:
            axes = tuple(range(g.ndim - 1))
            _accum(b, g.sum(axis=axes))

    return _record("add_bias", out, (x, b), fn)


# ---------------------------------------------------------------------------
# shape plumbing


def reshape(x, shape):
    out = _result(x.data.reshape(shape))

    def fn(g, x=x):
        _accum(x, g.reshape(x.data.shape))

    return _record("reshape", out, (x,), fn)


def slice_cols(x, lo, hi):
    """Take columns [lo, hi) of the last axis."""
    n = x.data.shape[-1]
    if not (0 <= lo < hi <= n):
        raise DimensionError(f"slice_cols [{lo}:{hi}] out of range for width {n}")
    out = _result(np.ascontiguousarray(x.data[..., lo:hi]))

    def fn(g, x=x, lo=lo, hi=hi):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[..., lo:hi] += g

    return _record("slice_cols", out, (x,), fn)


def concat_cols(parts):
    """Concatenate tensors along the last axis."""
    if not parts:
        raise ContractError("concat_cols: empty input")
    out = _result(np.concatenate([p.data for p in parts], axis=-1))
    widths = [p.data.shape[-1] for p in parts]

    def fn(g, parts=tuple(parts), widths=tuple(widths)):
        off = 0
        for p, w in zip(parts, widths):
            _accum(p, g[..., off : off + w])
            off += w

    return _record("concat_cols", out, tuple(parts), fn)


def time_slice(x, t):
    """Pick timestep t from a [batch, time, features] tensor."""
    if x.ndim != 3:
        raise DimensionError(f"time_slice expects 3-D input, got {x.data.shape}")
    out = _result(np.ascontiguousarray(x.data[:, t, :]))

    def fn(g, x=x, t=t):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[:, t, :] += g

    return _record("time_slice", out, (x,), fn)


def stack_time(parts):
    """Stack a list of [batch, features] tensors into [batch, time, features]."""
    if not parts:
        raise ContractError("stack_time: empty input")
    out = _result(np.stack([p.data for p in parts], axis=1))

    def fn(g, parts=tuple(parts)):
        for i, p in enumerate(parts):
            _accum(p, g[:, i, :])

    return _record("stack_time", out, tuple(parts), fn)


# ---------------------------------------------------------------------------
# convolution


def _conv_pads(k, padding):
    if padding == "same":
        # total k-1, extra on the right for even k
        left = (k - 1) // 2
        return left, k - 1 - left
    if padding == "valid":
        return 0, 0
    raise ContractError(f"padding must be 'same' or 'valid', got {padding!r}")


def conv1d(x, w, bias=None, padding="same", stride=1):
    """1-D convolution (cross-correlation) over the time axis.

    x: [batch, length, in_channels], w: [kernel, in_channels, out_channels],
    bias: [out_channels] or None.  Output: [batch, out_length, out_channels].
    """
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionError(f"conv1d: x {x.data.shape}, w {w.data.shape}")
    if not isinstance(stride, int) or stride < 1:
        raise ContractError(f"conv1d stride must be a positive int, got {stride!r}")
    batch, length, cin = x.data.shape
    k, wcin, cout = w.data.shape
    if wcin != cin:
        raise DimensionError(
            f"conv1d channel mismatch: input has {cin}, weight expects {wcin}"
        )
    pl, pr = _conv_pads(k, padding)
    lp = length + pl + pr
    if lp < k:
        raise DimensionError(
            f"conv1d: padded length {lp} shorter than kernel {k} (valid padding)"
        )
    xp = np.pad(x.data, ((0, 0), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, k, axis=1)[:, ::stride]  # [B, Lo, Cin, k]
    lo_len = win.shape[1]
    patches = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(
        batch * lo_len, k * cin
    )
    w2 = w.data.reshape(k * cin, cout)
    y = patches @ w2
    if bias is not None:
        if bias.ndim != 1 or bias.data.shape[0] != cout:
            raise DimensionError(f"conv1d bias shape {bias.data.shape}, expected ({cout},)")
        y += bias.data
    out = _result(y.reshape(batch, lo_len, cout))
    parents = (x, w) if bias is None else (x, w, bias)

    def fn(g, x=x, w=w, bias=bias, patches=patches):
        g2 = g.reshape(batch * lo_len, cout)
        if bias is not None and bias.requires_grad:
            _accum(bias, g2.sum(axis=0))
        if w.requires_grad:
            _accum(w, (patches.T @ g2).reshape(k, cin, cout))
        if x.requires_grad:
            dxp = np.zeros((batch, lp, cin), dtype=x.data.dtype)
            for i in range(k):
                dxp[:, i : i + stride * lo_len : stride, :] += g @ w.data[i].T
            _accum(x, dxp[:, pl : pl + length, :])

    return _record("conv1d", out, parents, fn)


def transposed_conv1d(y, w, bias=None, padding="same"):
    """Adjoint of ``conv1d`` (stride 1): maps out_channels back to in_channels.

    y: [batch, length, out_channels], w: [kernel, in_channels, out_channels]
    shaped exactly like the convolution it mirrors.  With zero biases,
    <conv1d(x), y> == <x, transposed_conv1d(y)> holds exactly.
    """
    if y.ndim != 3 or w.ndim != 3:
        raise DimensionError(f"transposed_conv1d: y {y.data.shape}, w {w.data.shape}")
    batch, li, cout = y.data.shape
    k, cin, wcout = w.data.shape
    if wcout != cout:
        raise DimensionError(
            f"transposed_conv1d channel mismatch: input has {cout}, weight expects {wcout}"
        )
    pl, pr = _conv_pads(k, padding)
    lo_len = li if padding == "same" else li + k - 1
    lp = lo_len + pl + pr
    op = np.zeros((batch, lp, cin), dtype=y.data.dtype)
    for i in range(k):
        op[:, i : i + li, :] += y.data @ w.data[i].T
    res = np.ascontiguousarray(op[:, pl : pl + lo_len, :])
    if bias is not None:
        if bias.ndim != 1 or bias.data.shape[0] != cin:
            raise DimensionError(
                f"transposed_conv1d bias shape {bias.data.shape}, expected ({cin},)"
            )
        res = res + bias.data
    out = _result(res)
    parents = (y, w) if bias is None else (y, w, bias)

    def fn(g, y=y, w=w, bias=bias):
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 1)))
        gp = np.pad(g, ((0, 0), (pl, pr), (0, 0)))
        win = sliding_window_view(gp, k, axis=1)  # [B, Li, Cin, k]
        patches = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(
            batch * li, k * cin
        )
        if y.requires_grad:
            w2 = w.data.reshape(k * cin, cout)
            _accum(y, (patches @ w2).reshape(batch, li, cout))
        if w.requires_grad:
            y2 = y.data.reshape(batch * li, cout)
            _accum(w, (patches.T @ y2).reshape(k, cin, cout))

    return _record("transposed_conv1d", out, parents, fn)


# ---------------------------------------------------------------------------
# reductions and losses


def sum_all(a):
    out = _result(np.asarray(a.data.sum(), dtype=a.data.dtype))

    def fn(g, a=a):
        _accum(a, g)

    return _record("sum_all", out, (a,), fn)


def mean_all(a):
    out = _result(np.asarray(a.data.mean(), dtype=a.data.dtype))
    inv = 1.0 / a.data.size

    def fn(g, a=a, inv=inv):
        _accum(a, g * inv)

    return _record("mean_all", out, (a,), fn)


def mse_loss(pred, target):
    """Mean squared error over all elements."""
    _check_same_shape(pred, target, "mse_loss")
    diff = pred.data - target.data
    out = _result(np.asarray(np.mean(diff * diff), dtype=pred.data.dtype))
    inv = 2.0 / diff.size

    def fn(g, pred=pred, target=target, diff=diff, inv=inv):
        d = (g * inv) * diff
        _accum(pred, d)
        _accum(target, -d)

    return _record("mse_loss", out, (pred, target), fn)


def cross_entropy_loss(logits, labels):
    """Mean categorical cross-entropy from raw logits.

    Fused with log-sum-exp for stability.  ``labels`` is an int array of
    class indices, one per row.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy_loss expects 2-D logits, got {logits.data.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.data.shape[0]:
        raise DimensionError(
            f"cross_entropy_loss: {labels.shape} labels for {logits.data.shape} logits"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        raise LabelError(f"labels must be integers, got dtype {labels.dtype}")
    n, ncls = logits.data.shape
    if labels.min() < 0 or labels.max() >= ncls:
        raise LabelError(
            f"label out of range [0, {ncls}): min {labels.min()}, max {labels.max()}"
        )
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    se = e.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(se[:, 0])
    picked = z[np.arange(n), labels]
    out = _result(np.asarray(np.mean(lse - picked), dtype=z.dtype))

    def fn(g, logits=logits, labels=labels, e=e, se=se, n=n):
        p = e / se
        p[np.arange(n), labels] -= 1.0
        _accum(logits, (g / n) * p)

    return _record("cross_entropy_loss", out, (logits,), fn)
