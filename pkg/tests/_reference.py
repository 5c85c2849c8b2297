"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (nested loops, explicit
matrices, plain python floats) on purpose: these are the second route that
the fast library code is checked against.  Keep them dumb.
"""

import math

import numpy as np


def conv_pads(k, padding):
    if padding == "same":
        left = (k - 1) // 2
        return left, k - 1 - left
    return 0, 0


def naive_conv1d(x, w, bias=None, padding="same", stride=1):
    """Nested-loop 1-D convolution. x: [B,L,Ci], w: [k,Ci,Co]."""
    batch, length, cin = x.shape
    k, _, cout = w.shape
    pl, pr = conv_pads(k, padding)
    xp = np.zeros((batch, length + pl + pr, cin), dtype=np.float64)
    xp[:, pl : pl + length, :] = x
    lo = (xp.shape[1] - k) // stride + 1
    y = np.zeros((batch, lo, cout), dtype=np.float64)
    for b in range(batch):
        for t in range(lo):
            for co in range(cout):
                acc = 0.0
                for i in range(k):
                    for ci in range(cin):
                        acc += xp[b, t * stride + i, ci] * w[i, ci, co]
                y[b, t, co] = acc + (bias[co] if bias is not None else 0.0)
    return y


def conv_matrix(length, w, padding="same"):
    """Dense matrix of the linear map behind naive_conv1d (single batch).

    Flattens [L, Ci] inputs and [Lo, Co] outputs in C order.  Used to build
    the transposed-convolution oracle as an explicit matrix transpose.
    """
    k, cin, cout = w.shape
    lo = length if padding == "same" else length - k + 1
    m = np.zeros((lo * cout, length * cin), dtype=np.float64)
    for j in range(length * cin):
        e = np.zeros((1, length, cin), dtype=np.float64)
        e[0, j // cin, j % cin] = 1.0
        m[:, j] = naive_conv1d(e, w, padding=padding)[0].reshape(-1)
    return m


def naive_transposed_conv1d(y, w, bias=None, padding="same"):
    """Transposed convolution as the explicit adjoint of the conv matrix."""
    batch, li, cout = y.shape
    k, cin, _ = w.shape
    lo = li if padding == "same" else li + k - 1
    m = conv_matrix(lo, w, padding)  # maps [lo*cin] -> [li*cout]
    out = np.zeros((batch, lo, cin), dtype=np.float64)
    for b in range(batch):
        out[b] = (m.T @ y[b].reshape(-1)).reshape(lo, cin)
        if bias is not None:
            out[b] += bias
    return out


def scalar_lstm_step(x, h, c, wx, wh, bias):
    """Single-unit LSTM step on plain floats. Gate order (i, f, g, o)."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    zi = x * wx[0] + h * wh[0] + bias[0]
    zf = x * wx[1] + h * wh[1] + bias[1]
    zg = x * wx[2] + h * wh[2] + bias[2]
    zo = x * wx[3] + h * wh[3] + bias[3]
    i, f, g, o = sig(zi), sig(zf), math.tanh(zg), sig(zo)
    c_next = f * c + i * g
    h_next = o * math.tanh(c_next)
    return h_next, c_next


def pairwise_auc(scores, labels):
    """AUC as the pairwise rank statistic: P(pos > neg) + 0.5 P(tie)."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0
    ties = 0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 2
            elif p == n:
                ties += 1
    return (wins + ties) / (2.0 * len(pos) * len(neg))


def explicit_mahalanobis(e, mean, cov):
    """Mahalanobis distance via the explicit matrix inverse."""
    d = np.asarray(e, dtype=np.float64) - mean
    return float(math.sqrt(d @ np.linalg.inv(cov) @ d))


def adam_scalar_steps(grads, lr=0.01, eps=0.01, beta1=0.9, beta2=0.999, w0=0.0):
    """Adam on one scalar weight, written out longhand."""
    w, m, v = w0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        w = w - lr * mhat / (math.sqrt(vhat) + eps)
    return w
