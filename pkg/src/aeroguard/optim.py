"""Adam optimizer and the finite-difference gradient checker."""

from __future__ import annotations

import numpy as np

from . import tensor
from .errors import ContractError
from .tensor import Tensor, backward, no_grad


class Adam:
    """Adam with bias correction; epsilon sits outside the square root.

    One step with gradient g=1 from w=0 at defaults gives
    w = -lr * 1 / (1 + eps), which is the identity the unit tests pin.
    The large default epsilon is deliberate: it is what the training runs
    use, not the usual 1e-8.
    """

    def __init__(self, params, lr=0.01, eps=0.01, beta1=0.9, beta2=0.999):
        self.params = list(params)
        if not self.params:
            raise ContractError("Adam needs at least one parameter")
        self.lr = float(lr)
        self.eps = float(eps)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        """Apply one update from the gradients currently on the parameters.

        A parameter with grad None is treated as having zero gradient; its
        moments still decay, matching the usual convention.
        """
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else 0.0
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g if isinstance(g, np.ndarray) else 0.0)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


class GradCheckReport:
    """Per-parameter worst relative errors from a finite-difference check."""

    def __init__(self, entries):
        self.entries = entries  # list of (name, max_rel_err, checked_coords)

    @property
    def max_rel_err(self):
        return max((e[1] for e in self.entries), default=0.0)

    def __str__(self):
        lines = [f"{name}: max rel err {err:.3e} over {n} coords"
                 for name, err, n in self.entries]
        lines.append(f"overall max rel err {self.max_rel_err:.3e}")
        return "\n".join(lines)


def gradient_check(loss_fn, named_params, h=1e-5, max_coords=64, seed=0):
    """Compare analytic gradients against central differences.

    ``loss_fn`` is a zero-argument callable that runs the forward pass and
    returns a scalar loss Tensor; it must be deterministic.  ``named_params``
    is a list of (name, Tensor) pairs.  Requires the float64 compute mode,
    since float32 cancellation at h=1e-5 would drown the comparison.

    At most ``max_coords`` coordinates per parameter are probed (all of them
    when the parameter is small), chosen by a seeded generator.
    """
    if tensor.get_dtype() is not np.float64:
        raise ContractError("gradient_check requires the float64 compute mode")
    named_params = list(named_params)
    for _, p in named_params:
        p.grad = None
    loss = loss_fn()
    backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in named_params}

    rng = np.random.default_rng(seed)
    entries = []
    for name, p in named_params:
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords, replace=False)
        worst = 0.0
        ana = analytic[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            with no_grad():
                flat[idx] = orig + h
                hi = float(loss_fn().data)
                flat[idx] = orig - h
                lo = float(loss_fn().data)
            flat[idx] = orig
            numeric = (hi - lo) / (2.0 * h)
            denom = max(abs(ana[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(ana[idx] - numeric) / denom)
        entries.append((name, worst, len(coords)))
    for _, p in named_params:
        p.grad = None
    tensor.clear_tape()
    return GradCheckReport(entries)
