"""Dense-layer kernel: forward/backward passes, dropout, Adam and a
finite-difference gradient oracle.

Everything works on float64 numpy arrays.  Parameters live in a flat
``dict[str, ndarray]`` so the optimizer and the checkpoint writer can treat
them uniformly; layers only hold names and shapes.
"""

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid")


class DimensionError(ValueError):
    pass


class UsageError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def glorot_uniform(rng, n_in, n_out):
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


def sigmoid(x):
    # exp(-softplus(-x)) never overflows
    return np.exp(-np.logaddexp(0.0, -x))


def affine_forward(W, b, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.shape[1]:
        raise DimensionError(
            f"input shape {x.shape} does not match weight shape {W.shape}"
        )
    return x @ W.T + b


def activation(x, kind):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_backward(kind, y, dy):
    """Gradient through an activation, expressed via its output ``y``."""
    if y is None:
        raise UsageError("activation_backward called without a forward cache")
    if kind == "relu":
        return dy * (y > 0.0)
    if kind == "tanh":
        return dy * (1.0 - y * y)
    if kind == "sigmoid":
        return dy * y * (1.0 - y)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class DropoutMask:
    p_keep: float
    train: bool
    mask: np.ndarray | None = None


def dropout_forward(x, p_keep, rng=None, train=True):
    """Inverted dropout. Returns ``(y, DropoutMask)``; eval mode is identity."""
    if not 0.0 < p_keep <= 1.0:
        raise ValueError(f"p_keep must be in (0, 1], got {p_keep}")
    if not train or p_keep == 1.0:
        return x, DropoutMask(p_keep, False)
    mask = rng.random(x.shape) < p_keep
    return x * mask / p_keep, DropoutMask(p_keep, True, mask)


def dropout_backward(cache, dy):
    if cache is None:
        raise UsageError("dropout_backward called without a forward cache")
    if not cache.train:
        return dy
    return dy * cache.mask / cache.p_keep


class Dense:
    """Affine layer ``y = x W^T + b`` whose weights sit in a params dict."""

    def __init__(self, name, n_in, n_out):
        self.name = name
        self.n_in = n_in
        self.n_out = n_out
        self.W = name + ".W"
        self.b = name + ".b"

    def init(self, params, rng):
        params[self.W] = glorot_uniform(rng, self.n_in, self.n_out)
        params[self.b] = np.zeros(self.n_out)

    def forward(self, params, x):
        return affine_forward(params[self.W], params[self.b], x), x

    def backward(self, params, grads, cache, dy):
        if cache is None:
            raise UsageError(f"{self.name}: backward called without a forward cache")
        x = cache
        grads[self.W] += dy.T @ x
        grads[self.b] += dy.sum(axis=0)
        return dy @ params[self.W]


def zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


@dataclass
class AdamState:
    lr: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One Adam update with bias correction. Returns a new params dict."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        out[name] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return out


def numeric_grad(f, params, name, h=1e-5):
    """Central finite differences of scalar ``f(params)`` w.r.t. one tensor."""
    base = params[name]
    g = np.zeros_like(base)
    flat = g.reshape(-1)
    for i in range(base.size):
        for sign in (1.0, -1.0):
            pert = base.copy()
            pert.reshape(-1)[i] += sign * h
            params[name] = pert
            flat[i] += sign * f(params)
        flat[i] /= 2.0 * h
    params[name] = base
    return g


def relative_error(analytic, numeric, floor=1e-6):
    """Max elementwise |a - n| / max(|a| + |n|, floor)."""
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)))


def gradcheck(f, grad_f, params, h=1e-5, names=None):
    """Compare ``grad_f(params)`` against central differences of ``f``.

    Returns ``{param name: max relative error}``.
    """
    analytic = grad_f(params)
    out = {}
    for name in names or sorted(params):
        out[name] = relative_error(analytic[name], numeric_grad(f, params, name, h))
    return out
