"""Optimizers and gradient utilities."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from . import kernels
from .tensor import Tensor


class Adam:
    """Bias-corrected Adam over a fixed parameter collection.

    Moments are allocated once, matching each parameter's shape and dtype;
    the step counter increments by exactly one per ``step`` call.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ConfigError(f"Adam lr must be positive, got {lr}")
        self.params = list(params.values()) if isinstance(params, dict) else list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.values.shape:
                raise ShapeError(f"Adam: grad shape {g.shape} != param shape {p.values.shape}")
            kernels.adam_update(p.values, g.astype(p.values.dtype, copy=False),
                                self.m[i], self.v[i],
                                self.lr, self.beta1, self.beta2, self.eps, c1, c2)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def global_grad_norm(grads):
    """Global L2 norm over the concatenation of all arrays (accumulated in float64)."""
    total = 0.0
    for g in grads:
        g64 = np.asarray(g, dtype=np.float64).ravel()
        total += float(np.dot(g64, g64))
    return float(np.sqrt(total))


def clip_grad_norm(grads, max_norm):
    """Scale all arrays in place so the global L2 norm is at most ``max_norm``.

    Returns the pre-clip norm. Arrays below the threshold are untouched.
    """
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    grads = list(grads)
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= g.dtype.type(scale) if hasattr(g, "dtype") else scale
    return norm


def clip_param_grads(params, max_norm):
    """clip_grad_norm over the ``.grad`` slots of parameters that have one."""
    grads = [p.grad for p in (params.values() if isinstance(params, dict) else params)
             if isinstance(p, Tensor) and p.grad is not None]
    if not grads:
        return 0.0
    return clip_grad_norm(grads, max_norm)
