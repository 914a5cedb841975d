"""Finite-difference oracles for validating analytic gradients.

These run the float64 path: the caller builds the network under test with
``dtype=np.float64`` and hands over a loss closure; every parameter
coordinate is perturbed centrally and compared against the tape's gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import no_grad, record_kink_margins


def finite_difference_gradient(fn, point, eps=1e-3):
    """Central-difference gradient of a scalar function at ``point``.

    ``fn`` maps an ndarray to a float; the estimate per coordinate is
    (f(x + eps*e_k) - f(x - eps*e_k)) / (2*eps).
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    p = np.array(point, dtype=np.float64)
    grad = np.zeros_like(p)
    flat = p.ravel()
    gflat = grad.ravel()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        hi = float(fn(p))
        flat[k] = orig - eps
        lo = float(fn(p))
        flat[k] = orig
        gflat[k] = (hi - lo) / (2.0 * eps)
    return grad


def relative_error(analytic, numeric):
    """max over coordinates of |analytic - numeric| / max(1, |numeric|)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n))))


def check_gradients(loss_fn, params, eps=1e-3):
    """Compare tape gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild the loss from the parameters' current values on
    every call. ``params`` is a name -> Tensor mapping (float64 recommended).
    Returns the worst relative error over all parameter coordinates.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.values))
                for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        base = p.values

        def eval_at(x, _p=p):
            _p.values = x
            with no_grad():
                out = float(loss_fn().values)
            _p.values = base
            return out

        numeric = finite_difference_gradient(eval_at, base, eps=eps)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst


def smooth_seeds(case_builder, n_seeds, eps=1e-3, margin_factor=5, start=0,
                 max_tries=10_000):
    """First ``n_seeds`` integers whose randomized case keeps every kinked op
    at least ``margin_factor * eps`` away from its non-smooth point.

    ``case_builder(seed)`` returns a zero-argument loss closure. Central
    differences mis-estimate piecewise-smooth functions when a probe step can
    cross a kink, so gradient checks sample their random points from this
    filtered sequence; the analytic gradients themselves are exact everywhere.
    """
    found = []
    seed = start
    while len(found) < n_seeds:
        if seed - start >= max_tries:
            raise ConfigError("could not find enough kink-free gradient-check points")
        loss_fn = case_builder(seed)
        with record_kink_margins() as margins:
            with no_grad():
                loss_fn()
        if not margins or min(margins) > margin_factor * eps:
            found.append(seed)
        seed += 1
    return found
