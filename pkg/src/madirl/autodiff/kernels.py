"""Hot numeric kernels with optional numba acceleration.

Matrix products go through BLAS and are left to numpy; the kernels here are
the fused element-wise and row-wise loops that otherwise allocate several
temporaries per call (activations, stable softmax, the Adam update).

Path selection via the ``MADIRL_NUMBA`` environment variable:
  * ``auto`` (default) - use numba when importable, else pure numpy;
  * ``0``              - force the pure-numpy reference path;
  * ``1``              - require numba, raise if it is unavailable.

Both paths implement the same math; ``benchmarks/bench_kernels.py`` compares
them. All kernels are dtype-generic over float32/float64.
"""

import math
import os

import numpy as np

_MODE = os.environ.get("MADIRL_NUMBA", "auto").strip().lower()
if _MODE not in ("auto", "0", "1"):
    raise RuntimeError(f"MADIRL_NUMBA must be 'auto', '0' or '1', got {_MODE!r}")

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - sandbox always ships numba
    _HAVE_NUMBA = False

if _MODE == "1" and not _HAVE_NUMBA:
    raise RuntimeError("MADIRL_NUMBA=1 but numba is not importable")

NUMBA_ENABLED = _HAVE_NUMBA and _MODE != "0"


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def _leaky_relu_np(x, slope):
    return np.where(x >= 0, x, slope * x)


def _leaky_relu_grad_np(g, x, slope):
    return np.where(x >= 0, g, slope * g)


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid_np(x):
    # -softplus(-x), split by sign for stability
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


def _softmax_rows_np(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows_np(x):
    z = x - x.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _adam_update_np(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
    # c1 = 1 - beta1**t, c2 = 1 - beta2**t (bias corrections)
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= (lr / c1) * m / (np.sqrt(v / c2) + eps)


def _huber_np(diff, delta):
    """Returns (sum of per-element Huber losses, per-element d/d(diff))."""
    a = np.abs(diff)
    quad = a <= delta
    loss = np.where(quad, 0.5 * diff * diff, delta * (a - 0.5 * delta))
    grad = np.clip(diff, -delta, delta)
    return float(loss.sum()), grad


# ---------------------------------------------------------------------------
# numba implementations (flat loops over contiguous views)
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _leaky_relu_nb(x, slope):
        out = np.empty_like(x)
        for i in range(x.size):
            xi = x[i]
            out[i] = xi if xi >= 0 else slope * xi
        return out

    @njit(cache=True)
    def _leaky_relu_grad_nb(g, x, slope):
        out = np.empty_like(g)
        for i in range(x.size):
            out[i] = g[i] if x[i] >= 0 else slope * g[i]
        return out

    @njit(cache=True)
    def _sigmoid_nb(x):
        out = np.empty_like(x)
        for i in range(x.size):
            xi = x[i]
            if xi >= 0:
                out[i] = 1.0 / (1.0 + math.exp(-xi))
            else:
                e = math.exp(xi)
                out[i] = e / (1.0 + e)
        return out

    @njit(cache=True)
    def _log_sigmoid_nb(x):
        out = np.empty_like(x)
        for i in range(x.size):
            xi = x[i]
            if xi >= 0:
                out[i] = -math.log1p(math.exp(-xi))
            else:
                out[i] = xi - math.log1p(math.exp(xi))
        return out

    @njit(cache=True)
    def _softmax_rows_nb(x):
        out = np.empty_like(x)
        n, k = x.shape
        for r in range(n):
            mx = x[r, 0]
            for c in range(1, k):
                if x[r, c] > mx:
                    mx = x[r, c]
            s = 0.0
            for c in range(k):
                e = math.exp(x[r, c] - mx)
                out[r, c] = e
                s += e
            inv = 1.0 / s
            for c in range(k):
                out[r, c] *= inv
        return out

    @njit(cache=True)
    def _log_softmax_rows_nb(x):
        out = np.empty_like(x)
        n, k = x.shape
        for r in range(n):
            mx = x[r, 0]
            for c in range(1, k):
                if x[r, c] > mx:
                    mx = x[r, c]
            s = 0.0
            for c in range(k):
                s += math.exp(x[r, c] - mx)
            ls = math.log(s)
            for c in range(k):
                out[r, c] = x[r, c] - mx - ls
        return out

    @njit(cache=True)
    def _adam_update_nb(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
        scale = lr / c1
        for i in range(p.size):
            gi = g[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
            p[i] -= scale * m[i] / (math.sqrt(v[i] / c2) + eps)

    @njit(cache=True)
    def _huber_nb(diff, delta):
        grad = np.empty_like(diff)
        total = 0.0
        for i in range(diff.size):
            d = diff[i]
            a = abs(d)
            if a <= delta:
                total += 0.5 * d * d
                grad[i] = d
            else:
                total += delta * (a - 0.5 * delta)
                grad[i] = delta if d > 0 else -delta
        return total, grad


def _flat(x):
    return np.ascontiguousarray(x).reshape(-1)


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    def leaky_relu(x, slope):
        return _leaky_relu_nb(_flat(x), x.dtype.type(slope)).reshape(x.shape)

    def leaky_relu_grad(g, x, slope):
        return _leaky_relu_grad_nb(_flat(g), _flat(x), x.dtype.type(slope)).reshape(x.shape)

    def sigmoid(x):
        return _sigmoid_nb(_flat(x)).reshape(x.shape)

    def log_sigmoid(x):
        return _log_sigmoid_nb(_flat(x)).reshape(x.shape)

    def softmax_rows(x):
        return _softmax_rows_nb(np.ascontiguousarray(x))

    def log_softmax_rows(x):
        return _log_softmax_rows_nb(np.ascontiguousarray(x))

    def adam_update(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
        _adam_update_nb(_flat(p), _flat(g), _flat(m), _flat(v),
                        p.dtype.type(lr), p.dtype.type(beta1), p.dtype.type(beta2),
                        p.dtype.type(eps), p.dtype.type(c1), p.dtype.type(c2))

    def huber(diff, delta):
        total, grad = _huber_nb(_flat(diff), diff.dtype.type(delta))
        return float(total), grad.reshape(diff.shape)

else:

    def leaky_relu(x, slope):
        return _leaky_relu_np(x, x.dtype.type(slope))

    def leaky_relu_grad(g, x, slope):
        return _leaky_relu_grad_np(g, x, x.dtype.type(slope))

    sigmoid = _sigmoid_np
    log_sigmoid = _log_sigmoid_np
    softmax_rows = _softmax_rows_np
    log_softmax_rows = _log_softmax_rows_np

    def adam_update(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
        _adam_update_np(p, g, m, v, p.dtype.type(lr), p.dtype.type(beta1),
                        p.dtype.type(beta2), p.dtype.type(eps),
                        p.dtype.type(c1), p.dtype.type(c2))

    def huber(diff, delta):
        return _huber_np(diff, diff.dtype.type(delta))


# reference path always importable, for the benchmark and cross-path tests
numpy_impls = {
    "leaky_relu": lambda x, slope: _leaky_relu_np(x, x.dtype.type(slope)),
    "sigmoid": _sigmoid_np,
    "log_sigmoid": _log_sigmoid_np,
    "softmax_rows": _softmax_rows_np,
    "log_softmax_rows": _log_softmax_rows_np,
    "huber": lambda diff, delta: _huber_np(diff, diff.dtype.type(delta)),
}
