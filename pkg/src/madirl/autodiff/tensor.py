"""Reverse-mode automatic differentiation over numpy arrays.

Define-by-run tape: each op returns a :class:`Tensor` that records its parent
tensors and a function mapping the output gradient to parent gradients.
``backward`` walks the tape once in reverse topological order and accumulates
gradients on the leaf tensors that require them.

Storage is float32 in training code; every op is dtype-generic and the
gradient-check path runs the same graph in float64. Forward results are
checked for NaN/Inf after every op and raise :class:`NumericError`.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError, UsageError
from . import kernels

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True
_kink_margins = None


class record_kink_margins:
    """Collect, for every kinked op evaluated inside the context, the smallest
    distance of its inputs to the non-smooth point. Central-difference
    oracles are only trustworthy when these margins exceed the probe step;
    gradient-check harnesses use this to screen evaluation points."""

    def __enter__(self):
        global _kink_margins
        self._prev = _kink_margins
        _kink_margins = []
        return _kink_margins

    def __exit__(self, *exc):
        global _kink_margins
        _kink_margins = self._prev
        return False


def _record_kink(distances):
    if _kink_margins is not None and distances.size:
        _kink_margins.append(float(np.min(np.abs(distances))))


class no_grad:
    """Context manager disabling tape construction (forward-only evaluation)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_grad_fn")

    def __init__(self, values, requires_grad=False, name=None):
        v = np.asarray(values)
        if v.dtype.type not in _FLOAT_DTYPES:
            v = v.astype(np.float64)
        self.values = v
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._grad_fn = None

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self):
        return float(self.values)

    def detach(self):
        t = Tensor(self.values)
        return t

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, dtype={self.values.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, s):
        if isinstance(s, Tensor):
            raise UsageError("tensor/tensor division is not part of the op set")
        return mul(self, 1.0 / float(s))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, output_grad=None):
        backward(self, output_grad)


def parameter(values, name=None):
    """A leaf tensor with a gradient slot (the home of all learnable weights)."""
    return Tensor(values, requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# graph plumbing
# ---------------------------------------------------------------------------

def _check_finite(values, op_name):
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite values produced by op '{op_name}'")


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.values.dtype if isinstance(like, Tensor) else np.float64
    return Tensor(np.asarray(x, dtype=dtype))


def _node(values, op_name, parents, grad_fn):
    _check_finite(values, op_name)
    out = Tensor(values)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(out, output_grad=None):
    """Accumulate d(out)/d(leaf) into ``.grad`` of every reachable leaf.

    ``out`` must come from a tracked forward pass (or itself require grad).
    """
    if not out.requires_grad:
        raise UsageError("backward called on a tensor that does not require grad "
                         "(was the forward pass run under no_grad?)")
    if output_grad is None:
        seed = np.ones_like(out.values)
    else:
        seed = np.asarray(output_grad, dtype=out.values.dtype)
        if seed.shape != out.values.shape:
            raise ShapeError(f"output_grad shape {seed.shape} != tensor shape {out.values.shape}")

    # reverse topological order, iterative to survive deep graphs
    topo, visited, stack = [], set(), [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    grads = {id(out): seed}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            # leaf: accumulate into the persistent grad slot
            node.grad = g if node.grad is None else node.grad + g
            _check_finite(node.grad, "backward")
            continue
        for p, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------

def add(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    try:
        out = a.values + b.values
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def grad_fn(g):
        return (_unbroadcast(g, a.values.shape), _unbroadcast(g, b.values.shape))

    return _node(out, "add", (a, b), grad_fn)


def sub(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    try:
        out = a.values - b.values
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")

    def grad_fn(g):
        return (_unbroadcast(g, a.values.shape), _unbroadcast(-g, b.values.shape))

    return _node(out, "sub", (a, b), grad_fn)


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    try:
        out = a.values * b.values
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    av, bv = a.values, b.values

    def grad_fn(g):
        return (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape))

    return _node(out, "mul", (a, b), grad_fn)


def neg(a):
    a = _as_tensor(a)
    return _node(-a.values, "neg", (a,), lambda g: (-g,))


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def grad_fn(g):
        return (g @ bv.T, av.T @ g)

    return _node(av @ bv, "matmul", (a, b), grad_fn)


def leaky_relu(a, negative_slope=0.01):
    a = _as_tensor(a)
    av = a.values
    _record_kink(av)
    out = kernels.leaky_relu(av, negative_slope)

    def grad_fn(g):
        return (kernels.leaky_relu_grad(g, av, negative_slope),)

    return _node(out, "leaky_relu", (a,), grad_fn)


def sigmoid(a):
    a = _as_tensor(a)
    out = kernels.sigmoid(a.values)
    ov = out

    def grad_fn(g):
        return (g * ov * (1.0 - ov),)

    return _node(out, "sigmoid", (a,), grad_fn)


def log_sigmoid(a):
    a = _as_tensor(a)
    av = a.values
    out = kernels.log_sigmoid(av)

    def grad_fn(g):
        return (g * kernels.sigmoid(-av),)

    return _node(out, "log_sigmoid", (a,), grad_fn)


def exp(a):
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.values)
    ov = out

    def grad_fn(g):
        return (g * ov,)

    return _node(out, "exp", (a,), grad_fn)


def log(a):
    a = _as_tensor(a)
    av = a.values
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)

    def grad_fn(g):
        return (g / av,)

    return _node(out, "log", (a,), grad_fn)


def _rows(a, op_name):
    if a.values.ndim == 1:
        return a.values[None, :], True
    if a.values.ndim == 2:
        return a.values, False
    raise ShapeError(f"{op_name}: expected 1-D or 2-D input, got shape {a.shape}")


def softmax(a):
    """Row-wise softmax with max-subtraction; strictly positive, rows sum to 1."""
    a = _as_tensor(a)
    rows, squeeze = _rows(a, "softmax")
    out2 = kernels.softmax_rows(rows)
    ov = out2

    def grad_fn(g):
        g2 = g[None, :] if squeeze else g
        gy = g2 * ov
        gx = gy - ov * gy.sum(axis=1, keepdims=True)
        return (gx[0] if squeeze else gx,)

    return _node(out2[0] if squeeze else out2, "softmax", (a,), grad_fn)


def log_softmax(a):
    a = _as_tensor(a)
    rows, squeeze = _rows(a, "log_softmax")
    out2 = kernels.log_softmax_rows(rows)
    sm = None

    def grad_fn(g):
        nonlocal sm
        if sm is None:
            sm = np.exp(out2)
        g2 = g[None, :] if squeeze else g
        gx = g2 - sm * g2.sum(axis=1, keepdims=True)
        return (gx[0] if squeeze else gx,)

    return _node(out2[0] if squeeze else out2, "log_softmax", (a,), grad_fn)


def gather(a, index):
    """Pick one column per row: out[b] = a[b, index[b]]. Returns shape (B,)."""
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise ShapeError(f"gather: expected 2-D input, got shape {a.shape}")
    idx = np.asarray(index)
    if idx.ndim != 1 or idx.shape[0] != a.shape[0]:
        raise ShapeError(f"gather: index shape {idx.shape} does not match rows {a.shape[0]}")
    if idx.min() < 0 or idx.max() >= a.shape[1]:
        raise ShapeError(f"gather: index out of range for {a.shape[1]} columns")
    rows = np.arange(a.shape[0])
    av_shape = a.values.shape

    def grad_fn(g):
        gx = np.zeros(av_shape, dtype=g.dtype)
        gx[rows, idx] = g  # one entry per row: plain assignment scatters exactly
        return (gx,)

    return _node(a.values[rows, idx], "gather", (a,), grad_fn)


def reduce_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    av_shape = a.values.shape
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, av_shape).astype(g.dtype, copy=False),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, av_shape).astype(g.dtype, copy=False),)

    return _node(out, "sum", (a,), grad_fn)


def reduce_mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    av_shape = a.values.shape
    out = a.values.mean(axis=axis, keepdims=keepdims)
    count = a.values.size if axis is None else av_shape[axis]

    def grad_fn(g):
        scale = g / count
        if axis is None:
            return (np.broadcast_to(scale, av_shape).astype(g.dtype, copy=False),)
        g2 = scale if keepdims else np.expand_dims(scale, axis)
        return (np.broadcast_to(g2, av_shape).astype(g.dtype, copy=False),)

    return _node(out, "mean", (a,), grad_fn)


def concat(tensors, axis=1):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} "
                         f"do not align on axis {axis}")
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, "concat", tuple(tensors), grad_fn)


def narrow(a, axis, start, length):
    """Contiguous slice along ``axis``."""
    a = _as_tensor(a)
    if not (0 <= start and start + length <= a.shape[axis]):
        raise ShapeError(f"narrow: [{start}:{start + length}] out of range "
                         f"for axis {axis} of shape {a.shape}")
    sl = [slice(None)] * a.values.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    av_shape = a.values.shape

    def grad_fn(g):
        gx = np.zeros(av_shape, dtype=g.dtype)
        gx[sl] = g
        return (gx,)

    return _node(a.values[sl].copy(), "narrow", (a,), grad_fn)


def reshape(a, shape):
    a = _as_tensor(a)
    av_shape = a.values.shape
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {av_shape} as {shape}")

    def grad_fn(g):
        return (g.reshape(av_shape),)

    return _node(out, "reshape", (a,), grad_fn)


def huber(pred, target, delta=1.0):
    """Mean Huber loss against a constant target: 0.5*d^2 for |d|<=delta,
    else delta*(|d| - 0.5*delta), averaged over all elements."""
    from ..errors import ConfigError

    if delta <= 0:
        raise ConfigError(f"huber delta must be positive, got {delta}")
    pred = _as_tensor(pred)
    tv = np.asarray(target, dtype=pred.values.dtype)
    if tv.shape != pred.values.shape:
        raise ShapeError(f"huber: pred shape {pred.shape} != target shape {tv.shape}")
    diff = pred.values - tv
    _record_kink(np.abs(diff) - delta)
    total, dgrad = kernels.huber(diff, delta)
    n = diff.size

    def grad_fn(g):
        return (g * dgrad / n,)

    return _node(np.asarray(total / n, dtype=pred.values.dtype), "huber", (pred,), grad_fn)
