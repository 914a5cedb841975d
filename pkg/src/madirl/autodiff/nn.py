"""Small module/parameter containers on top of the autodiff tape."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, add, leaky_relu, matmul, parameter


class Module:
    """Base container. Parameters are discovered by scanning attributes
    (Tensor leaves, sub-Modules, and lists of either) so composite networks
    get hierarchical dotted names for free."""

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            name = f"{prefix}{key}" if prefix else key
            if isinstance(val, Tensor):
                if val.requires_grad:
                    out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(prefix=name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Tensor):
                        if item.requires_grad:
                            out[f"{name}.{i}"] = item
                    elif isinstance(item, Module):
                        out.update(item.named_parameters(prefix=f"{name}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def value_dict(self, prefix=""):
        """Copies of parameter arrays keyed by (optionally prefixed) name."""
        return {f"{prefix}{k}": v.values.copy() for k, v in self.named_parameters().items()}

    def load_values(self, named, prefix="", strict=True):
        """Assign parameter arrays from ``named`` (name -> ndarray)."""
        params = self.named_parameters()
        for key, p in params.items():
            full = f"{prefix}{key}"
            if full not in named:
                if strict:
                    raise ShapeError(f"missing parameter '{full}' in checkpoint values")
                continue
            v = np.asarray(named[full])
            if v.shape != p.values.shape:
                raise ShapeError(f"parameter '{full}': checkpoint shape {v.shape} "
                                 f"!= model shape {p.values.shape}")
            p.values = v.astype(p.values.dtype, copy=True)

    def param_count(self):
        return int(sum(p.values.size for p in self.parameters()))


def copy_values(dst: Module, src: Module):
    """Overwrite dst's parameter arrays with copies of src's (target-net init)."""
    sp = src.named_parameters()
    for name, p in dst.named_parameters().items():
        if name not in sp:
            raise ShapeError(f"source module lacks parameter '{name}'")
        sv = sp[name].values
        if sv.shape != p.values.shape:
            raise ShapeError(f"parameter '{name}': source shape {sv.shape} "
                             f"!= destination shape {p.values.shape}")
        p.values = sv.copy()


class Linear(Module):
    """Affine map x @ W + b with fan-in uniform init."""

    def __init__(self, in_dim, out_dim, rng, bias=True, dtype=np.float32):
        bound = 1.0 / np.sqrt(in_dim)
        self.W = parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)).astype(dtype))
        self.b = parameter(rng.uniform(-bound, bound, size=(out_dim,)).astype(dtype)) if bias else None

    def __call__(self, x):
        y = matmul(x, self.W)
        return add(y, self.b) if self.b is not None else y


class MLP(Module):
    """Dense stack with LeakyReLU between layers and a linear output layer."""

    def __init__(self, dims, rng, negative_slope=0.01, dtype=np.float32):
        if len(dims) < 2:
            raise ShapeError("MLP needs at least input and output dims")
        self.layers = [Linear(dims[i], dims[i + 1], rng, dtype=dtype)
                       for i in range(len(dims) - 1)]
        self.negative_slope = negative_slope

    def __call__(self, x):
        for layer in self.layers[:-1]:
            x = leaky_relu(layer(x), self.negative_slope)
        return self.layers[-1](x)


def one_hot(indices, n, dtype=np.float32):
    """Constant one-hot matrix for integer action indices."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.zeros((idx.shape[0], n), dtype=dtype)
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out
