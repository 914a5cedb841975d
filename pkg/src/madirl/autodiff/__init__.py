"""Minimal reverse-mode differentiation engine, layers, losses, optimizers."""

from .tensor import (Tensor, add, backward, concat, exp, gather, grad_enabled,
                     huber, leaky_relu, log, log_sigmoid, log_softmax, matmul,
                     mul, narrow, neg, no_grad, parameter, reduce_mean,
                     reduce_sum, reshape, sigmoid, softmax, sub)
from .nn import MLP, Linear, Module, copy_values, one_hot
from .optim import Adam, clip_grad_norm, clip_param_grads, global_grad_norm
from .gradcheck import (check_gradients, finite_difference_gradient,
                        relative_error, smooth_seeds)
from .checkpoint import load_params, save_params
from .kernels import NUMBA_ENABLED

__all__ = [
    "Tensor", "add", "backward", "concat", "exp", "gather", "grad_enabled",
    "huber", "leaky_relu", "log", "log_sigmoid", "log_softmax", "matmul",
    "mul", "narrow", "neg", "no_grad", "parameter", "reduce_mean",
    "reduce_sum", "reshape", "sigmoid", "softmax", "sub",
    "MLP", "Linear", "Module", "copy_values", "one_hot",
    "Adam", "clip_grad_norm", "clip_param_grads", "global_grad_norm",
    "check_gradients", "finite_difference_gradient", "relative_error",
    "smooth_seeds", "load_params", "save_params", "NUMBA_ENABLED",
]
