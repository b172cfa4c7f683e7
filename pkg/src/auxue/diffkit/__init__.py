"""Reverse-mode autodiff over dense float64 tensors, with the
log-gamma/digamma special functions the evidential and NIG losses need."""

from .special import backend_name
from .special import digamma as digamma_value
from .special import lgamma as lgamma_value
from .special import trigamma as trigamma_value
from .tensor import (
    GradNode,
    Tensor,
    absolute,
    add,
    add_bias,
    as_tensor,
    backward,
    digamma,
    divide,
    exp,
    grad_check,
    lgamma,
    log,
    make_node,
    matmul,
    mean,
    multiply,
    negative,
    power,
    relu,
    reshape,
    rowsum,
    softplus,
    subtract,
    sum,
    take_column,
    transpose,
)

__all__ = [
    "GradNode",
    "Tensor",
    "absolute",
    "add",
    "add_bias",
    "as_tensor",
    "backend_name",
    "backward",
    "digamma",
    "digamma_value",
    "divide",
    "exp",
    "grad_check",
    "lgamma",
    "lgamma_value",
    "log",
    "make_node",
    "matmul",
    "mean",
    "multiply",
    "negative",
    "power",
    "relu",
    "reshape",
    "rowsum",
    "softplus",
    "subtract",
    "sum",
    "take_column",
    "transpose",
    "trigamma_value",
]
