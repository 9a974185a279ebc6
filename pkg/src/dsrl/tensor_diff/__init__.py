"""Minimal reverse-mode tensor engine, Adam optimizer, and gradient checks."""

from .tensor import (
    Tensor,
    absolute,
    add,
    arccosh,
    as_tensor,
    backward,
    clamp_min,
    concat,
    cosh,
    div,
    dropout,
    exp,
    getitem,
    grad_enabled,
    log,
    matmul,
    max_pool1d,
    mean,
    mul,
    neg,
    no_grad,
    norm,
    parameter,
    power,
    relu,
    reshape,
    sigmoid,
    sinh,
    sinhc,
    softmax,
    sqrt,
    sub,
    tanh,
    transpose,
    tsum,
)
from .optim import OptimizerState, adam_step, cosine_lr
from .gradcheck import analytic_grad, grad_check, numeric_grad

forward_ops = {
    "matmul": matmul,
    "add": add,
    "subtract": sub,
    "multiply": mul,
    "divide": div,
    "concat": concat,
    "softmax": softmax,
    "sigmoid": sigmoid,
    "relu": relu,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "arccosh": arccosh,
    "cosh": cosh,
    "sinh": sinh,
    "sum": tsum,
    "mean": mean,
    "max_pool": max_pool1d,
    "norm": norm,
    "dropout": dropout,
}
