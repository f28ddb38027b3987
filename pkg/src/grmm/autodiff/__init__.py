from .tensor import (
    DEFAULT_DTYPE,
    NumericsError,
    ShapeError,
    Tape,
    Tensor,
    abs_,
    add,
    avg_pool2d,
    backward,
    broadcast_to,
    clamp,
    concat,
    constant,
    conv2d,
    conv_transpose2d,
    div,
    exp,
    getitem,
    l2_norm,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    pad2d,
    parameter,
    pow_,
    record,
    relu,
    reshape,
    set_nan_checks,
    sigmoid,
    softplus,
    sqrt,
    sub,
    sum_,
    tanh,
    transpose,
    upsample_bilinear,
    upsample_nearest,
)
from .adam import AdamState, adam_step, zero_grads
from .gradcheck import finite_diff_check

__all__ = [
    "DEFAULT_DTYPE", "NumericsError", "ShapeError", "Tape", "Tensor",
    "abs_", "add", "avg_pool2d", "backward", "broadcast_to", "clamp",
    "concat", "constant", "conv2d", "conv_transpose2d", "div", "exp",
    "getitem", "l2_norm", "leaky_relu", "log", "matmul", "mean", "mul",
    "neg", "no_grad", "pad2d", "parameter", "pow_", "record", "relu",
    "reshape", "set_nan_checks", "sigmoid", "softplus", "sqrt", "sub",
    "sum_", "tanh", "transpose", "upsample_bilinear", "upsample_nearest",
    "AdamState", "adam_step", "zero_grads", "finite_diff_check",
]
